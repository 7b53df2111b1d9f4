//! Planar polygon support: dissolve, compactness, rook adjacency, and
//! population-weighted centroids.
//!
//! Inputs must be topologically clean: shared borders between zones are
//! represented by exactly coincident vertex sequences, and segments are
//! matched by exact coordinates (no snapping or tolerance).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde_json::Value;

use crate::baseline::AdjacencyMap;
use crate::error::{Error, Result};
use crate::partition::ZonePartition;
use crate::zones::ZoneId;

/// A closed ring: first vertex equals the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(pub Vec<(f64, f64)>);

impl Ring {
    /// Unsigned shoelace area.
    pub fn area(&self) -> f64 {
        let pts = &self.0;
        let mut twice = 0.0;
        for w in pts.windows(2) {
            let (x1, y1) = w[0];
            let (x2, y2) = w[1];
            twice += x1 * y2 - x2 * y1;
        }
        (twice / 2.0).abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.0
            .windows(2)
            .map(|w| {
                let (x1, y1) = w[0];
                let (x2, y2) = w[1];
                ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt()
            })
            .sum()
    }

    fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }
}

/// One simple polygon: an outer ring and optional holes.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonePolygon {
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

/// A zone's geometry (one or more polygons, projected planar coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneGeometry {
    pub zone: ZoneId,
    pub polygons: Vec<ZonePolygon>,
}

impl ZoneGeometry {
    /// Validate closed rings and nonzero outer areas.
    pub fn validate(&self) -> Result<()> {
        for poly in &self.polygons {
            for (ring, is_outer) in std::iter::once((&poly.outer, true))
                .chain(poly.holes.iter().map(|h| (h, false)))
            {
                if ring.0.len() < 4 {
                    return Err(Error::BadGeometry {
                        zone: self.zone.clone(),
                        message: "ring has fewer than 4 vertices".into(),
                    });
                }
                if ring.0.first() != ring.0.last() {
                    return Err(Error::BadGeometry {
                        zone: self.zone.clone(),
                        message: "ring is not closed".into(),
                    });
                }
                if is_outer && ring.area() == 0.0 {
                    return Err(Error::BadGeometry {
                        zone: self.zone.clone(),
                        message: "outer ring has zero area".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Area with holes subtracted.
    pub fn area(&self) -> f64 {
        self.polygons
            .iter()
            .map(|p| p.outer.area() - p.holes.iter().map(Ring::area).sum::<f64>())
            .sum()
    }

    /// Full boundary length (outer rings plus holes).
    pub fn perimeter(&self) -> f64 {
        self.polygons
            .iter()
            .map(|p| p.outer.perimeter() + p.holes.iter().map(Ring::perimeter).sum::<f64>())
            .sum()
    }
}

/// Exact-coordinate segment key, unordered. Negative zero is normalized so
/// `-0.0` and `0.0` coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct SegmentKey {
    a: (u64, u64),
    b: (u64, u64),
}

fn coord_bits(v: f64) -> u64 {
    (if v == 0.0 { 0.0 } else { v }).to_bits()
}

impl SegmentKey {
    fn new(p: (f64, f64), q: (f64, f64)) -> Self {
        let pk = (coord_bits(p.0), coord_bits(p.1));
        let qk = (coord_bits(q.0), coord_bits(q.1));
        if pk <= qk {
            Self { a: pk, b: qk }
        } else {
            Self { a: qk, b: pk }
        }
    }
}

fn segment_length(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt()
}

fn zone_segments(geometry: &ZoneGeometry) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
    geometry.polygons.iter().flat_map(|poly| {
        std::iter::once(&poly.outer)
            .chain(poly.holes.iter())
            .flat_map(Ring::segments)
    })
}

/// Per-region dissolved perimeter and area.
///
/// Area is additive over member zones. The perimeter keeps exactly the
/// segments appearing once within the region: segments shared by two member
/// zones cancel, segments on the outer hull or against another region's
/// zones remain.
pub fn dissolve(
    geometries: &[ZoneGeometry],
    partition: &ZonePartition,
) -> Result<BTreeMap<usize, (f64, f64)>> {
    let mut out: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut segment_counts: BTreeMap<usize, BTreeMap<SegmentKey, (u32, f64)>> = BTreeMap::new();
    for geometry in geometries {
        geometry.validate()?;
        let Some(region) = partition.get(&geometry.zone) else {
            return Err(Error::ZonesNotCovered {
                context: "dissolve".into(),
                zones: vec![geometry.zone.clone()],
            });
        };
        let entry = out.entry(region).or_insert((0.0, 0.0));
        entry.1 += geometry.area();
        let counts = segment_counts.entry(region).or_default();
        for (p, q) in zone_segments(geometry) {
            let slot = counts
                .entry(SegmentKey::new(p, q))
                .or_insert((0, segment_length(p, q)));
            slot.0 += 1;
        }
    }
    for (region, counts) in segment_counts {
        let perimeter: f64 = counts
            .values()
            .filter(|(n, _)| *n == 1)
            .map(|(_, len)| len)
            .sum();
        out.get_mut(&region).unwrap().0 = perimeter;
    }
    Ok(out)
}

/// Perimeter-area corrected compactness: `P / (3.54 * sqrt(A))`.
/// Lower is more compact; a unit square scores 4/3.54.
pub fn compactness(perimeter: f64, area: f64) -> Result<f64> {
    if perimeter <= 0.0 || area <= 0.0 {
        return Err(Error::NonPositiveGeometry {
            p: perimeter,
            a: area,
        });
    }
    Ok(perimeter / (3.54 * area.sqrt()))
}

/// Rook contiguity from geometry: zones sharing at least one boundary
/// segment are adjacent; a lone shared corner is not adjacency.
pub fn zone_adjacency(geometries: &[ZoneGeometry]) -> Result<AdjacencyMap> {
    let mut owners: BTreeMap<SegmentKey, Vec<&ZoneId>> = BTreeMap::new();
    let mut adjacency = AdjacencyMap::new();
    for geometry in geometries {
        geometry.validate()?;
        adjacency.insert_zone(&geometry.zone);
        for (p, q) in zone_segments(geometry) {
            owners
                .entry(SegmentKey::new(p, q))
                .or_default()
                .push(&geometry.zone);
        }
    }
    for zones in owners.values() {
        for i in 0..zones.len() {
            for j in (i + 1)..zones.len() {
                if zones[i] != zones[j] {
                    adjacency.insert_pair(zones[i], zones[j])?;
                }
            }
        }
    }
    Ok(adjacency)
}

/// A census-block population point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPoint {
    pub x: f64,
    pub y: f64,
    pub population: f64,
}

/// Population-weighted mean of block points.
pub fn weighted_centroid(points: &[BlockPoint]) -> Result<(f64, f64)> {
    let total: f64 = points.iter().map(|p| p.population).sum();
    if total <= 0.0 {
        return Err(Error::ZeroPopulation);
    }
    let x = points.iter().map(|p| p.x * p.population).sum::<f64>() / total;
    let y = points.iter().map(|p| p.y * p.population).sum::<f64>() / total;
    Ok((x, y))
}

fn ring_from_json(coords: &Value, zone: &str) -> Result<Ring> {
    let arr = coords.as_array().ok_or_else(|| Error::BadGeometry {
        zone: zone.to_string(),
        message: "ring is not an array".into(),
    })?;
    let mut pts = Vec::with_capacity(arr.len());
    for pt in arr {
        let pair = pt.as_array().ok_or_else(|| Error::BadGeometry {
            zone: zone.to_string(),
            message: "coordinate is not a pair".into(),
        })?;
        let x = pair.first().and_then(Value::as_f64);
        let y = pair.get(1).and_then(Value::as_f64);
        match (x, y) {
            (Some(x), Some(y)) => pts.push((x, y)),
            _ => {
                return Err(Error::BadGeometry {
                    zone: zone.to_string(),
                    message: "non-numeric coordinate".into(),
                })
            }
        }
    }
    Ok(Ring(pts))
}

fn polygon_from_json(rings: &Value, zone: &str) -> Result<ZonePolygon> {
    let arr = rings.as_array().ok_or_else(|| Error::BadGeometry {
        zone: zone.to_string(),
        message: "polygon is not an array of rings".into(),
    })?;
    if arr.is_empty() {
        return Err(Error::BadGeometry {
            zone: zone.to_string(),
            message: "polygon has no rings".into(),
        });
    }
    let outer = ring_from_json(&arr[0], zone)?;
    let holes = arr[1..]
        .iter()
        .map(|r| ring_from_json(r, zone))
        .collect::<Result<Vec<_>>>()?;
    Ok(ZonePolygon { outer, holes })
}

/// Parse a GeoJSON FeatureCollection of Polygon/MultiPolygon features with
/// a `zone_id` property, projected planar coordinates assumed.
pub fn read_geojson<R: Read>(reader: R) -> Result<Vec<ZoneGeometry>> {
    let value: Value = serde_json::from_reader(reader)?;
    let features = value
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("GeoJSON missing features array".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for feature in features {
        let zone = feature
            .pointer("/properties/zone_id")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidInput("feature missing zone_id property".into()))?
            .to_string();
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| Error::BadGeometry {
                zone: zone.clone(),
                message: "feature has no geometry".into(),
            })?;
        let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geometry.get("coordinates").ok_or_else(|| Error::BadGeometry {
            zone: zone.clone(),
            message: "geometry has no coordinates".into(),
        })?;
        let polygons = match gtype {
            "Polygon" => vec![polygon_from_json(coords, &zone)?],
            "MultiPolygon" => coords
                .as_array()
                .ok_or_else(|| Error::BadGeometry {
                    zone: zone.clone(),
                    message: "MultiPolygon coordinates are not an array".into(),
                })?
                .iter()
                .map(|p| polygon_from_json(p, &zone))
                .collect::<Result<Vec<_>>>()?,
            other => {
                return Err(Error::BadGeometry {
                    zone,
                    message: format!("unsupported geometry type {other:?}"),
                })
            }
        };
        let geometry = ZoneGeometry { zone, polygons };
        geometry.validate()?;
        out.push(geometry);
    }
    Ok(out)
}

pub fn read_geojson_path(path: &Path) -> Result<Vec<ZoneGeometry>> {
    read_geojson(std::fs::File::open(path)?)
}

/// Axis-aligned unit-square helper used by tests and the generator.
pub fn unit_square(zone: &str, x: f64, y: f64) -> ZoneGeometry {
    ZoneGeometry {
        zone: zone.to_string(),
        polygons: vec![ZonePolygon {
            outer: Ring(vec![
                (x, y),
                (x + 1.0, y),
                (x + 1.0, y + 1.0),
                (x, y + 1.0),
                (x, y),
            ]),
            holes: Vec::new(),
        }],
    }
}
