//! Zone identifiers and per-zone attributes (population, centroid).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Zones are identified by opaque strings (ZIP codes in the motivating use).
pub type ZoneId = String;

/// One zone's attribute row.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAttribute {
    pub zone: ZoneId,
    pub population: f64,
    pub centroid: Option<(f64, f64)>,
}

/// Attribute table for the declared zone universe.
///
/// Loading this file is what *declares* the universe: ingestion can drop
/// flows whose patient zone is not listed here, and the baseline uses the
/// centroids for zero-flow fallback assignment.
#[derive(Debug, Clone, Default)]
pub struct ZoneAttributes {
    rows: BTreeMap<ZoneId, ZoneAttribute>,
}

impl ZoneAttributes {
    pub fn new(rows: impl IntoIterator<Item = ZoneAttribute>) -> Self {
        Self {
            rows: rows.into_iter().map(|r| (r.zone.clone(), r)).collect(),
        }
    }

    pub fn get(&self, zone: &str) -> Option<&ZoneAttribute> {
        self.rows.get(zone)
    }

    pub fn population(&self, zone: &str) -> Option<f64> {
        self.rows.get(zone).map(|r| r.population)
    }

    pub fn centroid(&self, zone: &str) -> Option<(f64, f64)> {
        self.rows.get(zone).and_then(|r| r.centroid)
    }

    pub fn centroids(&self) -> BTreeMap<ZoneId, (f64, f64)> {
        self.rows
            .iter()
            .filter_map(|(z, r)| r.centroid.map(|c| (z.clone(), c)))
            .collect()
    }

    pub fn zones(&self) -> BTreeSet<ZoneId> {
        self.rows.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ZoneAttribute> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Parse `zone_id,population[,centroid_x,centroid_y]` CSV. The centroid
    /// columns are optional but must be present together.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let has_centroid = headers.iter().any(|h| h == "centroid_x");
        let mut rows = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let index = i + 1;
            let field = |n: usize, name: &str| -> Result<String> {
                rec.get(n)
                    .map(|s| s.trim().to_string())
                    .ok_or_else(|| Error::MalformedRecord {
                        index,
                        message: format!("missing {name}"),
                    })
            };
            let zone = field(0, "zone_id")?;
            if zone.is_empty() {
                return Err(Error::MalformedRecord {
                    index,
                    message: "empty zone_id".into(),
                });
            }
            let population: f64 = field(1, "population")?.parse().map_err(|e| {
                Error::MalformedRecord {
                    index,
                    message: format!("bad population: {e}"),
                }
            })?;
            if population < 0.0 {
                return Err(Error::MalformedRecord {
                    index,
                    message: "negative population".into(),
                });
            }
            let centroid = if has_centroid {
                let x: f64 = field(2, "centroid_x")?.parse().map_err(|e| {
                    Error::MalformedRecord {
                        index,
                        message: format!("bad centroid_x: {e}"),
                    }
                })?;
                let y: f64 = field(3, "centroid_y")?.parse().map_err(|e| {
                    Error::MalformedRecord {
                        index,
                        message: format!("bad centroid_y: {e}"),
                    }
                })?;
                Some((x, y))
            } else {
                None
            };
            rows.insert(
                zone.clone(),
                ZoneAttribute {
                    zone,
                    population,
                    centroid,
                },
            );
        }
        Ok(Self { rows })
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let any_centroid = self.rows.values().any(|r| r.centroid.is_some());
        if any_centroid {
            writeln!(w, "zone_id,population,centroid_x,centroid_y")?;
        } else {
            writeln!(w, "zone_id,population")?;
        }
        for r in self.rows.values() {
            if any_centroid {
                let (x, y) = r.centroid.unwrap_or((f64::NAN, f64::NAN));
                writeln!(w, "{},{},{},{}", r.zone, r.population, x, y)?;
            } else {
                writeln!(w, "{},{}", r.zone, r.population)?;
            }
        }
        Ok(())
    }
}
