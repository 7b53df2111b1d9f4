//! The nine evaluation indices for any zone-to-region assignment:
//! localization, market share, net patient flow, compactness, four size
//! balance measures, and the Herfindahl concentration index.

pub mod geometry;

pub use geometry::{
    compactness, dissolve, read_geojson, read_geojson_path, weighted_centroid, zone_adjacency,
    BlockPoint, Ring, ZoneGeometry, ZonePolygon,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::flow::{FlowTable, HospitalRoster};
use crate::partition::ZonePartition;
use crate::zones::ZoneAttributes;

/// Directed flow totals of one region. `resident = internal + outgoing`
/// admissions originate in the region; `internal + incoming` occur at the
/// region's hospitals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RegionFlowCounts {
    pub internal: u64,
    pub incoming: u64,
    pub outgoing: u64,
}

impl RegionFlowCounts {
    pub fn resident(&self) -> u64 {
        self.internal + self.outgoing
    }

    pub fn at_hospitals(&self) -> u64 {
        self.internal + self.incoming
    }
}

/// A ratio that may be undefined (0/0) or infinite (x/0, x > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    Infinite,
    Undefined,
}

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(*v),
            _ => None,
        }
    }

    fn to_json(self) -> Value {
        match self {
            Ratio::Defined(v) => json!(v),
            Ratio::Infinite => json!("inf"),
            Ratio::Undefined => Value::Null,
        }
    }

    fn to_csv_field(self) -> String {
        match self {
            Ratio::Defined(v) => format!("{v}"),
            Ratio::Infinite => "inf".to_string(),
            Ratio::Undefined => String::new(),
        }
    }
}

/// Hospital market concentration bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HhiClass {
    /// HHI above 2,500.
    HighlyConcentrated,
    /// HHI in [1,500, 2,500].
    ModeratelyConcentrated,
    /// HHI in [100, 1,500).
    Unconcentrated,
    /// HHI below 100.
    HighlyCompetitive,
}

impl HhiClass {
    pub fn of(hhi: f64) -> Self {
        if hhi > 2500.0 {
            HhiClass::HighlyConcentrated
        } else if hhi >= 1500.0 {
            HhiClass::ModeratelyConcentrated
        } else if hhi >= 100.0 {
            HhiClass::Unconcentrated
        } else {
            HhiClass::HighlyCompetitive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HhiClass::HighlyConcentrated => "highly_concentrated",
            HhiClass::ModeratelyConcentrated => "moderately_concentrated",
            HhiClass::Unconcentrated => "unconcentrated",
            HhiClass::HighlyCompetitive => "highly_competitive",
        }
    }
}

fn check_coverage(table: &FlowTable, partition: &ZonePartition) -> Result<()> {
    let mut missing: BTreeSet<String> = BTreeSet::new();
    for row in table.rows() {
        if !partition.contains(&row.patient_zone) {
            missing.insert(row.patient_zone.clone());
        }
        match &row.hospital_zone {
            Some(zone) => {
                if !partition.contains(zone) {
                    missing.insert(zone.clone());
                }
            }
            None => return Err(Error::UnknownHospital(row.hospital.clone())),
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::ZonesNotCovered {
            context: "partition".into(),
            zones: missing.into_iter().collect(),
        })
    }
}

/// Internal/incoming/outgoing admissions per region; the shared basis for
/// LI, MSI, and NPF.
pub fn region_flow_counts(
    table: &FlowTable,
    partition: &ZonePartition,
) -> Result<Vec<RegionFlowCounts>> {
    check_coverage(table, partition)?;
    let mut counts = vec![RegionFlowCounts::default(); partition.region_count()];
    for row in table.rows() {
        let from = partition.get(&row.patient_zone).unwrap();
        let to = partition.get(row.hospital_zone.as_ref().unwrap()).unwrap();
        if from == to {
            counts[from].internal += row.count;
        } else {
            counts[from].outgoing += row.count;
            counts[to].incoming += row.count;
        }
    }
    Ok(counts)
}

/// Share of each region's resident admissions served inside the region.
/// Regions with no resident admissions are undefined.
pub fn localization_index(
    table: &FlowTable,
    partition: &ZonePartition,
) -> Result<Vec<Option<f64>>> {
    Ok(region_flow_counts(table, partition)?
        .iter()
        .map(|c| {
            let resident = c.resident();
            (resident > 0).then(|| c.internal as f64 / resident as f64)
        })
        .collect())
}

/// Share of each region's hospital admissions coming from outside.
/// Regions with no hospital admissions are undefined.
pub fn market_share_index(
    table: &FlowTable,
    partition: &ZonePartition,
) -> Result<Vec<Option<f64>>> {
    Ok(region_flow_counts(table, partition)?
        .iter()
        .map(|c| {
            let at = c.at_hospitals();
            (at > 0).then(|| c.incoming as f64 / at as f64)
        })
        .collect())
}

/// Incoming over outgoing admissions per region.
pub fn net_patient_flow(table: &FlowTable, partition: &ZonePartition) -> Result<Vec<Ratio>> {
    Ok(region_flow_counts(table, partition)?
        .iter()
        .map(|c| match (c.incoming, c.outgoing) {
            (0, 0) => Ratio::Undefined,
            (_, 0) => Ratio::Infinite,
            (incoming, outgoing) => Ratio::Defined(incoming as f64 / outgoing as f64),
        })
        .collect())
}

/// Herfindahl index per region: the sum of squared admission shares of the
/// hospitals located in the region, times 10,000.
///
/// Computed as `10^4 * sum(a_h^2) / (sum(a_h))^2` so that n equally sized
/// hospitals score exactly 10^4/n. Regions with no hospitals, or whose
/// hospitals received no admissions, are undefined.
pub fn herfindahl(
    table: &FlowTable,
    roster: &HospitalRoster,
    partition: &ZonePartition,
) -> Result<Vec<Option<f64>>> {
    check_coverage(table, partition)?;
    let mut admissions: BTreeMap<&str, u64> = BTreeMap::new();
    for row in table.rows() {
        *admissions.entry(row.hospital.as_str()).or_insert(0) += row.count;
    }
    let mut sum_sq = vec![0u128; partition.region_count()];
    let mut totals = vec![0u128; partition.region_count()];
    let mut hospital_present = vec![false; partition.region_count()];
    for hospital in roster.iter() {
        let Some(region) = partition.get(&hospital.home_zone) else {
            continue;
        };
        hospital_present[region] = true;
        let a = admissions.get(hospital.id.as_str()).copied().unwrap_or(0) as u128;
        sum_sq[region] += a * a;
        totals[region] += a;
    }
    Ok((0..partition.region_count())
        .map(|r| {
            if !hospital_present[r] || totals[r] == 0 {
                return None;
            }
            let total = totals[r] as f64;
            Some(10000.0 * (sum_sq[r] as f64) / (total * total))
        })
        .collect())
}

/// Per-region size measures.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SizeBalanceRow {
    pub zone_count: u64,
    pub hospital_count: u64,
    /// Admissions at the region's hospitals.
    pub inpatient_count: u64,
    /// Admissions originating from the region's zones; emitted alongside
    /// the hospital-based count since either reading of "patients" is
    /// defensible.
    pub resident_count: u64,
    pub population: Option<f64>,
}

/// Zone, hospital, inpatient, and population counts per region.
pub fn size_balance(
    partition: &ZonePartition,
    attrs: Option<&ZoneAttributes>,
    roster: &HospitalRoster,
    table: &FlowTable,
) -> Result<Vec<SizeBalanceRow>> {
    let flow = region_flow_counts(table, partition)?;
    let mut rows = vec![SizeBalanceRow::default(); partition.region_count()];
    if let Some(attrs) = attrs {
        let missing: Vec<String> = partition
            .zones()
            .filter(|z| attrs.get(z).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::ZonesNotCovered {
                context: "zone attributes".into(),
                zones: missing,
            });
        }
    }
    for (zone, region) in partition.iter() {
        rows[region].zone_count += 1;
        if let Some(attrs) = attrs {
            let p = rows[region].population.get_or_insert(0.0);
            *p += attrs.population(zone).unwrap_or(0.0);
        }
    }
    for hospital in roster.iter() {
        if let Some(region) = partition.get(&hospital.home_zone) {
            rows[region].hospital_count += 1;
        }
    }
    for (region, counts) in flow.iter().enumerate() {
        rows[region].inpatient_count = counts.at_hospitals();
        rows[region].resident_count = counts.resident();
    }
    Ok(rows)
}

/// One region's full metric row.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub region: usize,
    pub li: Option<f64>,
    pub msi: Option<f64>,
    pub npf: Ratio,
    pub pac: Option<f64>,
    pub hhi: Option<f64>,
    pub hhi_class: Option<HhiClass>,
    pub zone_count: u64,
    pub hospital_count: u64,
    pub inpatient_count: u64,
    pub resident_count: u64,
    pub population: Option<f64>,
}

/// Mean/sd/min/max over the defined per-region values of one index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub defined: usize,
    pub excluded: usize,
}

impl SummaryStat {
    fn over(values: impl IntoIterator<Item = Option<f64>>) -> Option<SummaryStat> {
        let mut defined = Vec::new();
        let mut excluded = 0;
        for v in values {
            match v {
                Some(v) => defined.push(v),
                None => excluded += 1,
            }
        }
        if defined.is_empty() {
            return None;
        }
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let min = defined.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = defined.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(SummaryStat {
            mean,
            sd: var.sqrt(),
            min,
            max,
            defined: defined.len(),
            excluded,
        })
    }

    fn to_json(self) -> Value {
        json!({
            "mean": self.mean,
            "sd": self.sd,
            "min": self.min,
            "max": self.max,
            "defined": self.defined,
            "excluded": self.excluded,
        })
    }
}

/// Per-region values plus summaries; undefined values are excluded from
/// summaries and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub regions: Vec<RegionRow>,
    pub summary: BTreeMap<String, SummaryStat>,
    /// Indices skipped for lack of input (e.g. "pac" without geometry).
    pub skipped: Vec<String>,
}

impl RegionReport {
    pub fn to_json_value(&self) -> Value {
        let regions: Vec<Value> = self
            .regions
            .iter()
            .map(|r| {
                let mut obj = Map::new();
                obj.insert("region".into(), json!(r.region));
                obj.insert("li".into(), opt_json(r.li));
                obj.insert("msi".into(), opt_json(r.msi));
                obj.insert("npf".into(), r.npf.to_json());
                obj.insert("pac".into(), opt_json(r.pac));
                obj.insert("hhi".into(), opt_json(r.hhi));
                obj.insert(
                    "hhi_class".into(),
                    r.hhi_class
                        .map(|c| json!(c.as_str()))
                        .unwrap_or(Value::Null),
                );
                obj.insert("zone_count".into(), json!(r.zone_count));
                obj.insert("hospital_count".into(), json!(r.hospital_count));
                obj.insert("inpatient_count".into(), json!(r.inpatient_count));
                obj.insert("resident_count".into(), json!(r.resident_count));
                obj.insert("population".into(), opt_json(r.population));
                Value::Object(obj)
            })
            .collect();
        let mut summary = Map::new();
        for (key, stat) in &self.summary {
            summary.insert(key.clone(), stat.to_json());
        }
        json!({
            "regions": regions,
            "summary": Value::Object(summary),
            "skipped": self.skipped,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "region,li,msi,npf,pac,hhi,hhi_class,zone_count,hospital_count,\
             inpatient_count,resident_count,population"
        )?;
        for r in &self.regions {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.region,
                opt_csv(r.li),
                opt_csv(r.msi),
                r.npf.to_csv_field(),
                opt_csv(r.pac),
                opt_csv(r.hhi),
                r.hhi_class.map(|c| c.as_str()).unwrap_or(""),
                r.zone_count,
                r.hospital_count,
                r.inpatient_count,
                r.resident_count,
                opt_csv(r.population),
            )?;
        }
        Ok(())
    }
}

fn opt_json(v: Option<f64>) -> Value {
    v.map(|v| json!(v)).unwrap_or(Value::Null)
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

/// Assemble every index into a [`RegionReport`].
///
/// Geometry and attributes are optional; the indices they feed are skipped
/// (and named in `skipped`) when absent.
pub fn evaluate(
    table: &FlowTable,
    partition: &ZonePartition,
    roster: &HospitalRoster,
    geometries: Option<&[ZoneGeometry]>,
    attrs: Option<&ZoneAttributes>,
) -> Result<RegionReport> {
    let li = localization_index(table, partition)?;
    let msi = market_share_index(table, partition)?;
    let npf = net_patient_flow(table, partition)?;
    let hhi = herfindahl(table, roster, partition)?;
    let size = size_balance(partition, attrs, roster, table)?;
    let mut skipped = Vec::new();

    let pac: Option<Vec<Option<f64>>> = match geometries {
        Some(geometries) => {
            let covered: Vec<ZoneGeometry> = geometries
                .iter()
                .filter(|g| partition.contains(&g.zone))
                .cloned()
                .collect();
            let have: BTreeSet<&str> = covered.iter().map(|g| g.zone.as_str()).collect();
            let missing: Vec<String> = partition
                .zones()
                .filter(|z| !have.contains(z.as_str()))
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(Error::ZonesNotCovered {
                    context: "geometry".into(),
                    zones: missing,
                });
            }
            let dissolved = dissolve(&covered, partition)?;
            Some(
                (0..partition.region_count())
                    .map(|r| {
                        dissolved
                            .get(&r)
                            .and_then(|&(p, a)| compactness(p, a).ok())
                    })
                    .collect(),
            )
        }
        None => {
            skipped.push("pac".to_string());
            None
        }
    };
    if attrs.is_none() {
        skipped.push("population".to_string());
    }

    let regions: Vec<RegionRow> = (0..partition.region_count())
        .map(|r| RegionRow {
            region: r,
            li: li[r],
            msi: msi[r],
            npf: npf[r],
            pac: pac.as_ref().and_then(|p| p[r]),
            hhi: hhi[r],
            hhi_class: hhi[r].map(HhiClass::of),
            zone_count: size[r].zone_count,
            hospital_count: size[r].hospital_count,
            inpatient_count: size[r].inpatient_count,
            resident_count: size[r].resident_count,
            population: size[r].population,
        })
        .collect();

    let mut summary = BTreeMap::new();
    let mut add = |key: &str, values: Vec<Option<f64>>| {
        if let Some(stat) = SummaryStat::over(values) {
            summary.insert(key.to_string(), stat);
        }
    };
    add("li", regions.iter().map(|r| r.li).collect());
    add("msi", regions.iter().map(|r| r.msi).collect());
    add("npf", regions.iter().map(|r| r.npf.value()).collect());
    if pac.is_some() {
        add("pac", regions.iter().map(|r| r.pac).collect());
    }
    add("hhi", regions.iter().map(|r| r.hhi).collect());
    add(
        "zone_count",
        regions.iter().map(|r| Some(r.zone_count as f64)).collect(),
    );
    add(
        "hospital_count",
        regions
            .iter()
            .map(|r| Some(r.hospital_count as f64))
            .collect(),
    );
    add(
        "inpatient_count",
        regions
            .iter()
            .map(|r| Some(r.inpatient_count as f64))
            .collect(),
    );
    add(
        "resident_count",
        regions
            .iter()
            .map(|r| Some(r.resident_count as f64))
            .collect(),
    );
    if attrs.is_some() {
        add("population", regions.iter().map(|r| r.population).collect());
    }

    Ok(RegionReport {
        regions,
        summary,
        skipped,
    })
}
