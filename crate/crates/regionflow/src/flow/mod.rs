//! Flow ingestion: parse, filter, and aggregate raw origin-destination
//! records into a [`FlowTable`], then symmetrize into a weighted
//! [`FlowNetwork`].

mod csv_io;
mod network;

pub use csv_io::{read_flow_csv, read_flow_csv_path, write_flow_csv};
pub use network::{build_network, FlowNetwork};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zones::ZoneId;

/// Hospitals are identified by opaque strings.
pub type HospitalId = String;

/// Care class of a flow record. Specialized flows (cardiovascular surgery
/// and neurosurgery, flagged upstream) drive the larger referral regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ServiceClass {
    General,
    Specialized,
}

impl ServiceClass {
    pub fn code(self) -> &'static str {
        match self {
            ServiceClass::General => "G",
            ServiceClass::Specialized => "S",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "G" | "g" => Some(ServiceClass::General),
            "S" | "s" => Some(ServiceClass::Specialized),
            _ => None,
        }
    }
}

impl fmt::Display for ServiceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One raw admission record (or a pre-aggregated batch of identical ones).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub patient_zone: ZoneId,
    pub hospital: HospitalId,
    pub count: u64,
    pub service_class: ServiceClass,
}

/// One hospital from the survey roster.
#[derive(Debug, Clone, PartialEq)]
pub struct Hospital {
    pub id: HospitalId,
    pub home_zone: ZoneId,
    pub is_general: bool,
    pub admissions: u64,
}

/// Roster of hospitals keyed by id.
#[derive(Debug, Clone, Default)]
pub struct HospitalRoster {
    hospitals: BTreeMap<HospitalId, Hospital>,
}

impl HospitalRoster {
    pub fn new(hospitals: impl IntoIterator<Item = Hospital>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for h in hospitals {
            if map.insert(h.id.clone(), h.clone()).is_some() {
                return Err(Error::DuplicateHospital(h.id));
            }
        }
        Ok(Self { hospitals: map })
    }

    pub fn get(&self, id: &str) -> Option<&Hospital> {
        self.hospitals.get(id)
    }

    pub fn home_zone(&self, id: &str) -> Option<&ZoneId> {
        self.hospitals.get(id).map(|h| &h.home_zone)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Hospital> {
        self.hospitals.values()
    }

    pub fn len(&self) -> usize {
        self.hospitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hospitals.is_empty()
    }

    /// Every roster home zone must lie inside a declared universe.
    pub fn validate_universe(&self, universe: &BTreeSet<ZoneId>) -> Result<()> {
        for h in self.hospitals.values() {
            if !universe.contains(&h.home_zone) {
                return Err(Error::HospitalOutsideUniverse {
                    hospital: h.id.clone(),
                    zone: h.home_zone.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Which records to exclude during ingestion. All flags default to on,
/// mirroring the preprocessing exclusions of the all-payer use case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterPolicy {
    /// Drop records whose patient zone is empty.
    pub drop_missing_zone: bool,
    /// Drop records whose hospital is absent from the roster.
    pub require_roster_match: bool,
    /// Drop records at hospitals the roster marks as non-general.
    pub general_hospitals_only: bool,
    /// Drop records whose patient zone is outside the declared universe.
    /// Inert when no universe is declared.
    pub in_universe_only: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            drop_missing_zone: true,
            require_roster_match: true,
            general_hospitals_only: true,
            in_universe_only: true,
        }
    }
}

/// Exclusion accounting. Each input record lands in exactly one bucket:
/// retained or one of the exclusion reasons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub input_records: u64,
    pub retained: u64,
    pub missing_zone: u64,
    pub unmatched_hospital: u64,
    pub non_general_hospital: u64,
    pub out_of_universe: u64,
}

impl IngestStats {
    pub fn excluded(&self) -> u64 {
        self.missing_zone + self.unmatched_hospital + self.non_general_hospital
            + self.out_of_universe
    }

    /// Flat key->count JSON object.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "input_records": self.input_records,
            "retained": self.retained,
            "missing_zone": self.missing_zone,
            "unmatched_hospital": self.unmatched_hospital,
            "non_general_hospital": self.non_general_hospital,
            "out_of_universe": self.out_of_universe,
        })
    }
}

/// One aggregated flow table row. `hospital_zone` is resolved from the
/// roster at ingest; it is `None` only when roster matching was disabled
/// and the hospital was unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRow {
    pub patient_zone: ZoneId,
    pub hospital_zone: Option<ZoneId>,
    pub hospital: HospitalId,
    pub service_class: ServiceClass,
    pub count: u64,
}

/// Aggregated directed flows: one row per (patient zone, hospital, service
/// class), sorted by that key. Immutable after construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTable {
    rows: Vec<FlowRow>,
    stats: IngestStats,
}

impl FlowTable {
    pub fn rows(&self) -> &[FlowRow] {
        &self.rows
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Total admissions across all rows.
    pub fn total_count(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// All zones appearing on either side of a flow.
    pub fn zones(&self) -> BTreeSet<ZoneId> {
        let mut out = BTreeSet::new();
        for r in &self.rows {
            out.insert(r.patient_zone.clone());
            if let Some(z) = &r.hospital_zone {
                out.insert(z.clone());
            }
        }
        out
    }

    /// Distinct hospitals appearing in the table.
    pub fn hospitals(&self) -> BTreeSet<HospitalId> {
        self.rows.iter().map(|r| r.hospital.clone()).collect()
    }
}

/// Aggregate a record stream into a [`FlowTable`] under a filter policy.
///
/// `universe`, when given, declares the known zone set; patient zones
/// outside it are excluded (and counted) if `in_universe_only` is set, and
/// retained hospital home zones outside it are an error because every
/// downstream structure assumes roster zones are real.
pub fn ingest_flows<I>(
    records: I,
    roster: &HospitalRoster,
    policy: &FilterPolicy,
    universe: Option<&BTreeSet<ZoneId>>,
) -> Result<FlowTable>
where
    I: IntoIterator<Item = Result<FlowRecord>>,
{
    if roster.is_empty() && (policy.require_roster_match || policy.general_hospitals_only) {
        return Err(Error::MissingRoster);
    }
    let mut stats = IngestStats::default();
    let mut agg: BTreeMap<(ZoneId, HospitalId, ServiceClass), u64> = BTreeMap::new();
    for record in records {
        let record = record?;
        stats.input_records += 1;
        if record.patient_zone.is_empty() {
            if policy.drop_missing_zone {
                stats.missing_zone += 1;
                continue;
            }
        } else if policy.in_universe_only {
            if let Some(universe) = universe {
                if !universe.contains(&record.patient_zone) {
                    stats.out_of_universe += 1;
                    continue;
                }
            }
        }
        match roster.get(&record.hospital) {
            Some(h) => {
                if policy.general_hospitals_only && !h.is_general {
                    stats.non_general_hospital += 1;
                    continue;
                }
            }
            None => {
                // Without a roster entry the hospital's class is unknowable,
                // so the roster bucket also absorbs the general-only check.
                if policy.require_roster_match || policy.general_hospitals_only {
                    stats.unmatched_hospital += 1;
                    continue;
                }
            }
        }
        stats.retained += 1;
        *agg.entry((record.patient_zone, record.hospital, record.service_class))
            .or_insert(0) += record.count;
    }

    let mut rows = Vec::with_capacity(agg.len());
    for ((patient_zone, hospital, service_class), count) in agg {
        let hospital_zone = roster.home_zone(&hospital).cloned();
        if let (Some(z), Some(universe)) = (&hospital_zone, universe) {
            if !universe.contains(z) {
                return Err(Error::HospitalOutsideUniverse {
                    hospital,
                    zone: z.clone(),
                });
            }
        }
        rows.push(FlowRow {
            patient_zone,
            hospital_zone,
            hospital,
            service_class,
            count,
        });
    }
    log::debug!(
        "ingest: {} records in, {} retained, {} rows",
        stats.input_records,
        stats.retained,
        rows.len()
    );
    Ok(FlowTable { rows, stats })
}

/// Keep only specialized-care rows; counts are untouched. Ingest stats are
/// carried through since they describe the original stream.
pub fn filter_specialized(table: &FlowTable) -> FlowTable {
    FlowTable {
        rows: table
            .rows
            .iter()
            .filter(|r| r.service_class == ServiceClass::Specialized)
            .cloned()
            .collect(),
        stats: table.stats,
    }
}

/// Assemble a table directly from known-good rows (tests, generators).
pub fn table_from_rows(rows: Vec<FlowRow>, stats: IngestStats) -> FlowTable {
    let mut rows = rows;
    rows.sort_by(|a, b| {
        (&a.patient_zone, &a.hospital, a.service_class).cmp(&(
            &b.patient_zone,
            &b.hospital,
            b.service_class,
        ))
    });
    FlowTable { rows, stats }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(zone: &str, hosp: &str, count: u64, class: ServiceClass) -> Result<FlowRecord> {
        Ok(FlowRecord {
            patient_zone: zone.into(),
            hospital: hosp.into(),
            count,
            service_class: class,
        })
    }

    fn roster() -> HospitalRoster {
        HospitalRoster::new([
            Hospital {
                id: "h1".into(),
                home_zone: "a".into(),
                is_general: true,
                admissions: 100,
            },
            Hospital {
                id: "h2".into(),
                home_zone: "b".into(),
                is_general: true,
                admissions: 60,
            },
            Hospital {
                id: "hs".into(),
                home_zone: "b".into(),
                is_general: false,
                admissions: 10,
            },
        ])
        .unwrap()
    }

    #[test]
    fn empty_patient_zone_counted_under_defaults() {
        let records = vec![
            rec("a", "h1", 1, ServiceClass::General),
            rec("", "h1", 1, ServiceClass::General),
            rec("b", "h1", 1, ServiceClass::General),
            rec("b", "h2", 1, ServiceClass::General),
            rec("a", "h2", 1, ServiceClass::General),
        ];
        let table =
            ingest_flows(records, &roster(), &FilterPolicy::default(), None).unwrap();
        assert_eq!(table.len(), 4);
        assert_eq!(table.stats().missing_zone, 1);
        assert_eq!(table.stats().retained, 4);
        assert_eq!(table.stats().input_records, 5);
    }

    #[test]
    fn empty_stream_gives_empty_table() {
        let table = ingest_flows(
            std::iter::empty(),
            &roster(),
            &FilterPolicy::default(),
            None,
        )
        .unwrap();
        assert!(table.is_empty());
        assert_eq!(*table.stats(), IngestStats::default());
    }

    #[test]
    fn aggregates_by_zone_hospital_class() {
        let records = vec![
            rec("a", "h1", 2, ServiceClass::General),
            rec("a", "h1", 3, ServiceClass::General),
            rec("a", "h1", 1, ServiceClass::Specialized),
        ];
        let table =
            ingest_flows(records, &roster(), &FilterPolicy::default(), None).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.total_count(), 6);
        let general = table
            .rows()
            .iter()
            .find(|r| r.service_class == ServiceClass::General)
            .unwrap();
        assert_eq!(general.count, 5);
        assert_eq!(general.hospital_zone.as_deref(), Some("a"));
    }

    #[test]
    fn exclusion_buckets_partition_input() {
        let universe: BTreeSet<ZoneId> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let records = vec![
            rec("a", "h1", 1, ServiceClass::General),
            rec("", "h1", 1, ServiceClass::General),    // missing zone
            rec("zz", "h1", 1, ServiceClass::General),  // out of universe
            rec("a", "nope", 1, ServiceClass::General), // unmatched hospital
            rec("a", "hs", 1, ServiceClass::General),   // non-general
        ];
        let table = ingest_flows(
            records,
            &roster(),
            &FilterPolicy::default(),
            Some(&universe),
        )
        .unwrap();
        let s = table.stats();
        assert_eq!(s.retained + s.excluded(), s.input_records);
        assert_eq!(s.missing_zone, 1);
        assert_eq!(s.out_of_universe, 1);
        assert_eq!(s.unmatched_hospital, 1);
        assert_eq!(s.non_general_hospital, 1);
    }

    #[test]
    fn roster_flags_with_empty_roster_is_config_error() {
        let empty = HospitalRoster::default();
        let err = ingest_flows(
            vec![rec("a", "h1", 1, ServiceClass::General)],
            &empty,
            &FilterPolicy::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingRoster));
    }

    #[test]
    fn filter_specialized_keeps_only_specialized() {
        let records = vec![
            rec("a", "h1", 4, ServiceClass::Specialized),
            rec("a", "h2", 2, ServiceClass::Specialized),
            rec("b", "h1", 7, ServiceClass::Specialized),
            rec("b", "h2", 5, ServiceClass::General),
            rec("a", "h1", 9, ServiceClass::General),
        ];
        let table =
            ingest_flows(records, &roster(), &FilterPolicy::default(), None).unwrap();
        let spec = filter_specialized(&table);
        assert_eq!(spec.len(), 3);
        assert!(spec
            .rows()
            .iter()
            .all(|r| r.service_class == ServiceClass::Specialized));
        assert_eq!(spec.total_count(), 13);
        let none = filter_specialized(&filter_specialized(&spec));
        assert_eq!(none.len(), 3);
    }

    #[test]
    fn specialized_totals_match_linear_recount() {
        // Independent scan-and-sum over the raw records.
        let raw = vec![
            ("a", "h1", 4, ServiceClass::Specialized),
            ("a", "h2", 2, ServiceClass::General),
            ("b", "h1", 7, ServiceClass::Specialized),
            ("b", "h1", 3, ServiceClass::Specialized),
            ("b", "h2", 5, ServiceClass::General),
        ];
        let mut expected: BTreeMap<&str, u64> = BTreeMap::new();
        for (_, h, c, class) in &raw {
            if *class == ServiceClass::Specialized {
                *expected.entry(h).or_insert(0) += c;
            }
        }
        let records: Vec<_> = raw
            .iter()
            .map(|(z, h, c, class)| rec(z, h, *c, *class))
            .collect();
        let table =
            ingest_flows(records, &roster(), &FilterPolicy::default(), None).unwrap();
        let spec = filter_specialized(&table);
        let mut got: BTreeMap<&str, u64> = BTreeMap::new();
        for r in spec.rows() {
            *got.entry(r.hospital.as_str()).or_insert(0) += r.count;
        }
        assert_eq!(
            got,
            expected
                .iter()
                .map(|(k, v)| (*k, *v))
                .collect::<BTreeMap<_, _>>()
        );
    }
}
