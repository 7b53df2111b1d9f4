//! CSV formats for flow records and the hospital roster.
//!
//! Flow CSV: `patient_zone,hospital_id,count,service_class` with
//! service_class in {G,S}. Roster CSV:
//! `hospital_id,home_zone,is_general,admissions`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::{FlowRecord, FlowTable, Hospital, HospitalRoster, ServiceClass};

/// Streaming reader over a flow CSV. Each item carries its 1-based data
/// record index in parse errors.
pub fn read_flow_csv<R: Read + 'static>(
    reader: R,
) -> impl Iterator<Item = Result<FlowRecord>> {
    let rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    rdr.into_records().enumerate().map(|(i, rec)| {
        let index = i + 1;
        let rec = rec?;
        parse_flow_record(&rec, index)
    })
}

pub fn read_flow_csv_path(
    path: &Path,
) -> Result<impl Iterator<Item = Result<FlowRecord>>> {
    Ok(read_flow_csv(std::fs::File::open(path)?))
}

fn parse_flow_record(rec: &csv::StringRecord, index: usize) -> Result<FlowRecord> {
    let get = |n: usize, name: &str| -> Result<&str> {
        rec.get(n).map(str::trim).ok_or_else(|| Error::MalformedRecord {
            index,
            message: format!("missing {name}"),
        })
    };
    let patient_zone = get(0, "patient_zone")?.to_string();
    let hospital = get(1, "hospital_id")?.to_string();
    if hospital.is_empty() {
        return Err(Error::MalformedRecord {
            index,
            message: "empty hospital_id".into(),
        });
    }
    let count: u64 = get(2, "count")?.parse().map_err(|e| Error::MalformedRecord {
        index,
        message: format!("bad count: {e}"),
    })?;
    if count == 0 {
        return Err(Error::MalformedRecord {
            index,
            message: "count must be at least 1".into(),
        });
    }
    let class_field = get(3, "service_class")?;
    let service_class = ServiceClass::parse(class_field).ok_or_else(|| Error::MalformedRecord {
        index,
        message: format!("service_class must be G or S, got {class_field:?}"),
    })?;
    Ok(FlowRecord {
        patient_zone,
        hospital,
        count,
        service_class,
    })
}

/// Write a flow table back out in the flow CSV format (one row per
/// aggregated flow).
pub fn write_flow_csv<W: Write>(table: &FlowTable, mut w: W) -> Result<()> {
    writeln!(w, "patient_zone,hospital_id,count,service_class")?;
    for r in table.rows() {
        writeln!(
            w,
            "{},{},{},{}",
            r.patient_zone, r.hospital, r.count, r.service_class
        )?;
    }
    Ok(())
}

impl HospitalRoster {
    /// Parse `hospital_id,home_zone,is_general,admissions`. Booleans accept
    /// true/false or 1/0.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut hospitals = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let index = i + 1;
            let get = |n: usize, name: &str| -> Result<&str> {
                rec.get(n).map(str::trim).ok_or_else(|| Error::MalformedRecord {
                    index,
                    message: format!("missing {name}"),
                })
            };
            let id = get(0, "hospital_id")?.to_string();
            let home_zone = get(1, "home_zone")?.to_string();
            if id.is_empty() || home_zone.is_empty() {
                return Err(Error::MalformedRecord {
                    index,
                    message: "empty hospital_id or home_zone".into(),
                });
            }
            let is_general = match get(2, "is_general")? {
                "true" | "TRUE" | "True" | "1" => true,
                "false" | "FALSE" | "False" | "0" => false,
                other => {
                    return Err(Error::MalformedRecord {
                        index,
                        message: format!("is_general must be boolean, got {other:?}"),
                    })
                }
            };
            let admissions: u64 = get(3, "admissions")?.parse().map_err(|e| {
                Error::MalformedRecord {
                    index,
                    message: format!("bad admissions: {e}"),
                }
            })?;
            hospitals.push(Hospital {
                id,
                home_zone,
                is_general,
                admissions,
            });
        }
        HospitalRoster::new(hospitals)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "hospital_id,home_zone,is_general,admissions")?;
        for h in self.iter() {
            writeln!(
                w,
                "{},{},{},{}",
                h.id, h.home_zone, h.is_general, h.admissions
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flow_rows_and_flags_bad_ones() {
        let text = "patient_zone,hospital_id,count,service_class\n\
                    a,h1,3,G\n\
                    b,h2,1,S\n";
        let records: Vec<_> = read_flow_csv(std::io::Cursor::new(text.to_string()))
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].count, 3);
        assert_eq!(records[1].service_class, ServiceClass::Specialized);

        let bad = "patient_zone,hospital_id,count,service_class\na,h1,0,G\n";
        let err = read_flow_csv(std::io::Cursor::new(bad.to_string()))
            .next()
            .unwrap()
            .unwrap_err();
        match err {
            Error::MalformedRecord { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_service_class_names_record() {
        let bad = "patient_zone,hospital_id,count,service_class\na,h1,2,G\nb,h1,2,X\n";
        let results: Vec<_> = read_flow_csv(std::io::Cursor::new(bad.to_string())).collect();
        assert!(results[0].is_ok());
        match results[1].as_ref().unwrap_err() {
            Error::MalformedRecord { index, .. } => assert_eq!(*index, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn roster_round_trip() {
        let text = "hospital_id,home_zone,is_general,admissions\n\
                    h1,a,true,120\n\
                    h2,b,0,40\n";
        let roster = HospitalRoster::read_csv(text.as_bytes()).unwrap();
        assert_eq!(roster.len(), 2);
        assert!(!roster.get("h2").unwrap().is_general);
        let mut buf = Vec::new();
        roster.write_csv(&mut buf).unwrap();
        let again = HospitalRoster::read_csv(&buf[..]).unwrap();
        assert_eq!(again.get("h1").unwrap().admissions, 120);
    }

    #[test]
    fn duplicate_hospital_rejected() {
        let text = "hospital_id,home_zone,is_general,admissions\nh1,a,true,1\nh1,b,true,2\n";
        assert!(matches!(
            HospitalRoster::read_csv(text.as_bytes()),
            Err(Error::DuplicateHospital(_))
        ));
    }
}
