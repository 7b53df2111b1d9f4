//! Partitions in two spaces: dense node-index labelings used by the
//! optimizer, and zone-keyed assignments used for files and metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::zones::ZoneId;

/// A dense community labeling of a network's nodes.
///
/// `labels[i]` is the community of node index `i`; labels always form
/// `0..community_count` with every label used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    community_count: usize,
}

impl Partition {
    /// Validate that `labels` is dense (0..C-1, every label used).
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Ok(Self {
                labels,
                community_count: 0,
            });
        }
        let max = *labels.iter().max().unwrap();
        let mut seen = vec![false; max + 1];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidLabels(format!(
                "label {missing} unused but max label is {max}"
            )));
        }
        Ok(Self {
            labels,
            community_count: max + 1,
        })
    }

    /// Relabel arbitrary labels densely by first appearance in node order.
    pub fn densify(raw: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut next = 0;
        let labels = raw
            .iter()
            .map(|&l| {
                *remap.entry(l).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect();
        Self {
            labels,
            community_count: next,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            community_count: n,
        }
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn community_count(&self) -> usize {
        self.community_count
    }

    /// Node indices grouped by community label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.community_count];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Compose with a partition of this partition's communities:
    /// `result[i] = coarser[self[i]]`.
    pub fn compose(&self, coarser: &Partition) -> Result<Partition> {
        if coarser.len() != self.community_count {
            return Err(Error::PartitionSizeMismatch {
                expected: self.community_count,
                got: coarser.len(),
            });
        }
        let labels: Vec<usize> = self.labels.iter().map(|&l| coarser.label(l)).collect();
        Ok(Partition {
            labels,
            community_count: coarser.community_count(),
        })
    }

    /// Pair with zone ids to produce the exportable zone-keyed form.
    pub fn to_zone_partition(&self, zones: &[ZoneId]) -> Result<ZonePartition> {
        if zones.len() != self.labels.len() {
            return Err(Error::PartitionSizeMismatch {
                expected: zones.len(),
                got: self.labels.len(),
            });
        }
        Ok(ZonePartition {
            map: zones
                .iter()
                .cloned()
                .zip(self.labels.iter().copied())
                .collect(),
            region_count: self.community_count,
        })
    }
}

/// A zone-to-region assignment keyed by zone id, with dense region labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZonePartition {
    map: BTreeMap<ZoneId, usize>,
    region_count: usize,
}

impl ZonePartition {
    /// Build from an arbitrary zone->label map, densifying labels in
    /// ascending zone order.
    pub fn from_map(raw: BTreeMap<ZoneId, usize>) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut next = 0;
        let map = raw
            .into_iter()
            .map(|(z, l)| {
                let dense = *remap.entry(l).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                });
                (z, dense)
            })
            .collect();
        Self {
            map,
            region_count: next,
        }
    }

    pub fn get(&self, zone: &str) -> Option<usize> {
        self.map.get(zone).copied()
    }

    pub fn contains(&self, zone: &str) -> bool {
        self.map.contains_key(zone)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ZoneId, usize)> {
        self.map.iter().map(|(z, &l)| (z, l))
    }

    pub fn zones(&self) -> impl Iterator<Item = &ZoneId> {
        self.map.keys()
    }

    /// Zones grouped by region label.
    pub fn regions(&self) -> Vec<BTreeSet<ZoneId>> {
        let mut groups = vec![BTreeSet::new(); self.region_count];
        for (z, &l) in &self.map {
            groups[l].insert(z.clone());
        }
        groups
    }

    pub fn as_map(&self) -> &BTreeMap<ZoneId, usize> {
        &self.map
    }

    /// Write `zone_id,region_id` sorted by zone id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "zone_id,region_id")?;
        for (z, l) in &self.map {
            writeln!(w, "{z},{l}")?;
        }
        Ok(())
    }

    /// Read the partition CSV. Lines starting with `#` are provenance
    /// comments and are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut raw = BTreeMap::new();
        let mut saw_header = false;
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != "zone_id,region_id" {
                    return Err(Error::InvalidInput(format!(
                        "expected header zone_id,region_id, got {line:?}"
                    )));
                }
                saw_header = true;
                continue;
            }
            let (zone, region) = line.split_once(',').ok_or_else(|| Error::MalformedRecord {
                index: lineno + 1,
                message: "expected zone_id,region_id".into(),
            })?;
            let region: usize = region.trim().parse().map_err(|e| Error::MalformedRecord {
                index: lineno + 1,
                message: format!("bad region id: {e}"),
            })?;
            raw.insert(zone.trim().to_string(), region);
        }
        if !saw_header {
            return Err(Error::InvalidInput("empty partition file".into()));
        }
        Ok(Self::from_map(raw))
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densify_orders_by_first_appearance() {
        let p = Partition::densify(&[7, 3, 7, 9]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.community_count(), 3);
    }

    #[test]
    fn from_labels_rejects_gaps() {
        assert!(Partition::from_labels(vec![0, 2]).is_err());
        assert!(Partition::from_labels(vec![0, 1, 1]).is_ok());
    }

    #[test]
    fn compose_maps_through_levels() {
        let fine = Partition::from_labels(vec![0, 0, 1, 2]).unwrap();
        let coarse = Partition::from_labels(vec![0, 0, 1]).unwrap();
        let composed = fine.compose(&coarse).unwrap();
        assert_eq!(composed.labels(), &[0, 0, 0, 1]);
    }

    #[test]
    fn zone_partition_csv_round_trip() {
        let zp = ZonePartition::from_map(
            [("a".to_string(), 5), ("b".to_string(), 5), ("c".to_string(), 9)]
                .into_iter()
                .collect(),
        );
        assert_eq!(zp.region_count(), 2);
        let mut buf = Vec::new();
        zp.write_csv(&mut buf).unwrap();
        let back = ZonePartition::read_csv(&buf[..]).unwrap();
        assert_eq!(back, zp);
    }

    #[test]
    fn read_csv_skips_comment_lines() {
        let text = "# seed=1\nzone_id,region_id\na,0\nb,1\n";
        let zp = ZonePartition::read_csv(text.as_bytes()).unwrap();
        assert_eq!(zp.get("b"), Some(1));
    }
}
