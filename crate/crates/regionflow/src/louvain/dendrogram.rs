//! The recorded multi-level hierarchy.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::partition::{Partition, ZonePartition};
use crate::zones::ZoneId;

/// One recorded level of the hierarchy.
#[derive(Debug, Clone)]
pub struct DendrogramLevel {
    /// The (possibly aggregated) network this level's sweep ran on.
    pub network: FlowNetwork,
    /// Partition of that network's nodes.
    pub partition: Partition,
    /// Overall modularity of the composed zone-level assignment.
    pub q: f64,
    /// The composed partition over the original zones.
    pub zone_partition: Partition,
}

/// Ordered levels from finest to coarsest. Composing levels 0..=L
/// reproduces `levels[L].zone_partition`, and recorded Q values increase
/// by at least the configured gain threshold.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    zones: Vec<ZoneId>,
    levels: Vec<DendrogramLevel>,
}

impl Dendrogram {
    pub(crate) fn new(zones: Vec<ZoneId>, levels: Vec<DendrogramLevel>) -> Self {
        Self { zones, levels }
    }

    /// Zone ids of the original network, in node-index order.
    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn levels(&self) -> &[DendrogramLevel] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> Result<&DendrogramLevel> {
        self.levels.get(index).ok_or(Error::LevelOutOfRange {
            level: index,
            count: self.levels.len(),
        })
    }

    /// Composed zone-level partition at a level.
    pub fn zone_partition(&self, index: usize) -> Result<&Partition> {
        Ok(&self.level(index)?.zone_partition)
    }

    /// Zone-keyed assignment at a level.
    pub fn zone_assignment(&self, index: usize) -> Result<ZonePartition> {
        self.zone_partition(index)?.to_zone_partition(&self.zones)
    }

    /// The coarsest (final) recorded assignment, if any level was recorded.
    pub fn final_assignment(&self) -> Option<ZonePartition> {
        if self.levels.is_empty() {
            return None;
        }
        self.zone_assignment(self.levels.len() - 1).ok()
    }

    /// JSON form: one object per level with community count, Q, and the
    /// zone assignment map (sorted by zone id).
    pub fn to_json_value(&self) -> Value {
        let levels: Vec<Value> = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, level)| {
                let mut assignment = Map::new();
                for (zone, label) in self
                    .zones
                    .iter()
                    .zip(level.zone_partition.labels().iter())
                {
                    assignment.insert(zone.clone(), json!(label));
                }
                json!({
                    "level": i,
                    "community_count": level.zone_partition.community_count(),
                    "Q": level.q,
                    "zone_assignment": Value::Object(assignment),
                })
            })
            .collect();
        json!({ "levels": levels })
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        let value = self.to_json_value();
        serde_json::to_writer_pretty(&mut w, &value)?;
        writeln!(w)?;
        Ok(())
    }
}

impl Dendrogram {
    /// Rebuild a full dendrogram from per-level zone assignments (as read
    /// back from the JSON artifact) against the original network.
    ///
    /// Each level must cover exactly the network's zones and coarsen the
    /// previous level; the intermediate aggregated networks are re-derived.
    pub fn from_zone_assignments(
        net: &FlowNetwork,
        levels: Vec<(ZonePartition, f64)>,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(levels.len());
        let mut current = net.clone();
        let mut previous: Option<Partition> = None;
        for (index, (assignment, q)) in levels.into_iter().enumerate() {
            let labels = net
                .zones()
                .iter()
                .map(|zone| {
                    assignment.get(zone).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "dendrogram level {index} does not cover zone {zone}"
                        ))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            if assignment.len() != net.node_count() {
                return Err(Error::InvalidInput(format!(
                    "dendrogram level {index} covers {} zones, network has {}",
                    assignment.len(),
                    net.node_count()
                )));
            }
            let zone_partition = Partition::from_labels(labels)?;
            let partition = match &previous {
                None => zone_partition.clone(),
                Some(prev) => {
                    let mut node_labels = vec![usize::MAX; prev.community_count()];
                    for zone in 0..net.node_count() {
                        let slot = &mut node_labels[prev.label(zone)];
                        let label = zone_partition.label(zone);
                        if *slot != usize::MAX && *slot != label {
                            return Err(Error::InvalidInput(format!(
                                "dendrogram level {index} splits a community of level {}",
                                index - 1
                            )));
                        }
                        *slot = label;
                    }
                    Partition::from_labels(node_labels)?
                }
            };
            let next = crate::louvain::aggregate(&current, &partition)?;
            out.push(DendrogramLevel {
                network: current,
                partition,
                q,
                zone_partition: zone_partition.clone(),
            });
            previous = Some(zone_partition);
            current = next;
        }
        Ok(Dendrogram::new(net.zones().to_vec(), out))
    }
}

/// A level as read back from the JSON artifact: enough to cut at recorded
/// levels without the original network.
#[derive(Debug, Clone)]
pub struct LevelSummary {
    pub level: usize,
    pub community_count: usize,
    pub q: f64,
    pub assignment: ZonePartition,
}

/// Parse the JSON produced by [`Dendrogram::write_json`] (extra top-level
/// fields such as provenance are ignored).
pub fn read_dendrogram_json(value: &Value) -> Result<Vec<LevelSummary>> {
    let levels = value
        .get("levels")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("dendrogram JSON missing levels array".into()))?;
    let mut out = Vec::with_capacity(levels.len());
    for (i, level) in levels.iter().enumerate() {
        let q = level
            .get("Q")
            .or_else(|| level.get("q"))
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::InvalidInput(format!("level {i}: missing Q")))?;
        let assignment = level
            .get("zone_assignment")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidInput(format!("level {i}: missing zone_assignment")))?;
        let mut map = std::collections::BTreeMap::new();
        for (zone, label) in assignment {
            let label = label
                .as_u64()
                .ok_or_else(|| Error::InvalidInput(format!("level {i}: bad label for {zone}")))?;
            map.insert(zone.clone(), label as usize);
        }
        let assignment = ZonePartition::from_map(map);
        let community_count = level
            .get("community_count")
            .and_then(Value::as_u64)
            .map(|c| c as usize)
            .unwrap_or_else(|| assignment.region_count());
        out.push(LevelSummary {
            level: i,
            community_count,
            q,
            assignment,
        });
    }
    Ok(out)
}
