//! The undirected weighted zone network.
//!
//! Conventions: a self-loop of weight `w` contributes `2w` to its node's
//! degree (matrix diagonal `A_ii = 2w`) and `w` to the total weight `m`,
//! so that `k_i = sum_j A_ij`, `m = 1/2 sum_ij A_ij`, and `sum_i k_i = 2m`
//! all hold exactly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::{FlowTable, HospitalRoster};
use crate::zones::ZoneId;

/// Immutable undirected weighted graph over zones, with self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    zones: Vec<ZoneId>,
    index: BTreeMap<ZoneId, usize>,
    /// Distinct-pair neighbors per node, sorted by neighbor index; each
    /// undirected edge appears in both endpoint lists.
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    total_weight: f64,
}

impl FlowNetwork {
    /// Build from (zone_a, zone_b, weight) triples; duplicate pairs are
    /// summed, `a == b` makes a self-loop. Zone ids are sorted so node
    /// index order is id order.
    pub fn from_edges<'a, I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let mut pair: BTreeMap<(ZoneId, ZoneId), f64> = BTreeMap::new();
        let mut loops: BTreeMap<ZoneId, f64> = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                *loops.entry(a.to_string()).or_insert(0.0) += w;
            } else {
                let key = if a < b {
                    (a.to_string(), b.to_string())
                } else {
                    (b.to_string(), a.to_string())
                };
                *pair.entry(key).or_insert(0.0) += w;
            }
        }
        Self::from_maps(pair, loops)
    }

    fn from_maps(pair: BTreeMap<(ZoneId, ZoneId), f64>, loops: BTreeMap<ZoneId, f64>) -> Self {
        let mut index: BTreeMap<ZoneId, usize> = BTreeMap::new();
        for (a, b) in pair.keys() {
            index.entry(a.clone()).or_insert(0);
            index.entry(b.clone()).or_insert(0);
        }
        for z in loops.keys() {
            index.entry(z.clone()).or_insert(0);
        }
        let zones: Vec<ZoneId> = index.keys().cloned().collect();
        for (i, z) in zones.iter().enumerate() {
            *index.get_mut(z).unwrap() = i;
        }
        let n = zones.len();
        let mut adj = vec![Vec::new(); n];
        let mut self_loop = vec![0.0; n];
        let mut total_weight = 0.0;
        for ((a, b), w) in &pair {
            let (i, j) = (index[a], index[b]);
            adj[i].push((j, *w));
            adj[j].push((i, *w));
            total_weight += w;
        }
        for (z, w) in &loops {
            self_loop[index[z]] += w;
            total_weight += w;
        }
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        let degree = (0..n)
            .map(|i| adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_loop[i])
            .collect();
        Self {
            zones,
            index,
            adj,
            self_loop,
            degree,
            total_weight,
        }
    }

    /// Build from pre-indexed parts. `zones` must already be in node-index
    /// order and `pairs` keyed by `(i, j)` with `i < j`.
    pub(crate) fn from_indexed(
        zones: Vec<ZoneId>,
        pairs: BTreeMap<(usize, usize), f64>,
        self_loop: Vec<f64>,
    ) -> Self {
        let n = zones.len();
        let index = zones
            .iter()
            .enumerate()
            .map(|(i, z)| (z.clone(), i))
            .collect();
        let mut adj = vec![Vec::new(); n];
        let mut total_weight = 0.0;
        for (&(i, j), &w) in &pairs {
            adj[i].push((j, w));
            adj[j].push((i, w));
            total_weight += w;
        }
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        total_weight += self_loop.iter().sum::<f64>();
        let degree = (0..n)
            .map(|i| adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_loop[i])
            .collect();
        Self {
            zones,
            index,
            adj,
            self_loop,
            degree,
            total_weight,
        }
    }

    pub fn node_count(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn zone(&self, node: usize) -> &ZoneId {
        &self.zones[node]
    }

    pub fn zone_index(&self, zone: &str) -> Option<usize> {
        self.index.get(zone).copied()
    }

    /// Distinct-pair neighbors of `node` (self-loops excluded), sorted by
    /// neighbor index.
    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adj[node]
    }

    /// Weighted degree `k_i`, with each self-loop counted twice.
    pub fn degree(&self, node: usize) -> f64 {
        self.degree[node]
    }

    pub fn self_loop(&self, node: usize) -> f64 {
        self.self_loop[node]
    }

    /// Total edge weight `m` (distinct pairs once, self-loops once).
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Entry of the full adjacency matrix, `A_ii = 2 * self_loop(i)`.
    pub fn matrix_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            2.0 * self.self_loop[i]
        } else {
            self.adj[i]
                .binary_search_by_key(&j, |&(n, _)| n)
                .map(|pos| self.adj[i][pos].1)
                .unwrap_or(0.0)
        }
    }

    /// Distinct-pair edges, each once, as (i, j, weight) with i < j.
    pub fn pair_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .filter(move |&&(j, _)| i < j)
                .map(move |&(j, w)| (i, j, w))
        })
    }
}

/// Map directed flows onto hospital home zones and symmetrize.
///
/// The undirected edge weight between two zones is the sum of flows in both
/// directions; a flow whose patient zone equals the hospital's home zone
/// becomes a self-loop.
pub fn build_network(table: &FlowTable, roster: &HospitalRoster) -> Result<FlowNetwork> {
    let mut pair: BTreeMap<(ZoneId, ZoneId), f64> = BTreeMap::new();
    let mut loops: BTreeMap<ZoneId, f64> = BTreeMap::new();
    for row in table.rows() {
        let hospital_zone = match &row.hospital_zone {
            Some(z) => z.clone(),
            None => roster
                .home_zone(&row.hospital)
                .cloned()
                .ok_or_else(|| Error::UnknownHospital(row.hospital.clone()))?,
        };
        let w = row.count as f64;
        if row.patient_zone == hospital_zone {
            *loops.entry(hospital_zone).or_insert(0.0) += w;
        } else {
            let key = if row.patient_zone < hospital_zone {
                (row.patient_zone.clone(), hospital_zone)
            } else {
                (hospital_zone, row.patient_zone.clone())
            };
            *pair.entry(key).or_insert(0.0) += w;
        }
    }
    Ok(FlowNetwork::from_maps(pair, loops))
}
