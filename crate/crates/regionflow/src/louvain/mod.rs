//! Deterministic two-phase modularity optimization with full hierarchy
//! recording.
//!
//! Phase one sweeps nodes in a configured order, moving each to the
//! neighboring community with the largest strictly positive modularity
//! gain, until a full sweep moves nothing. Phase two contracts communities
//! into super-nodes and the process repeats; every level that improves
//! overall modularity by at least `min_gain` is recorded.

mod dendrogram;
mod state;

pub use dendrogram::{read_dendrogram_json, Dendrogram, DendrogramLevel, LevelSummary};
pub use state::CommunityState;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::partition::Partition;
use crate::zones::ZoneId;

/// Node visit order for phase-one sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrder {
    /// Ascending node index, i.e. ascending zone id. The default; makes
    /// runs reproducible with no seed at all.
    SortedId,
    /// A seeded shuffle of the node indices, for robustness experiments.
    SeededShuffle(u64),
}

impl NodeOrder {
    fn visit_order(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        if let NodeOrder::SeededShuffle(seed) = self {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            order.shuffle(&mut rng);
        }
        order
    }

    /// Derive a per-level variant so shuffled levels do not repeat the
    /// same permutation pattern.
    fn for_level(&self, level: usize) -> NodeOrder {
        match self {
            NodeOrder::SortedId => NodeOrder::SortedId,
            NodeOrder::SeededShuffle(seed) => NodeOrder::SeededShuffle(
                seed.wrapping_add((level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            ),
        }
    }
}

/// Optimizer options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainOptions {
    pub order: NodeOrder,
    /// Minimum overall modularity improvement for a level to be recorded;
    /// guards against floating-point oscillation.
    pub min_gain: f64,
    pub max_levels: Option<usize>,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        Self {
            order: NodeOrder::SortedId,
            min_gain: 1e-9,
            max_levels: None,
        }
    }
}

fn require_nonempty(net: &FlowNetwork) -> Result<()> {
    if net.is_empty() || net.total_weight() <= 0.0 {
        return Err(Error::EmptyNetwork);
    }
    Ok(())
}

/// Modularity of a partition, via per-community sums.
///
/// Equals the direct double sum `(1/2m) sum_ij (A_ij - k_i k_j / 2m)
/// delta(c_i, c_j)` and lies in [-0.5, 1].
pub fn modularity(net: &FlowNetwork, p: &Partition) -> Result<f64> {
    require_nonempty(net)?;
    let state = CommunityState::from_partition(net, p)?;
    Ok(state.modularity())
}

/// One local-moving pass over the network, starting from singletons.
///
/// Sweeps repeat until a full sweep moves no node. Ties between equal-gain
/// targets go to the smallest community label, and only strictly positive
/// gains are taken. Labels in the result are densified.
pub fn phase_one(net: &FlowNetwork, options: &LouvainOptions) -> Result<Partition> {
    require_nonempty(net)?;
    let order = options.order.visit_order(net.node_count());
    let mut state = CommunityState::singletons(net);
    loop {
        let mut moved = false;
        for &node in &order {
            let src = state.detach(node)?;
            let neighbor_weights: BTreeMap<usize, f64> = state.neighbor_communities(node);
            let gain_source =
                state.insert_gain(node, src, neighbor_weights.get(&src).copied().unwrap_or(0.0));
            let mut best_target = src;
            let mut best_gain = 0.0;
            for (&community, &k_in) in &neighbor_weights {
                if community == src {
                    continue;
                }
                let gain = state.insert_gain(node, community, k_in) - gain_source;
                if gain > best_gain {
                    best_gain = gain;
                    best_target = community;
                }
            }
            state.insert(node, best_target)?;
            if best_target != src {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    state.partition()
}

/// Contract each community into a super-node.
///
/// Crossing weights sum onto the connecting edge; internal weights
/// (including old self-loops) become the super-node's self-loop. Total
/// weight is preserved and each super-node degree equals the community's
/// degree sum.
pub fn aggregate(net: &FlowNetwork, p: &Partition) -> Result<FlowNetwork> {
    if p.len() != net.node_count() {
        return Err(Error::PartitionSizeMismatch {
            expected: net.node_count(),
            got: p.len(),
        });
    }
    let count = p.community_count();
    let width = count.max(1).to_string().len();
    let zones: Vec<ZoneId> = (0..count).map(|l| format!("c{l:0width$}")).collect();
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut self_loop = vec![0.0; count];
    for (i, j, w) in net.pair_edges() {
        let (ci, cj) = (p.label(i), p.label(j));
        if ci == cj {
            self_loop[ci] += w;
        } else {
            let key = (ci.min(cj), ci.max(cj));
            *pairs.entry(key).or_insert(0.0) += w;
        }
    }
    for i in 0..net.node_count() {
        self_loop[p.label(i)] += net.self_loop(i);
    }
    Ok(FlowNetwork::from_indexed(zones, pairs, self_loop))
}

/// Alternate local moving and aggregation, recording every level that
/// improves overall modularity by at least `min_gain`.
pub fn run_louvain(net: &FlowNetwork, options: &LouvainOptions) -> Result<Dendrogram> {
    require_nonempty(net)?;
    let mut levels: Vec<DendrogramLevel> = Vec::new();
    let mut current = net.clone();
    let mut prev_q = modularity(&current, &Partition::singletons(current.node_count()))?;
    let mut composed: Option<Partition> = None;
    loop {
        if let Some(cap) = options.max_levels {
            if levels.len() >= cap {
                break;
            }
        }
        let level_options = LouvainOptions {
            order: options.order.for_level(levels.len()),
            ..*options
        };
        let p = phase_one(&current, &level_options)?;
        let q = modularity(&current, &p)?;
        let changed = p.community_count() < current.node_count();
        if !changed || q - prev_q < options.min_gain {
            break;
        }
        let zone_partition = match &composed {
            None => p.clone(),
            Some(prev) => prev.compose(&p)?,
        };
        log::debug!(
            "level {}: {} communities, q={q:.6}",
            levels.len(),
            p.community_count()
        );
        let next = aggregate(&current, &p)?;
        levels.push(DendrogramLevel {
            network: current,
            partition: p,
            q,
            zone_partition: zone_partition.clone(),
        });
        composed = Some(zone_partition);
        current = next;
        prev_q = q;
    }
    Ok(Dendrogram::new(net.zones().to_vec(), levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> FlowNetwork {
        FlowNetwork::from_edges([
            ("a", "b", 1.0),
            ("b", "c", 1.0),
            ("a", "c", 1.0),
            ("d", "e", 1.0),
            ("e", "f", 1.0),
            ("d", "f", 1.0),
            ("c", "d", 1.0),
        ])
    }

    fn triangle_partition(net: &FlowNetwork) -> Partition {
        let labels: Vec<usize> = net
            .zones()
            .iter()
            .map(|z| if z.as_str() < "d" { 0 } else { 1 })
            .collect();
        Partition::from_labels(labels).unwrap()
    }

    #[test]
    fn all_in_one_partition_scores_zero() {
        let net = two_triangles();
        let p = Partition::from_labels(vec![0; net.node_count()]).unwrap();
        let q = modularity(&net, &p).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn single_edge_singletons_score_minus_half() {
        let net = FlowNetwork::from_edges([("a", "b", 1.0)]);
        let q = modularity(&net, &Partition::singletons(2)).unwrap();
        assert!((q + 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_triangle_partition_scores_five_fourteenths() {
        let net = two_triangles();
        let q = modularity(&net, &triangle_partition(&net)).unwrap();
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn modularity_rejects_empty_or_mismatched() {
        let net = FlowNetwork::from_edges(std::iter::empty::<(&str, &str, f64)>());
        assert!(matches!(
            modularity(&net, &Partition::singletons(0)),
            Err(Error::EmptyNetwork)
        ));
        let net = FlowNetwork::from_edges([("a", "b", 1.0)]);
        assert!(matches!(
            modularity(&net, &Partition::singletons(3)),
            Err(Error::PartitionSizeMismatch { .. })
        ));
    }

    #[test]
    fn phase_one_splits_disconnected_cliques() {
        let mut edges = Vec::new();
        let left = ["a", "b", "c", "d"];
        let right = ["e", "f", "g", "h"];
        for group in [&left, &right] {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    edges.push((group[i], group[j], 1.0));
                }
            }
        }
        let net = FlowNetwork::from_edges(edges);
        let p = phase_one(&net, &LouvainOptions::default()).unwrap();
        assert_eq!(p.community_count(), 2);
        let la = p.label(net.zone_index("a").unwrap());
        for z in left {
            assert_eq!(p.label(net.zone_index(z).unwrap()), la);
        }
        let le = p.label(net.zone_index("e").unwrap());
        assert_ne!(la, le);
        for z in right {
            assert_eq!(p.label(net.zone_index(z).unwrap()), le);
        }
    }

    #[test]
    fn phase_one_single_self_loop_node() {
        let net = FlowNetwork::from_edges([("a", "a", 2.0)]);
        let p = phase_one(&net, &LouvainOptions::default()).unwrap();
        assert_eq!(p.community_count(), 1);
        assert!(modularity(&net, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn phase_one_is_deterministic() {
        let net = two_triangles();
        let p1 = phase_one(&net, &LouvainOptions::default()).unwrap();
        let p2 = phase_one(&net, &LouvainOptions::default()).unwrap();
        assert_eq!(p1, p2);
        let shuffled = LouvainOptions {
            order: NodeOrder::SeededShuffle(11),
            ..Default::default()
        };
        assert_eq!(
            phase_one(&net, &shuffled).unwrap(),
            phase_one(&net, &shuffled).unwrap()
        );
    }

    #[test]
    fn aggregate_two_triangles() {
        let net = two_triangles();
        let p = triangle_partition(&net);
        let agg = aggregate(&net, &p).unwrap();
        assert_eq!(agg.node_count(), 2);
        assert_eq!(agg.self_loop(0), 3.0);
        assert_eq!(agg.self_loop(1), 3.0);
        assert_eq!(agg.matrix_entry(0, 1), 1.0);
        assert_eq!(agg.total_weight(), 7.0);
        // Super-node degrees equal community degree sums.
        assert_eq!(agg.degree(0), 7.0);
        assert_eq!(agg.degree(1), 7.0);
    }

    #[test]
    fn aggregate_singletons_is_isomorphic() {
        let net = two_triangles();
        let agg = aggregate(&net, &Partition::singletons(net.node_count())).unwrap();
        assert_eq!(agg.node_count(), net.node_count());
        assert_eq!(agg.total_weight(), net.total_weight());
        for i in 0..net.node_count() {
            assert_eq!(agg.degree(i), net.degree(i));
            for j in 0..net.node_count() {
                assert_eq!(agg.matrix_entry(i, j), net.matrix_entry(i, j));
            }
        }
    }

    #[test]
    fn aggregate_all_in_one_is_single_loop() {
        let net = two_triangles();
        let p = Partition::from_labels(vec![0; net.node_count()]).unwrap();
        let agg = aggregate(&net, &p).unwrap();
        assert_eq!(agg.node_count(), 1);
        assert_eq!(agg.self_loop(0), net.total_weight());
        assert_eq!(agg.total_weight(), net.total_weight());
    }

    #[test]
    fn run_louvain_finds_triangles() {
        let net = two_triangles();
        let d = run_louvain(&net, &LouvainOptions::default()).unwrap();
        assert!(!d.is_empty());
        let final_level = d.levels().last().unwrap();
        assert_eq!(final_level.zone_partition.community_count(), 2);
        assert!((final_level.q - 5.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn run_louvain_on_complete_triangle_merges_all() {
        let net = FlowNetwork::from_edges([("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)]);
        let d = run_louvain(&net, &LouvainOptions::default()).unwrap();
        let last = d.levels().last().unwrap();
        assert_eq!(last.zone_partition.community_count(), 1);
        assert!(last.q.abs() < 1e-15);
    }

    #[test]
    fn run_louvain_serialization_is_reproducible() {
        let net = two_triangles();
        let opts = LouvainOptions {
            order: NodeOrder::SeededShuffle(99),
            ..Default::default()
        };
        let mut a = Vec::new();
        run_louvain(&net, &opts).unwrap().write_json(&mut a).unwrap();
        let mut b = Vec::new();
        run_louvain(&net, &opts).unwrap().write_json(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recorded_levels_strictly_improve() {
        // A graph with some hierarchy: a ring of four triangles.
        let mut edges = Vec::new();
        let names: Vec<String> = (0..12).map(|i| format!("n{i:02}")).collect();
        for t in 0..4 {
            let base = t * 3;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    edges.push((names[base + i].as_str(), names[base + j].as_str(), 1.0));
                }
            }
        }
        for t in 0..4 {
            edges.push((
                names[t * 3].as_str(),
                names[((t + 1) % 4) * 3].as_str(),
                1.0,
            ));
        }
        let net = FlowNetwork::from_edges(edges);
        let opts = LouvainOptions::default();
        let d = run_louvain(&net, &opts).unwrap();
        assert!(!d.is_empty());
        let mut prev = f64::NEG_INFINITY;
        for level in d.levels() {
            assert!(level.q >= prev + opts.min_gain || prev == f64::NEG_INFINITY);
            assert!(level.q > prev);
            prev = level.q;
        }
    }

    #[test]
    fn dendrogram_composition_reproduces_zone_partitions() {
        let net = two_triangles();
        let d = run_louvain(&net, &LouvainOptions::default()).unwrap();
        let mut composed: Option<Partition> = None;
        for level in d.levels() {
            composed = Some(match composed {
                None => level.partition.clone(),
                Some(prev) => prev.compose(&level.partition).unwrap(),
            });
            assert_eq!(composed.as_ref().unwrap(), &level.zone_partition);
        }
    }
}
