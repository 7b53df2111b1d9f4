//! Cutting the hierarchy to an arbitrary region count.
//!
//! A count that matches a recorded level is returned verbatim. Any other
//! count is reached by greedy pairwise merging, continuing the same
//! modularity objective from the finest usable starting point: the first
//! recorded level, or plain singletons when the request is finer than the
//! first level (or no level was recorded).

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::louvain::Dendrogram;
use crate::partition::Partition;

/// How a cut was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutProvenance {
    /// The partition is a recorded dendrogram level.
    DendrogramLevel(usize),
    /// The partition was reached by greedy pairwise merging.
    GreedyMerge,
}

impl CutProvenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            CutProvenance::DendrogramLevel(_) => "dendrogram-level",
            CutProvenance::GreedyMerge => "greedy-merge",
        }
    }
}

/// A partition forced to an exact region count, with its modularity.
#[derive(Debug, Clone)]
pub struct ScaleCut {
    pub k: usize,
    /// Zone-level partition (original node-index space).
    pub partition: Partition,
    pub q: f64,
    pub provenance: CutProvenance,
}

/// The composed zone-level partition at a recorded level.
pub fn cut_at_level(dendrogram: &Dendrogram, level: usize) -> Result<Partition> {
    Ok(dendrogram.zone_partition(level)?.clone())
}

/// Greedy agglomeration state over communities of the original network.
struct MergeEngine<'a> {
    net: &'a FlowNetwork,
    /// Live community label per zone; labels come from the starting
    /// partition and merge downward (winner keeps the smaller label).
    members: BTreeMap<usize, Vec<usize>>,
    /// Symmetric crossing weights between live communities.
    neighbors: BTreeMap<usize, BTreeMap<usize, f64>>,
    sigma_tot: BTreeMap<usize, f64>,
    sigma_in: BTreeMap<usize, f64>,
    /// Every multi-zone community formed so far (start groups and merge
    /// results, in creation order); these are the movable blocks for the
    /// refinement stage.
    blocks: Vec<Vec<usize>>,
}

impl<'a> MergeEngine<'a> {
    fn new(net: &'a FlowNetwork, start: &Partition) -> Self {
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut sigma_tot: BTreeMap<usize, f64> = BTreeMap::new();
        let mut sigma_in: BTreeMap<usize, f64> = BTreeMap::new();
        let mut neighbors: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        for node in 0..net.node_count() {
            let c = start.label(node);
            members.entry(c).or_default().push(node);
            *sigma_tot.entry(c).or_insert(0.0) += net.degree(node);
            *sigma_in.entry(c).or_insert(0.0) += 2.0 * net.self_loop(node);
            neighbors.entry(c).or_default();
        }
        for (i, j, w) in net.pair_edges() {
            let (ci, cj) = (start.label(i), start.label(j));
            if ci == cj {
                *sigma_in.get_mut(&ci).unwrap() += 2.0 * w;
            } else {
                *neighbors.get_mut(&ci).unwrap().entry(cj).or_insert(0.0) += w;
                *neighbors.get_mut(&cj).unwrap().entry(ci).or_insert(0.0) += w;
            }
        }
        let blocks = members.values().filter(|m| m.len() > 1).cloned().collect();
        Self {
            net,
            members,
            neighbors,
            sigma_tot,
            sigma_in,
            blocks,
        }
    }

    fn community_count(&self) -> usize {
        self.members.len()
    }

    /// Modularity gain of merging communities `a` and `b`.
    fn merge_gain(&self, a: usize, b: usize, between: f64) -> f64 {
        let m = self.net.total_weight();
        between / m - self.sigma_tot[&a] * self.sigma_tot[&b] / (2.0 * m * m)
    }

    /// The connected pair with maximal merge gain; falls back to the
    /// least-negative unconnected pair when nothing is connected. Ties go
    /// to the lexicographically smallest (a, b) label pair.
    fn best_pair(&self) -> Option<(usize, usize)> {
        let mut best: Option<(f64, (usize, usize))> = None;
        for (&a, adj) in &self.neighbors {
            for (&b, &w) in adj {
                if b <= a {
                    continue;
                }
                let gain = self.merge_gain(a, b, w);
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, (a, b)));
                }
            }
        }
        if let Some((_, pair)) = best {
            return Some(pair);
        }
        // Disconnected leftovers: every pair has zero crossing weight.
        let labels: Vec<usize> = self.members.keys().copied().collect();
        let mut best: Option<(f64, (usize, usize))> = None;
        for (i, &a) in labels.iter().enumerate() {
            for &b in &labels[i + 1..] {
                let gain = self.merge_gain(a, b, 0.0);
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, (a, b)));
                }
            }
        }
        best.map(|(_, pair)| pair)
    }

    /// Merge `b` into `a` (requires `a < b`).
    fn merge(&mut self, a: usize, b: usize) {
        debug_assert!(a < b);
        let between = self
            .neighbors
            .get(&a)
            .and_then(|adj| adj.get(&b))
            .copied()
            .unwrap_or(0.0);
        let b_members = self.members.remove(&b).unwrap();
        self.members.get_mut(&a).unwrap().extend(b_members);
        let b_tot = self.sigma_tot.remove(&b).unwrap();
        *self.sigma_tot.get_mut(&a).unwrap() += b_tot;
        let b_in = self.sigma_in.remove(&b).unwrap();
        *self.sigma_in.get_mut(&a).unwrap() += b_in + 2.0 * between;
        let b_adj = self.neighbors.remove(&b).unwrap();
        for (x, w) in b_adj {
            if x == a {
                continue;
            }
            let x_adj = self.neighbors.get_mut(&x).unwrap();
            x_adj.remove(&b);
            *x_adj.entry(a).or_insert(0.0) += w;
            *self.neighbors.get_mut(&a).unwrap().entry(x).or_insert(0.0) += w;
        }
        self.neighbors.get_mut(&a).unwrap().remove(&b);
        self.blocks.push(self.members[&a].clone());
    }

    /// Densified zone-level partition and Q of the current state. Q comes
    /// from the maintained community sums, an independent route from
    /// `modularity()`'s edge scan.
    fn snapshot(&self) -> (Partition, f64) {
        let mut labels = vec![0usize; self.net.node_count()];
        for (dense, (_, nodes)) in self.members.iter().enumerate() {
            for &node in nodes {
                labels[node] = dense;
            }
        }
        let two_m = 2.0 * self.net.total_weight();
        let mut q = 0.0;
        for (label, s_in) in &self.sigma_in {
            let tot = self.sigma_tot[label] / two_m;
            q += s_in / two_m - tot * tot;
        }
        (
            Partition::from_labels(labels).expect("merge labels are dense"),
            q,
        )
    }
}

/// Region-count-preserving refinement by block moves.
///
/// Sweeps every single node and every merge-history block, relocating it to
/// the neighboring community with the largest strictly positive modularity
/// gain, provided the move does not empty the source community. Greedy
/// merging alone can strand a well-knit group inside the wrong community
/// where no single-node move escapes; moving merge-tree blocks as units
/// covers exactly those cases while staying deterministic.
struct BlockRefiner<'a> {
    net: &'a FlowNetwork,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    sigma_tot: Vec<f64>,
    sigma_in: Vec<f64>,
    in_block: Vec<bool>,
}

impl<'a> BlockRefiner<'a> {
    fn new(net: &'a FlowNetwork, start: &Partition) -> Self {
        let count = start.community_count();
        let mut sizes = vec![0usize; count];
        let mut sigma_tot = vec![0.0; count];
        let mut sigma_in = vec![0.0; count];
        for node in 0..net.node_count() {
            let c = start.label(node);
            sizes[c] += 1;
            sigma_tot[c] += net.degree(node);
            sigma_in[c] += 2.0 * net.self_loop(node);
        }
        for (i, j, w) in net.pair_edges() {
            if start.label(i) == start.label(j) {
                sigma_in[start.label(i)] += 2.0 * w;
            }
        }
        Self {
            net,
            labels: start.labels().to_vec(),
            sizes,
            sigma_tot,
            sigma_in,
            in_block: vec![false; net.node_count()],
        }
    }

    /// Try to move `block` (all members must share a community) to its best
    /// neighboring community. Returns true if moved.
    fn try_move(&mut self, block: &[usize]) -> bool {
        let source = self.labels[block[0]];
        if block.iter().any(|&b| self.labels[b] != source) {
            return false;
        }
        if self.sizes[source] == block.len() {
            return false; // would just relabel or empty the community
        }
        for &b in block {
            self.in_block[b] = true;
        }
        // External weights by community, and the block's own internal
        // weight under the doubled convention.
        let mut external: BTreeMap<usize, f64> = BTreeMap::new();
        let mut internal_doubled = 0.0;
        let mut block_degree = 0.0;
        for &b in block {
            block_degree += self.net.degree(b);
            internal_doubled += 2.0 * self.net.self_loop(b);
            for &(j, w) in self.net.neighbors(b) {
                if self.in_block[j] {
                    internal_doubled += w; // both directions sum to 2w
                } else {
                    *external.entry(self.labels[j]).or_insert(0.0) += w;
                }
            }
        }
        for &b in block {
            self.in_block[b] = false;
        }
        let m = self.net.total_weight();
        let to_rest_of_source = external.get(&source).copied().unwrap_or(0.0);
        let mut best_target = source;
        let mut best_gain = 0.0;
        for (&target, &weight) in &external {
            if target == source {
                continue;
            }
            let gain = (weight - to_rest_of_source) / m
                - block_degree * (self.sigma_tot[target] - self.sigma_tot[source] + block_degree)
                    / (2.0 * m * m);
            if gain > best_gain {
                best_gain = gain;
                best_target = target;
            }
        }
        if best_target == source {
            return false;
        }
        let to_target = external.get(&best_target).copied().unwrap_or(0.0);
        self.sigma_in[source] -= 2.0 * to_rest_of_source + internal_doubled;
        self.sigma_in[best_target] += 2.0 * to_target + internal_doubled;
        self.sigma_tot[source] -= block_degree;
        self.sigma_tot[best_target] += block_degree;
        self.sizes[source] -= block.len();
        self.sizes[best_target] += block.len();
        for &b in block {
            self.labels[b] = best_target;
        }
        true
    }

    fn run(&mut self, blocks: &[Vec<usize>]) {
        // Strictly increasing Q guarantees termination; the cap is a guard
        // against pathological float creep. Chain passes are the expensive
        // escape hatch and only run when plain sweeps stall.
        for _ in 0..1000 {
            let mut moved = false;
            for node in 0..self.net.node_count() {
                moved |= self.try_move(&[node]);
            }
            for block in blocks {
                moved |= self.try_move(block);
            }
            if !moved {
                moved = self.chain_pass();
            }
            if !moved {
                break;
            }
        }
    }

    fn move_node(&mut self, node: usize, target: usize) {
        let source = self.labels[node];
        let mut to_source = 0.0;
        let mut to_target = 0.0;
        for &(j, w) in self.net.neighbors(node) {
            if self.labels[j] == source {
                to_source += w;
            } else if self.labels[j] == target {
                to_target += w;
            }
        }
        let own = 2.0 * self.net.self_loop(node);
        let degree = self.net.degree(node);
        self.sigma_in[source] -= 2.0 * to_source + own;
        self.sigma_in[target] += 2.0 * to_target + own;
        self.sigma_tot[source] -= degree;
        self.sigma_tot[target] += degree;
        self.sizes[source] -= 1;
        self.sizes[target] += 1;
        self.labels[node] = target;
    }

    fn rebuild_sums(&mut self) {
        self.sigma_tot.iter_mut().for_each(|v| *v = 0.0);
        self.sigma_in.iter_mut().for_each(|v| *v = 0.0);
        for node in 0..self.net.node_count() {
            let c = self.labels[node];
            self.sigma_tot[c] += self.net.degree(node);
            self.sigma_in[c] += 2.0 * self.net.self_loop(node);
        }
        for (i, j, w) in self.net.pair_edges() {
            if self.labels[i] == self.labels[j] {
                self.sigma_in[self.labels[i]] += 2.0 * w;
            }
        }
    }

    /// Best strictly-k-preserving move of one unlocked node, even if
    /// negative. Ties go to the smallest node index, then target label.
    fn best_single_move(&self, locked: &[bool]) -> Option<(f64, usize, usize)> {
        let m = self.net.total_weight();
        let mut choice: Option<(f64, usize, usize)> = None;
        for (node, &is_locked) in locked.iter().enumerate() {
            if is_locked {
                continue;
            }
            let source = self.labels[node];
            if self.sizes[source] == 1 {
                continue;
            }
            let mut to_source = 0.0;
            let mut external: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in self.net.neighbors(node) {
                let c = self.labels[j];
                if c == source {
                    to_source += w;
                } else {
                    *external.entry(c).or_insert(0.0) += w;
                }
            }
            let degree = self.net.degree(node);
            for (&target, &weight) in &external {
                let gain = (weight - to_source) / m
                    - degree * (self.sigma_tot[target] - self.sigma_tot[source] + degree)
                        / (2.0 * m * m);
                if choice.as_ref().is_none_or(|&(g, _, _)| gain > g) {
                    choice = Some((gain, node, target));
                }
            }
        }
        choice
    }

    /// Run one move chain: force `first` if given, then greedy
    /// continuation with locking. Returns the best cumulative prefix and
    /// its moves, leaving the state as it was on entry.
    fn run_chain(
        &mut self,
        first: Option<(f64, usize, usize)>,
    ) -> (f64, Vec<(usize, usize)>) {
        let n = self.net.node_count();
        let mut locked = vec![false; n];
        let mut log: Vec<(usize, usize)> = Vec::new(); // (node, previous label)
        let mut moves: Vec<(usize, usize)> = Vec::new(); // (node, target)
        let mut cumulative = 0.0;
        let mut best_cumulative = 0.0;
        let mut best_len = 0usize;
        let mut pending = first;
        while let Some((gain, node, target)) =
            pending.take().or_else(|| self.best_single_move(&locked))
        {
            log.push((node, self.labels[node]));
            moves.push((node, target));
            self.move_node(node, target);
            locked[node] = true;
            cumulative += gain;
            if cumulative > best_cumulative {
                best_cumulative = cumulative;
                best_len = log.len();
            }
        }
        for &(node, previous) in log.iter().rev() {
            self.move_node(node, previous);
        }
        self.rebuild_sums();
        moves.truncate(best_len);
        (best_cumulative, moves)
    }

    /// Kernighan-Lin style escape: apply chains of single-node moves that
    /// may dip negative before paying off, keeping the best prefix. Small
    /// networks can afford a chain per candidate first move; larger ones
    /// get one greedily seeded chain.
    fn chain_pass(&mut self) -> bool {
        let n = self.net.node_count();
        let m = self.net.total_weight();
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        let mut consider = |state: &mut Self, first: Option<(f64, usize, usize)>| {
            let (score, moves) = state.run_chain(first);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, moves));
            }
        };
        if n <= 64 {
            let mut firsts = Vec::new();
            for node in 0..n {
                let source = self.labels[node];
                if self.sizes[source] == 1 {
                    continue;
                }
                let mut to_source = 0.0;
                let mut external: BTreeMap<usize, f64> = BTreeMap::new();
                for &(j, w) in self.net.neighbors(node) {
                    let c = self.labels[j];
                    if c == source {
                        to_source += w;
                    } else {
                        *external.entry(c).or_insert(0.0) += w;
                    }
                }
                let degree = self.net.degree(node);
                for (&target, &weight) in &external {
                    let gain = (weight - to_source) / m
                        - degree * (self.sigma_tot[target] - self.sigma_tot[source] + degree)
                            / (2.0 * m * m);
                    firsts.push((gain, node, target));
                }
            }
            for first in firsts {
                consider(self, Some(first));
            }
        } else {
            consider(self, None);
        }
        let Some((score, moves)) = best else {
            return false;
        };
        if score <= 1e-12 {
            return false;
        }
        for (node, target) in moves {
            self.move_node(node, target);
        }
        self.rebuild_sums();
        true
    }

    fn finish(self) -> (Partition, f64) {
        let two_m = 2.0 * self.net.total_weight();
        let mut q = 0.0;
        for c in 0..self.sigma_in.len() {
            let tot = self.sigma_tot[c] / two_m;
            q += self.sigma_in[c] / two_m - tot * tot;
        }
        (Partition::densify(&self.labels), q)
    }
}

fn refine_fixed_k(
    net: &FlowNetwork,
    start: &Partition,
    blocks: &[Vec<usize>],
) -> (Partition, f64) {
    let mut refiner = BlockRefiner::new(net, start);
    refiner.run(blocks);
    refiner.finish()
}

fn check_k(k: usize, max: usize) -> Result<()> {
    if k < 1 || k > max {
        return Err(Error::KOutOfRange { k, max });
    }
    Ok(())
}

fn exact_level(dendrogram: &Dendrogram, k: usize) -> Option<(usize, &Partition, f64)> {
    dendrogram
        .levels()
        .iter()
        .enumerate()
        .find(|(_, level)| level.zone_partition.community_count() == k)
        .map(|(i, level)| (i, &level.zone_partition, level.q))
}

/// Merge starting points for a target of `k` regions: every recorded level
/// fine enough to reach `k`, plus singletons (the only start when the
/// request is finer than the first level or nothing was recorded).
fn merge_starts(net: &FlowNetwork, dendrogram: &Dendrogram, k: usize) -> Vec<Partition> {
    let mut starts: Vec<Partition> = dendrogram
        .levels()
        .iter()
        .map(|level| &level.zone_partition)
        .filter(|zp| zp.community_count() >= k)
        .cloned()
        .collect();
    starts.push(Partition::singletons(net.node_count()));
    starts
}

fn merge_down_to(net: &FlowNetwork, start: &Partition, k: usize) -> (Partition, f64) {
    let mut engine = MergeEngine::new(net, start);
    while engine.community_count() > k {
        let (a, b) = engine.best_pair().expect("at least two communities remain");
        engine.merge(a, b);
    }
    let (merged, _) = engine.snapshot();
    refine_fixed_k(net, &merged, &engine.blocks)
}

/// Force an exact region count.
///
/// A k matching a recorded level returns that level, unless greedy merging
/// (plus fixed-k refinement) from some candidate start scores strictly
/// better; any other k always goes through the merge path. Either way the
/// best-scoring partition with exactly k regions wins.
pub fn cut_to_k(net: &FlowNetwork, dendrogram: &Dendrogram, k: usize) -> Result<ScaleCut> {
    check_k(k, net.node_count())?;
    let level = exact_level(dendrogram, k);
    let mut best: Option<(Partition, f64)> = None;
    for start in merge_starts(net, dendrogram, k) {
        let (partition, q) = merge_down_to(net, &start, k);
        if best.as_ref().is_none_or(|(_, bq)| q > *bq) {
            best = Some((partition, q));
        }
    }
    let (partition, q) = best.expect("singleton start always present");
    if let Some((index, level_partition, level_q)) = level {
        if level_q >= q {
            return Ok(ScaleCut {
                k,
                partition: level_partition.clone(),
                q: level_q,
                provenance: CutProvenance::DendrogramLevel(index),
            });
        }
    }
    Ok(ScaleCut {
        k,
        partition,
        q,
        provenance: CutProvenance::GreedyMerge,
    })
}

/// The modularity-vs-K trace.
#[derive(Debug, Clone)]
pub struct ModularityCurve {
    /// (k, Q) points in ascending k.
    pub points: Vec<(usize, f64)>,
    /// The k with maximal Q (smallest such k on ties).
    pub argmax_k: usize,
}

impl ModularityCurve {
    pub fn q_at(&self, k: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|&&(pk, _)| pk == k)
            .map(|&(_, q)| q)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,Q")?;
        for (k, q) in &self.points {
            writeln!(w, "{k},{q}")?;
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "points": self
                .points
                .iter()
                .map(|(k, q)| json!({"k": k, "q": q}))
                .collect::<Vec<_>>(),
            "argmax_k": self.argmax_k,
        })
    }
}

/// Q per k over `[k_min, k_max]`, sharing merge work across successive k:
/// each merge engine runs once from its starting partition and snapshots
/// every k it passes; recorded levels are served verbatim.
pub fn modularity_curve(
    net: &FlowNetwork,
    dendrogram: &Dendrogram,
    k_min: usize,
    k_max: usize,
) -> Result<ModularityCurve> {
    check_k(k_min, net.node_count())?;
    check_k(k_max, net.node_count())?;
    if k_min > k_max {
        return Err(Error::KOutOfRange {
            k: k_min,
            max: k_max,
        });
    }
    let mut level_q: BTreeMap<usize, f64> = BTreeMap::new();
    for level in dendrogram.levels() {
        let count = level.zone_partition.community_count();
        if count >= k_min && count <= k_max {
            level_q.insert(count, level.q);
        }
    }

    // One engine per candidate start, advanced monotonically downward so
    // successive k values share the merge prefix. Recorded levels compete
    // with the merge results exactly as in cut_to_k.
    let mut q_by_k: BTreeMap<usize, f64> = BTreeMap::new();
    let mut engines: Vec<(usize, MergeEngine)> = merge_starts(net, dendrogram, k_min)
        .iter()
        .map(|start| (start.community_count(), MergeEngine::new(net, start)))
        .collect();
    for k in (k_min..=k_max).rev() {
        let mut best: Option<f64> = level_q.get(&k).copied();
        for (start_count, engine) in engines.iter_mut() {
            if *start_count < k {
                continue;
            }
            while engine.community_count() > k {
                let (a, b) = engine.best_pair().expect("two communities remain");
                engine.merge(a, b);
            }
            let (merged, _) = engine.snapshot();
            let (_, q) = refine_fixed_k(net, &merged, &engine.blocks);
            if best.is_none_or(|b| q > b) {
                best = Some(q);
            }
        }
        q_by_k.insert(k, best.expect("singleton start covers every k"));
    }

    let points: Vec<(usize, f64)> = q_by_k.into_iter().collect();
    let argmax_k = points
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, q)| match best {
            Some((_, bq)) if bq >= q => best,
            _ => Some((k, q)),
        })
        .map(|(k, _)| k)
        .expect("range is nonempty");
    Ok(ModularityCurve { points, argmax_k })
}
