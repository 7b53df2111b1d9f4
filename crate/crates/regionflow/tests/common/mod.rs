#![allow(dead_code)]

//! Shared independent oracles for integration tests: a direct double-sum
//! modularity evaluation, exhaustive partition enumeration, and random
//! instance generators. These deliberately avoid the library's own
//! community-sum code paths.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regionflow::{FlowNetwork, Partition};

/// Direct evaluation of the modularity double sum over all ordered node
/// pairs (self-pairs included, matrix diagonal = twice the self-loop).
pub fn direct_modularity(net: &FlowNetwork, p: &Partition) -> f64 {
    let n = net.node_count();
    let two_m = 2.0 * net.total_weight();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if p.label(i) != p.label(j) {
                continue;
            }
            q += net.matrix_entry(i, j) - net.degree(i) * net.degree(j) / two_m;
        }
    }
    q / two_m
}

/// All set partitions of `n` items as restricted-growth label strings.
pub fn enumerate_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn step(labels: &mut Vec<usize>, i: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if i == labels.len() {
            out.push(labels.clone());
            return;
        }
        for label in 0..=max_used + 1 {
            labels[i] = label;
            step(labels, i + 1, max_used.max(label), out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    step(&mut labels, 1, 0, &mut out);
    out
}

/// Exhaustive best partition by the direct double sum.
pub fn exhaustive_best(net: &FlowNetwork) -> (Partition, f64) {
    let n = net.node_count();
    let mut best: Option<(Partition, f64)> = None;
    for labels in enumerate_partitions(n) {
        let p = Partition::densify(&labels);
        let q = direct_modularity(net, &p);
        if best.as_ref().is_none_or(|(_, bq)| q > *bq) {
            best = Some((p, q));
        }
    }
    best.expect("at least one partition")
}

/// Random weighted network on up to `max_nodes` nodes, possibly with
/// self-loops; always has positive total weight.
pub fn random_network(rng: &mut ChaCha8Rng, max_nodes: usize) -> FlowNetwork {
    let n = rng.random_range(2..=max_nodes);
    let names: Vec<String> = (0..n).map(|i| format!("z{i:03}")).collect();
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.45 {
                let w = 0.25 + rng.random::<f64>() * 4.0;
                edges.push((names[i].clone(), names[j].clone(), w));
            }
        }
        if rng.random::<f64>() < 0.25 {
            let w = 0.25 + rng.random::<f64>() * 2.0;
            edges.push((names[i].clone(), names[i].clone(), w));
        }
    }
    if edges.is_empty() {
        edges.push((names[0].clone(), names[1].clone(), 1.0));
    }
    FlowNetwork::from_edges(edges.iter().map(|(a, b, w)| (a.as_str(), b.as_str(), *w)))
}

/// Random dense labeling of `n` nodes into at most `max_labels` groups.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, max_labels: usize) -> Partition {
    let k = rng.random_range(1..=max_labels.min(n));
    let raw: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    Partition::densify(&raw)
}
