//! Chance-corrected agreement between two zone partitions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::partition::ZonePartition;

fn comb2(n: u64) -> u128 {
    let n = n as u128;
    n * (n - 1) / 2
}

/// Adjusted Rand index between two partitions of the same zone set.
///
/// 1 for identical partitions (up to relabeling), around 0 for independent
/// ones, negative for systematic disagreement.
pub fn adjusted_rand_index(a: &ZonePartition, b: &ZonePartition) -> Result<f64> {
    if a.len() != b.len() || a.zones().zip(b.zones()).any(|(x, y)| x != y) {
        return Err(Error::ZoneSetMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as u64;
    if n < 2 {
        return Err(Error::InvalidInput(
            "adjusted Rand index needs at least two zones".into(),
        ));
    }
    let mut contingency: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (zone, label_a) in a.iter() {
        let label_b = b.get(zone).unwrap();
        *contingency.entry((label_a, label_b)).or_insert(0) += 1;
        *rows.entry(label_a).or_insert(0) += 1;
        *cols.entry(label_b).or_insert(0) += 1;
    }
    let index: u128 = contingency.values().map(|&v| comb2(v)).sum();
    let sum_rows: u128 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: u128 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n) as f64;
    let expected = (sum_rows as f64) * (sum_cols as f64) / total;
    let max_index = 0.5 * (sum_rows as f64 + sum_cols as f64);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions are trivial (all-in-one or all singletons on both
        // sides); agreement equals chance.
        return Ok(0.0);
    }
    Ok((index as f64 - expected) / denom)
}
