//! Plurality-rule baseline delineation with contiguity repair.
//!
//! Step one seeds a region at every hospital home zone; step two assigns
//! each zone to the home zone receiving the most of its admissions; step
//! three reassigns enclave zones to adjacent regions until every region is
//! connected (island zones with no neighbors are exempt and flagged).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{FlowTable, HospitalRoster};
use crate::partition::ZonePartition;
use crate::zones::ZoneId;

/// Symmetric zone adjacency (rook-style: shared boundary, not corners).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdjacencyMap {
    adj: BTreeMap<ZoneId, BTreeSet<ZoneId>>,
}

impl AdjacencyMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record an undirected neighbor pair.
    pub fn insert_pair(&mut self, a: &str, b: &str) -> Result<()> {
        if a == b {
            return Err(Error::SelfAdjacency(a.to_string()));
        }
        self.adj
            .entry(a.to_string())
            .or_default()
            .insert(b.to_string());
        self.adj
            .entry(b.to_string())
            .or_default()
            .insert(a.to_string());
        Ok(())
    }

    /// Declare a zone with no recorded neighbors (an island until pairs
    /// are added).
    pub fn insert_zone(&mut self, zone: &str) {
        self.adj.entry(zone.to_string()).or_default();
    }

    pub fn neighbors(&self, zone: &str) -> Option<&BTreeSet<ZoneId>> {
        self.adj.get(zone)
    }

    pub fn zones(&self) -> impl Iterator<Item = &ZoneId> {
        self.adj.keys()
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Parse `zone_a,zone_b` CSV, one undirected pair per row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut map = Self::new();
        let mut saw_header = false;
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != "zone_a,zone_b" {
                    return Err(Error::InvalidInput(format!(
                        "expected header zone_a,zone_b, got {line:?}"
                    )));
                }
                saw_header = true;
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::MalformedRecord {
                index: lineno + 1,
                message: "expected zone_a,zone_b".into(),
            })?;
            map.insert_pair(a.trim(), b.trim())?;
        }
        Ok(map)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "zone_a,zone_b")?;
        for (a, neighbors) in &self.adj {
            for b in neighbors {
                if a < b {
                    writeln!(w, "{a},{b}")?;
                }
            }
        }
        Ok(())
    }
}

/// Flags accumulated by the baseline steps, exported as a JSON sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaselineFlags {
    /// Zones whose plurality was tied (broken toward the smaller zone id).
    pub plurality_ties: Vec<ZoneId>,
    /// Zones with no flows, placed by nearest seed centroid.
    pub no_flow: Vec<ZoneId>,
    /// Zones or zone groups with no outside neighbors, exempt from the
    /// contiguity requirement.
    pub islands: Vec<ZoneId>,
    /// Enclave zones that could not be reassigned (stabilized passes).
    pub unresolved: Vec<ZoneId>,
}

impl BaselineFlags {
    pub fn to_json(&self) -> Value {
        json!({
            "plurality_ties": self.plurality_ties,
            "no_flow": self.no_flow,
            "islands": self.islands,
            "unresolved": self.unresolved,
        })
    }

    fn merge(&mut self, other: BaselineFlags) {
        self.plurality_ties.extend(other.plurality_ties);
        self.no_flow.extend(other.no_flow);
        self.islands.extend(other.islands);
        self.unresolved.extend(other.unresolved);
    }
}

/// Assign each zone to the hospital home zone receiving the most of its
/// admissions.
///
/// `universe` widens the zone set beyond what appears in the table (zones
/// with no flows fall back to the nearest seed centroid and are flagged);
/// by default the universe is the table's patient zones plus all seed
/// zones. `centroids` is only consulted for zero-flow zones.
pub fn plurality_assign(
    table: &FlowTable,
    roster: &HospitalRoster,
    universe: Option<&BTreeSet<ZoneId>>,
    centroids: Option<&BTreeMap<ZoneId, (f64, f64)>>,
) -> Result<(ZonePartition, BaselineFlags)> {
    if table.is_empty() {
        return Err(Error::InvalidInput("flow table is empty".into()));
    }
    // Flow totals zone -> seed (hospital home zone).
    let mut flows: BTreeMap<ZoneId, BTreeMap<ZoneId, u64>> = BTreeMap::new();
    let mut seeds: BTreeSet<ZoneId> = BTreeSet::new();
    for row in table.rows() {
        let home = match &row.hospital_zone {
            Some(z) => z.clone(),
            None => roster
                .home_zone(&row.hospital)
                .cloned()
                .ok_or_else(|| Error::UnknownHospital(row.hospital.clone()))?,
        };
        seeds.insert(home.clone());
        *flows
            .entry(row.patient_zone.clone())
            .or_default()
            .entry(home)
            .or_insert(0) += row.count;
    }

    let mut zones: BTreeSet<ZoneId> = match universe {
        Some(u) => u.clone(),
        None => flows.keys().cloned().collect(),
    };
    zones.extend(seeds.iter().cloned());

    let mut flags = BaselineFlags::default();
    let mut assignment: BTreeMap<ZoneId, ZoneId> = BTreeMap::new();
    let mut missing_centroids: Vec<ZoneId> = Vec::new();
    for zone in &zones {
        match flows.get(zone) {
            Some(by_seed) => {
                let max = *by_seed.values().max().unwrap();
                // Ascending key order means the first maximum is the
                // smallest seed id.
                let winner = by_seed
                    .iter()
                    .find(|(_, &v)| v == max)
                    .map(|(s, _)| s.clone())
                    .unwrap();
                if by_seed.values().filter(|&&v| v == max).count() > 1 {
                    flags.plurality_ties.push(zone.clone());
                }
                assignment.insert(zone.clone(), winner);
            }
            None => {
                let zone_centroid = centroids.and_then(|c| c.get(zone));
                match zone_centroid {
                    Some(&(zx, zy)) => {
                        let mut best: Option<(f64, &ZoneId)> = None;
                        for seed in &seeds {
                            let Some(&(sx, sy)) = centroids.and_then(|c| c.get(seed)) else {
                                missing_centroids.push(zone.clone());
                                best = None;
                                break;
                            };
                            let d2 = (zx - sx).powi(2) + (zy - sy).powi(2);
                            // Strict < keeps the smallest seed id on ties.
                            if best.is_none_or(|(bd, _)| d2 < bd) {
                                best = Some((d2, seed));
                            }
                        }
                        if let Some((_, seed)) = best {
                            assignment.insert(zone.clone(), seed.clone());
                            flags.no_flow.push(zone.clone());
                        }
                    }
                    None => missing_centroids.push(zone.clone()),
                }
            }
        }
    }
    if !missing_centroids.is_empty() {
        missing_centroids.sort();
        missing_centroids.dedup();
        return Err(Error::NoCentroidForZones {
            zones: missing_centroids,
        });
    }

    // Region labels are densified over the seed zones actually won.
    let used_seeds: BTreeSet<&ZoneId> = assignment.values().collect();
    let seed_label: BTreeMap<&ZoneId, usize> = used_seeds
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i))
        .collect();
    let map: BTreeMap<ZoneId, usize> = assignment
        .iter()
        .map(|(z, s)| (z.clone(), seed_label[s]))
        .collect();
    Ok((ZonePartition::from_map(map), flags))
}

/// Connected components of one region's zone set under the adjacency map.
fn region_components(
    zones: &BTreeSet<ZoneId>,
    adj: &AdjacencyMap,
) -> Vec<BTreeSet<ZoneId>> {
    let mut seen: BTreeSet<&ZoneId> = BTreeSet::new();
    let mut components = Vec::new();
    for start in zones {
        if seen.contains(start) {
            continue;
        }
        let mut component = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(zone) = queue.pop_front() {
            component.insert(zone.clone());
            if let Some(neighbors) = adj.neighbors(zone) {
                for n in neighbors {
                    if zones.contains(n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        components.push(component);
    }
    components
}

/// True when no zone of the component has any neighbor outside it.
fn is_island(component: &BTreeSet<ZoneId>, adj: &AdjacencyMap) -> bool {
    component.iter().all(|z| {
        adj.neighbors(z)
            .is_none_or(|ns| ns.iter().all(|n| component.contains(n)))
    })
}

/// Reassign enclave zones until every region is a connected subgraph of
/// the adjacency graph (island components are exempt and flagged).
pub fn enforce_contiguity(
    partition: &ZonePartition,
    adj: &AdjacencyMap,
    table: &FlowTable,
) -> Result<(ZonePartition, BaselineFlags)> {
    // Directed zone -> zone flow totals, for enclave destination choice
    // and component tie-breaks.
    let mut zone_flows: BTreeMap<ZoneId, BTreeMap<ZoneId, u64>> = BTreeMap::new();
    for row in table.rows() {
        if let Some(home) = &row.hospital_zone {
            *zone_flows
                .entry(row.patient_zone.clone())
                .or_default()
                .entry(home.clone())
                .or_insert(0) += row.count;
        }
    }
    let internal_flow = |component: &BTreeSet<ZoneId>| -> u64 {
        component
            .iter()
            .filter_map(|z| zone_flows.get(z))
            .flat_map(|dests| dests.iter())
            .filter(|(dest, _)| component.contains(*dest))
            .map(|(_, &c)| c)
            .sum()
    };

    let mut labels: BTreeMap<ZoneId, usize> = partition.as_map().clone();
    let mut flags = BaselineFlags::default();
    let mut island_zones: BTreeSet<ZoneId> = BTreeSet::new();
    let max_passes = labels.len().max(16);

    for _pass in 0..max_passes {
        let mut regions: BTreeMap<usize, BTreeSet<ZoneId>> = BTreeMap::new();
        for (zone, &label) in &labels {
            regions.entry(label).or_default().insert(zone.clone());
        }
        let mut moves: Vec<(ZoneId, usize)> = Vec::new();
        for zones in regions.values() {
            let components = region_components(zones, adj);
            if components.len() <= 1 {
                continue;
            }
            let mut mainland: Vec<&BTreeSet<ZoneId>> = Vec::new();
            for component in &components {
                if is_island(component, adj) {
                    island_zones.extend(component.iter().cloned());
                } else {
                    mainland.push(component);
                }
            }
            if mainland.len() <= 1 {
                continue;
            }
            // Keep the largest mainland component: most zones, then most
            // internal flow, then smallest leading zone id.
            let keep = mainland
                .iter()
                .max_by(|a, b| {
                    a.len()
                        .cmp(&b.len())
                        .then_with(|| internal_flow(a).cmp(&internal_flow(b)))
                        .then_with(|| b.first().cmp(&a.first()))
                })
                .unwrap();
            for component in &mainland {
                if std::ptr::eq(*component, *keep) {
                    continue;
                }
                for zone in component.iter() {
                    let own = labels[zone];
                    // Adjacent regions, by flow share received from this zone.
                    let mut shares: BTreeMap<usize, u64> = BTreeMap::new();
                    for neighbor in adj.neighbors(zone).into_iter().flatten() {
                        if let Some(&label) = labels.get(neighbor) {
                            if label != own {
                                shares.entry(label).or_insert(0);
                            }
                        }
                    }
                    if shares.is_empty() {
                        continue; // retry next pass once neighbors have moved
                    }
                    if let Some(dests) = zone_flows.get(zone) {
                        for (dest, &count) in dests {
                            if let Some(&label) = labels.get(dest) {
                                if let Some(total) = shares.get_mut(&label) {
                                    *total += count;
                                }
                            }
                        }
                    }
                    let best = *shares.values().max().unwrap();
                    let target = shares
                        .iter()
                        .find(|(_, &v)| v == best)
                        .map(|(&l, _)| l)
                        .unwrap();
                    moves.push((zone.clone(), target));
                }
            }
        }
        if moves.is_empty() {
            break;
        }
        for (zone, target) in moves {
            labels.insert(zone, target);
        }
    }

    // Anything still disconnected after stabilizing is flagged.
    let mut regions: BTreeMap<usize, BTreeSet<ZoneId>> = BTreeMap::new();
    for (zone, &label) in &labels {
        regions.entry(label).or_default().insert(zone.clone());
    }
    for zones in regions.values() {
        let components = region_components(zones, adj);
        let mut mainland: Vec<&BTreeSet<ZoneId>> = Vec::new();
        for component in &components {
            if is_island(component, adj) {
                island_zones.extend(component.iter().cloned());
            } else {
                mainland.push(component);
            }
        }
        if mainland.len() > 1 {
            let keep = mainland
                .iter()
                .max_by(|a, b| {
                    a.len()
                        .cmp(&b.len())
                        .then_with(|| internal_flow(a).cmp(&internal_flow(b)))
                        .then_with(|| b.first().cmp(&a.first()))
                })
                .unwrap();
            for component in &mainland {
                if !std::ptr::eq(*component, *keep) {
                    flags.unresolved.extend(component.iter().cloned());
                }
            }
        }
    }
    flags.islands = island_zones.into_iter().collect();
    flags.unresolved.sort();
    flags.unresolved.dedup();
    Ok((ZonePartition::from_map(labels), flags))
}

/// Run both baseline steps: plurality assignment, then contiguity repair.
pub fn dartmouth_baseline(
    table: &FlowTable,
    roster: &HospitalRoster,
    adj: &AdjacencyMap,
    universe: Option<&BTreeSet<ZoneId>>,
    centroids: Option<&BTreeMap<ZoneId, (f64, f64)>>,
) -> Result<(ZonePartition, BaselineFlags)> {
    let (assigned, mut flags) = plurality_assign(table, roster, universe, centroids)?;
    let (connected, repair_flags) = enforce_contiguity(&assigned, adj, table)?;
    flags.merge(repair_flags);
    Ok((connected, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ingest_flows, FilterPolicy, FlowRecord, Hospital, ServiceClass};

    fn roster(entries: &[(&str, &str)]) -> HospitalRoster {
        HospitalRoster::new(entries.iter().map(|(id, zone)| Hospital {
            id: id.to_string(),
            home_zone: zone.to_string(),
            is_general: true,
            admissions: 0,
        }))
        .unwrap()
    }

    fn table(roster: &HospitalRoster, records: &[(&str, &str, u64)]) -> FlowTable {
        let recs: Vec<_> = records
            .iter()
            .map(|(z, h, c)| {
                Ok(FlowRecord {
                    patient_zone: z.to_string(),
                    hospital: h.to_string(),
                    count: *c,
                    service_class: ServiceClass::General,
                })
            })
            .collect();
        ingest_flows(recs, roster, &FilterPolicy::default(), None).unwrap()
    }

    #[test]
    fn plurality_picks_largest_flow() {
        let r = roster(&[("hx", "x"), ("hy", "y")]);
        let t = table(
            &r,
            &[("z", "hx", 10), ("z", "hy", 5), ("x", "hx", 1), ("y", "hy", 1)],
        );
        let (p, flags) = plurality_assign(&t, &r, None, None).unwrap();
        assert_eq!(p.get("z"), p.get("x"));
        assert_ne!(p.get("z"), p.get("y"));
        assert!(flags.plurality_ties.is_empty());
    }

    #[test]
    fn plurality_tie_breaks_to_smaller_seed_and_flags() {
        let r = roster(&[("hx", "x"), ("hy", "y")]);
        let t = table(
            &r,
            &[("z", "hx", 7), ("z", "hy", 7), ("x", "hx", 1), ("y", "hy", 1)],
        );
        let (p, flags) = plurality_assign(&t, &r, None, None).unwrap();
        assert_eq!(p.get("z"), p.get("x")); // "x" < "y"
        assert_eq!(flags.plurality_ties, vec!["z".to_string()]);
    }

    #[test]
    fn zero_flow_zone_goes_to_nearest_seed() {
        let r = roster(&[("hx", "x"), ("hy", "y")]);
        let t = table(&r, &[("x", "hx", 1), ("y", "hy", 1)]);
        let universe: BTreeSet<ZoneId> =
            ["x", "y", "q"].iter().map(|s| s.to_string()).collect();
        let centroids: BTreeMap<ZoneId, (f64, f64)> = [
            ("x".to_string(), (0.0, 0.0)),
            ("y".to_string(), (10.0, 0.0)),
            ("q".to_string(), (2.0, 0.0)),
        ]
        .into_iter()
        .collect();
        let (p, flags) =
            plurality_assign(&t, &r, Some(&universe), Some(&centroids)).unwrap();
        assert_eq!(p.get("q"), p.get("x"));
        assert_eq!(flags.no_flow, vec!["q".to_string()]);
    }

    #[test]
    fn zero_flow_zone_without_centroid_errors() {
        let r = roster(&[("hx", "x")]);
        let t = table(&r, &[("x", "hx", 1)]);
        let universe: BTreeSet<ZoneId> = ["x", "q"].iter().map(|s| s.to_string()).collect();
        match plurality_assign(&t, &r, Some(&universe), None) {
            Err(Error::NoCentroidForZones { zones }) => {
                assert_eq!(zones, vec!["q".to_string()])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn plurality_is_row_order_invariant() {
        let r = roster(&[("hx", "x"), ("hy", "y")]);
        let t1 = table(&r, &[("z", "hx", 3), ("z", "hy", 9), ("x", "hx", 1), ("y", "hy", 1)]);
        let t2 = table(&r, &[("y", "hy", 1), ("z", "hy", 9), ("x", "hx", 1), ("z", "hx", 3)]);
        let (p1, _) = plurality_assign(&t1, &r, None, None).unwrap();
        let (p2, _) = plurality_assign(&t2, &r, None, None).unwrap();
        assert_eq!(p1, p2);
    }

    fn line_adjacency(zones: &[&str]) -> AdjacencyMap {
        let mut adj = AdjacencyMap::new();
        for pair in zones.windows(2) {
            adj.insert_pair(pair[0], pair[1]).unwrap();
        }
        adj
    }

    #[test]
    fn contiguous_partition_is_unchanged() {
        let r = roster(&[("ha", "a"), ("hc", "c")]);
        let t = table(&r, &[("a", "ha", 5), ("b", "ha", 5), ("c", "hc", 5)]);
        let adj = line_adjacency(&["a", "b", "c"]);
        let (p, _) = plurality_assign(&t, &r, None, None).unwrap();
        let (fixed, flags) = enforce_contiguity(&p, &adj, &t).unwrap();
        assert_eq!(fixed, p);
        assert!(flags.unresolved.is_empty());
    }

    #[test]
    fn enclave_moves_to_max_flow_adjacent_region() {
        // Zones a-b-c-d-e in a line. Region 0 = {a, b, d}, region 1 = {c, e}:
        // d is an enclave of region 0, surrounded by c and e of region 1.
        let r = roster(&[("ha", "a"), ("hc", "c")]);
        let t = table(
            &r,
            &[
                ("a", "ha", 9),
                ("b", "ha", 9),
                ("d", "ha", 5),
                ("d", "hc", 4),
                ("c", "hc", 9),
                ("e", "hc", 9),
            ],
        );
        let adj = line_adjacency(&["a", "b", "c", "d", "e"]);
        let (p, _) = plurality_assign(&t, &r, None, None).unwrap();
        assert_eq!(p.get("d"), p.get("a"));
        let (fixed, flags) = enforce_contiguity(&p, &adj, &t).unwrap();
        assert_eq!(fixed.get("d"), fixed.get("c"));
        assert!(flags.unresolved.is_empty());
        // BFS check: every region is connected.
        for zones in fixed.regions() {
            assert_eq!(region_components(&zones, &adj).len(), 1);
        }
    }

    #[test]
    fn island_zone_stays_and_is_flagged() {
        let r = roster(&[("ha", "a"), ("hc", "c")]);
        let t = table(
            &r,
            &[("a", "ha", 9), ("b", "ha", 9), ("c", "hc", 9), ("i", "ha", 2)],
        );
        let mut adj = line_adjacency(&["a", "b", "c"]);
        adj.insert_zone("i");
        let (p, _) = plurality_assign(&t, &r, None, None).unwrap();
        let before = p.get("i");
        let (fixed, flags) = enforce_contiguity(&p, &adj, &t).unwrap();
        assert_eq!(fixed.get("i"), before);
        assert_eq!(flags.islands, vec!["i".to_string()]);
    }

    #[test]
    fn repair_never_empties_regions() {
        let r = roster(&[("ha", "a"), ("hd", "d")]);
        let t = table(
            &r,
            &[("a", "ha", 9), ("b", "hd", 9), ("c", "ha", 9), ("d", "hd", 9)],
        );
        let adj = line_adjacency(&["a", "b", "c", "d"]);
        let (p, _) = plurality_assign(&t, &r, None, None).unwrap();
        let before = p.region_count();
        let (fixed, _) = enforce_contiguity(&p, &adj, &t).unwrap();
        assert!(fixed.region_count() <= before);
        assert!(fixed.region_count() >= 1);
        for zones in fixed.regions() {
            assert!(!zones.is_empty());
        }
    }
}
