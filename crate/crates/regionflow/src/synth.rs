//! Seed-deterministic planted-partition flow generator.
//!
//! Stands in for restricted admission data: each zone emits a Poisson
//! number of admissions, each going to a hospital of its own region with
//! probability `1 - leakage`, otherwise to a hospital of a uniformly random
//! other region.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{FlowRecord, Hospital, HospitalRoster, ServiceClass};
use crate::partition::ZonePartition;
use crate::zones::{ZoneAttribute, ZoneAttributes, ZoneId};

/// Parameters of the planted instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub regions: usize,
    pub zones_per_region: usize,
    /// Mean admissions emitted per zone.
    pub flow_mean: f64,
    /// Probability that an admission leaves its home region.
    pub leakage: f64,
    pub hospitals_per_region: usize,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.regions * self.zones_per_region < 2 {
            return Err(Error::InvalidSpec(
                "need at least two zones in total".into(),
            ));
        }
        if !self.flow_mean.is_finite() || self.flow_mean <= 0.0 {
            return Err(Error::InvalidSpec("flow_mean must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.leakage) {
            return Err(Error::InvalidSpec("leakage must be in [0, 1)".into()));
        }
        if self.hospitals_per_region < 1 {
            return Err(Error::InvalidSpec(
                "need at least one hospital per region".into(),
            ));
        }
        Ok(())
    }
}

/// Everything the generator produces.
#[derive(Debug, Clone)]
pub struct PlantedData {
    /// Aggregated flow records (one per zone-hospital pair with flow).
    pub records: Vec<FlowRecord>,
    pub roster: HospitalRoster,
    pub attrs: ZoneAttributes,
    /// The planted zone-to-region truth.
    pub truth: ZonePartition,
}

impl PlantedData {
    pub fn total_admissions(&self) -> u64 {
        self.records.iter().map(|r| r.count).sum()
    }
}

fn zone_name(index: usize) -> ZoneId {
    format!("z{index:05}")
}

fn hospital_name(index: usize) -> String {
    format!("h{index:05}")
}

/// Knuth's product-of-uniforms Poisson sampler; exact for the moderate
/// means used here and stable across releases.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let threshold = (-mean).exp();
    let mut k = 0u64;
    let mut product = 1.0;
    loop {
        product *= rng.random::<f64>();
        if product <= threshold {
            return k;
        }
        k += 1;
    }
}

/// Generate a planted instance. Identical specs produce identical data.
pub fn generate(spec: &PlantedSpec) -> Result<PlantedData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let regions = spec.regions;
    let zones_per_region = spec.zones_per_region;
    let hospitals_per_region = spec.hospitals_per_region;
    let zone_count = regions * zones_per_region;

    // Hospitals sit in their region's zones round-robin.
    let mut hospitals = Vec::with_capacity(regions * hospitals_per_region);
    for region in 0..regions {
        for h in 0..hospitals_per_region {
            let zone_in_region = h % zones_per_region;
            hospitals.push(Hospital {
                id: hospital_name(region * hospitals_per_region + h),
                home_zone: zone_name(region * zones_per_region + zone_in_region),
                is_general: true,
                admissions: 0,
            });
        }
    }

    // Region centers on a coarse grid; zones jitter around their center.
    let grid = (regions as f64).sqrt().ceil() as usize;
    let mut attrs_rows = Vec::with_capacity(zone_count);
    let mut truth = BTreeMap::new();
    for region in 0..regions {
        let cx = (region % grid) as f64 * 100.0;
        let cy = (region / grid) as f64 * 100.0;
        for z in 0..zones_per_region {
            let zone_index = region * zones_per_region + z;
            let zone = zone_name(zone_index);
            let dx = rng.random::<f64>() * 60.0 - 30.0;
            let dy = rng.random::<f64>() * 60.0 - 30.0;
            let population = 200.0 + (rng.random::<f64>() * 4800.0).floor();
            attrs_rows.push(ZoneAttribute {
                zone: zone.clone(),
                population,
                centroid: Some((cx + dx, cy + dy)),
            });
            truth.insert(zone, region);
        }
    }

    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for zone_index in 0..zone_count {
        let region = zone_index / zones_per_region;
        let admissions = poisson(&mut rng, spec.flow_mean);
        for _ in 0..admissions {
            let target_region = if regions > 1 && rng.random::<f64>() < spec.leakage {
                // Uniform other region.
                let mut r = rng.random_range(0..regions - 1);
                if r >= region {
                    r += 1;
                }
                r
            } else {
                region
            };
            let h = rng.random_range(0..hospitals_per_region);
            let hospital = target_region * hospitals_per_region + h;
            *counts.entry((zone_index, hospital)).or_insert(0) += 1;
        }
    }

    let mut received: BTreeMap<usize, u64> = BTreeMap::new();
    let mut records = Vec::with_capacity(counts.len());
    for (&(zone_index, hospital), &count) in &counts {
        *received.entry(hospital).or_insert(0) += count;
        records.push(FlowRecord {
            patient_zone: zone_name(zone_index),
            hospital: hospital_name(hospital),
            count,
            service_class: ServiceClass::General,
        });
    }
    for (i, hospital) in hospitals.iter_mut().enumerate() {
        hospital.admissions = received.get(&i).copied().unwrap_or(0);
    }

    Ok(PlantedData {
        records,
        roster: HospitalRoster::new(hospitals)?,
        attrs: ZoneAttributes::new(attrs_rows),
        truth: ZonePartition::from_map(truth),
    })
}
