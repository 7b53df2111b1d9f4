//! Subcommand implementations: load inputs, run the library, write
//! artifacts with provenance.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use regionflow::baseline::dartmouth_baseline;
use regionflow::baseline::AdjacencyMap;
use regionflow::flow::{
    filter_specialized, ingest_flows, read_flow_csv_path, FilterPolicy, FlowTable,
    HospitalRoster,
};
use regionflow::louvain::read_dendrogram_json;
use regionflow::metrics::{evaluate as evaluate_metrics, read_geojson_path, zone_adjacency};
use regionflow::synth::{generate, PlantedSpec};
use regionflow::zones::ZoneAttributes;
use regionflow::{
    build_network, cut_to_k, modularity_curve, run_louvain, Dendrogram, FlowNetwork,
    LouvainOptions, NodeOrder, ZonePartition,
};

use crate::config::{ArtifactWriter, RunConfig};
use crate::{CliError, DetectOptions, FlowInputs};

struct Loaded {
    table: FlowTable,
    roster: HospitalRoster,
    attrs: Option<ZoneAttributes>,
}

fn load(inputs: &FlowInputs) -> Result<Loaded, CliError> {
    let roster = HospitalRoster::read_csv_path(&inputs.roster)?;
    let attrs = inputs
        .attrs
        .as_deref()
        .map(ZoneAttributes::read_csv_path)
        .transpose()?;
    let universe = attrs.as_ref().map(|a| a.zones());
    if let Some(universe) = &universe {
        roster.validate_universe(universe)?;
    }
    let records = read_flow_csv_path(&inputs.flows)?;
    let table = ingest_flows(records, &roster, &FilterPolicy::default(), universe.as_ref())?;
    let table = if inputs.specialized {
        filter_specialized(&table)
    } else {
        table
    };
    if table.is_empty() {
        return Err(CliError::input(
            "empty_input",
            "no flow rows retained after filtering",
        ));
    }
    log::info!(
        "loaded {} flow rows ({} admissions), {} hospitals",
        table.len(),
        table.total_count(),
        roster.len()
    );
    Ok(Loaded {
        table,
        roster,
        attrs,
    })
}

fn louvain_options(options: &DetectOptions) -> LouvainOptions {
    LouvainOptions {
        order: match options.order.as_str() {
            "shuffle" => NodeOrder::SeededShuffle(options.seed),
            _ => NodeOrder::SortedId,
        },
        min_gain: options.min_gain,
        max_levels: options.max_levels,
    }
}

fn flow_config(config: &mut RunConfig, inputs: &FlowInputs) {
    config.arg("flows", inputs.flows.display().to_string());
    config.arg("roster", inputs.roster.display().to_string());
    config.arg_path("attrs", &inputs.attrs);
    config.arg("specialized", inputs.specialized);
}

fn detect_config(config: &mut RunConfig, options: &DetectOptions) {
    config.arg("order", options.order.clone());
    config.arg("min_gain", options.min_gain);
    config.arg(
        "max_levels",
        options
            .max_levels
            .map(|v| json!(v))
            .unwrap_or(Value::Null),
    );
}

/// Zone assignment of the coarsest level, or singletons when no level was
/// recorded (no merge ever improved modularity).
fn final_assignment(net: &FlowNetwork, dendrogram: &Dendrogram) -> ZonePartition {
    dendrogram.final_assignment().unwrap_or_else(|| {
        ZonePartition::from_map(
            net.zones()
                .iter()
                .enumerate()
                .map(|(i, z)| (z.clone(), i))
                .collect(),
        )
    })
}

pub fn detect(
    inputs: &FlowInputs,
    options: &DetectOptions,
    out: &Path,
) -> Result<(), CliError> {
    let loaded = load(inputs)?;
    let net = build_network(&loaded.table, &loaded.roster)?;
    let dendrogram = run_louvain(&net, &louvain_options(options))?;

    let mut config = RunConfig::new("detect", options.seed, out);
    flow_config(&mut config, inputs);
    detect_config(&mut config, options);
    let mut writer = ArtifactWriter::new(&config)?;
    writer.json("dendrogram.json", dendrogram.to_json_value())?;
    let assignment = final_assignment(&net, &dendrogram);
    writer.csv("partition.csv", |w| assignment.write_csv(w))?;
    writer.json("ingest_stats.json", loaded.table.stats().to_json())?;
    let mut log_text = format!(
        "command: detect\nseed: {}\nconfig_hash: {}\nzones: {}\ntotal_weight: {}\n",
        config.seed,
        config.hash(),
        net.node_count(),
        net.total_weight()
    );
    for (i, level) in dendrogram.levels().iter().enumerate() {
        let _ = writeln!(
            log_text,
            "level {i}: communities={} q={}",
            level.zone_partition.community_count(),
            level.q
        );
    }
    let _ = writeln!(log_text, "final_regions: {}", assignment.region_count());
    writer.text("detect.log", log_text)?;
    writer.finish()
}

pub fn cut(
    inputs: &FlowInputs,
    options: &DetectOptions,
    k: usize,
    dendrogram_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let loaded = load(inputs)?;
    let net = build_network(&loaded.table, &loaded.roster)?;
    let dendrogram = match dendrogram_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input("io", format!("read {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::input("bad_input", format!("{}: {e}", path.display())))?;
            let levels = read_dendrogram_json(&value)?;
            Dendrogram::from_zone_assignments(
                &net,
                levels.into_iter().map(|l| (l.assignment, l.q)).collect(),
            )?
        }
        None => run_louvain(&net, &louvain_options(options))?,
    };
    let cut = cut_to_k(&net, &dendrogram, k)?;
    let assignment = cut.partition.to_zone_partition(net.zones())?;

    let mut config = RunConfig::new("cut", options.seed, out);
    flow_config(&mut config, inputs);
    detect_config(&mut config, options);
    config.arg("k", k);
    config.arg_path("dendrogram", &dendrogram_path.map(|p| p.to_path_buf()));
    let mut writer = ArtifactWriter::new(&config)?;
    writer.csv("partition.csv", |w| assignment.write_csv(w))?;
    writer.json(
        "cut.json",
        json!({
            "k": cut.k,
            "q": cut.q,
            "provenance": cut.provenance.as_str(),
        }),
    )?;
    writer.json("ingest_stats.json", loaded.table.stats().to_json())?;
    writer.finish()
}

pub fn curve(
    inputs: &FlowInputs,
    options: &DetectOptions,
    k_min: usize,
    k_max: usize,
    format: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let loaded = load(inputs)?;
    let net = build_network(&loaded.table, &loaded.roster)?;
    let dendrogram = run_louvain(&net, &louvain_options(options))?;
    let curve = modularity_curve(&net, &dendrogram, k_min, k_max)?;

    let mut config = RunConfig::new("curve", options.seed, out);
    flow_config(&mut config, inputs);
    detect_config(&mut config, options);
    config.arg("k_min", k_min);
    config.arg("k_max", k_max);
    let mut writer = ArtifactWriter::new(&config)?;
    if format != Some("json") {
        writer.csv("curve.csv", |w| curve.write_csv(w))?;
    }
    if format != Some("csv") {
        writer.json("curve.json", curve.to_json_value())?;
    }
    writer.json("ingest_stats.json", loaded.table.stats().to_json())?;
    writer.finish()
}

pub fn baseline(
    inputs: &FlowInputs,
    adjacency_path: Option<&Path>,
    geoms_path: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let loaded = load(inputs)?;
    let adjacency = match (adjacency_path, geoms_path) {
        (Some(path), _) => AdjacencyMap::read_csv_path(path)?,
        (None, Some(path)) => zone_adjacency(&read_geojson_path(path)?)?,
        (None, None) => {
            return Err(CliError::input(
                "config",
                "baseline requires --adjacency or --geoms",
            ))
        }
    };
    let universe = loaded.attrs.as_ref().map(|a| a.zones());
    let centroids = loaded.attrs.as_ref().map(|a| a.centroids());
    let (partition, flags) = dartmouth_baseline(
        &loaded.table,
        &loaded.roster,
        &adjacency,
        universe.as_ref(),
        centroids.as_ref(),
    )?;

    let mut config = RunConfig::new("baseline", seed, out);
    flow_config(&mut config, inputs);
    config.arg_path("adjacency", &adjacency_path.map(|p| p.to_path_buf()));
    config.arg_path("geoms", &geoms_path.map(|p| p.to_path_buf()));
    let mut writer = ArtifactWriter::new(&config)?;
    writer.csv("partition.csv", |w| partition.write_csv(w))?;
    writer.json("flags.json", flags.to_json())?;
    writer.json("ingest_stats.json", loaded.table.stats().to_json())?;
    writer.finish()
}

fn report_csv_name(index: usize) -> &'static str {
    if index == 0 {
        "report.csv"
    } else {
        "report2.csv"
    }
}

fn report_json_name(index: usize) -> &'static str {
    if index == 0 {
        "report.json"
    } else {
        "report2.json"
    }
}

pub fn evaluate(
    partition_path: &Path,
    partition2_path: Option<&Path>,
    inputs: &FlowInputs,
    geoms_path: Option<&Path>,
    format: Option<&str>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let loaded = load(inputs)?;
    let geometries = geoms_path.map(read_geojson_path).transpose()?;
    let mut partitions = vec![ZonePartition::read_csv_path(partition_path)?];
    if let Some(path) = partition2_path {
        partitions.push(ZonePartition::read_csv_path(path)?);
    }

    let mut config = RunConfig::new("evaluate", seed, out);
    flow_config(&mut config, inputs);
    config.arg("partition", partition_path.display().to_string());
    config.arg_path("partition2", &partition2_path.map(|p| p.to_path_buf()));
    config.arg_path("geoms", &geoms_path.map(|p| p.to_path_buf()));
    let mut writer = ArtifactWriter::new(&config)?;

    let mut reports = Vec::new();
    for (i, partition) in partitions.iter().enumerate() {
        let report = evaluate_metrics(
            &loaded.table,
            partition,
            &loaded.roster,
            geometries.as_deref(),
            loaded.attrs.as_ref(),
        )?;
        if format != Some("csv") {
            writer.json(report_json_name(i), report.to_json_value())?;
        }
        if format != Some("json") {
            writer.csv(report_csv_name(i), |w| report.write_csv(w))?;
        }
        reports.push(report);
    }
    if reports.len() == 2 {
        // Paired summaries, one row per index.
        let keys: std::collections::BTreeSet<String> = reports
            .iter()
            .flat_map(|r| r.summary.keys().cloned())
            .collect();
        writer.csv("compare.csv", |w| {
            use std::io::Write;
            writeln!(
                w,
                "metric,mean_a,sd_a,min_a,max_a,defined_a,excluded_a,\
                 mean_b,sd_b,min_b,max_b,defined_b,excluded_b"
            )?;
            for key in &keys {
                let mut row = key.clone();
                for report in &reports {
                    match report.summary.get(key) {
                        Some(s) => {
                            let _ = write!(
                                row,
                                ",{},{},{},{},{},{}",
                                s.mean, s.sd, s.min, s.max, s.defined, s.excluded
                            );
                        }
                        None => row.push_str(",,,,,,"),
                    }
                }
                writeln!(w, "{row}")?;
            }
            Ok(())
        })?;
    }
    writer.json("ingest_stats.json", loaded.table.stats().to_json())?;
    writer.finish()
}

pub fn synth(
    regions: usize,
    zones_per_region: usize,
    flow_mean: f64,
    leakage: f64,
    hospitals_per_region: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let spec = PlantedSpec {
        regions,
        zones_per_region,
        flow_mean,
        leakage,
        hospitals_per_region,
        seed,
    };
    let data = generate(&spec)?;

    let mut config = RunConfig::new("synth", seed, out);
    config.arg("regions", regions);
    config.arg("zones_per_region", zones_per_region);
    config.arg("flow_mean", flow_mean);
    config.arg("leakage", leakage);
    config.arg("hospitals_per_region", hospitals_per_region);
    let mut writer = ArtifactWriter::new(&config)?;
    writer.csv("flows.csv", |w| {
        use std::io::Write;
        writeln!(w, "patient_zone,hospital_id,count,service_class")?;
        for record in &data.records {
            writeln!(
                w,
                "{},{},{},{}",
                record.patient_zone, record.hospital, record.count, record.service_class
            )?;
        }
        Ok(())
    })?;
    writer.csv("roster.csv", |w| data.roster.write_csv(w))?;
    writer.csv("attrs.csv", |w| data.attrs.write_csv(w))?;
    writer.csv("truth.csv", |w| data.truth.write_csv(w))?;
    writer.finish()
}
