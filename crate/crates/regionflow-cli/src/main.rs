//! `regionflow` — delineate service regions from origin-destination flows.
//!
//! Subcommands: `detect` (multi-level modularity optimization), `cut`
//! (force an exact region count), `curve` (modularity per region count),
//! `baseline` (plurality rule plus contiguity repair), `evaluate` (the
//! nine region indices), and `synth` (planted test data).
//!
//! All runs are deterministic: a single `--seed` drives every random
//! choice and reruns with an identical config are byte-identical. Exit
//! codes: 0 success, 2 input or config error (with a JSON error object on
//! stderr), 1 internal failure.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Input/config problems exit 2; internal failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Input { code: String, message: String },
    Internal(String),
}

impl CliError {
    pub fn input(code: &str, message: impl Into<String>) -> Self {
        CliError::Input {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError::Internal(message.into())
    }
}

impl From<regionflow::Error> for CliError {
    fn from(err: regionflow::Error) -> Self {
        use regionflow::Error as E;
        let code = match &err {
            E::MalformedRecord { .. } | E::Csv(_) => "malformed_record",
            E::MissingRoster => "config",
            E::UnknownHospital(_) | E::DuplicateHospital(_) => "unknown_hospital",
            E::HospitalOutsideUniverse { .. } => "coverage_mismatch",
            E::EmptyNetwork => "empty_input",
            E::KOutOfRange { .. } => "k_out_of_range",
            E::LevelOutOfRange { .. } => "level_out_of_range",
            E::ZonesNotCovered { .. } | E::ZoneSetMismatch { .. } => "coverage_mismatch",
            E::NoCentroidForZones { .. } => "missing_centroids",
            E::BadGeometry { .. } | E::NonPositiveGeometry { .. } => "bad_geometry",
            E::ZeroPopulation => "bad_input",
            E::InvalidSpec(_) => "bad_spec",
            E::Io(_) => "io",
            E::Json(_) | E::InvalidInput(_) => "bad_input",
            E::PartitionSizeMismatch { .. }
            | E::InvalidLabels(_)
            | E::UnknownCommunity(_)
            | E::NodeNotDetached(_)
            | E::AlreadyDetached(_)
            | E::SelfAdjacency(_) => return CliError::Internal(err.to_string()),
        };
        CliError::input(code, err.to_string())
    }
}

#[derive(Parser)]
#[command(name = "regionflow", version, about = "Flow-based service region delineation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Inputs shared by every flow-consuming subcommand.
#[derive(Args, Clone)]
struct FlowInputs {
    /// Flow CSV: patient_zone,hospital_id,count,service_class
    #[arg(long)]
    flows: PathBuf,
    /// Roster CSV: hospital_id,home_zone,is_general,admissions
    #[arg(long)]
    roster: PathBuf,
    /// Zone attributes CSV: zone_id,population[,centroid_x,centroid_y];
    /// declares the zone universe
    #[arg(long)]
    attrs: Option<PathBuf>,
    /// Keep only specialized-care flows (referral-region mode)
    #[arg(long)]
    specialized: bool,
}

#[derive(Args, Clone)]
struct DetectOptions {
    /// Seed recorded in all outputs and driving any shuffling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node visit order
    #[arg(long, value_parser = ["sorted", "shuffle"], default_value = "sorted")]
    order: String,
    /// Minimum overall modularity improvement for recording a level
    #[arg(long, default_value_t = 1e-9)]
    min_gain: f64,
    /// Cap on recorded hierarchy levels
    #[arg(long)]
    max_levels: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect regions by multi-level modularity optimization
    Detect {
        #[command(flatten)]
        inputs: FlowInputs,
        #[command(flatten)]
        options: DetectOptions,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut the hierarchy to an exact region count
    Cut {
        #[command(flatten)]
        inputs: FlowInputs,
        #[command(flatten)]
        options: DetectOptions,
        /// Target region count
        #[arg(long)]
        k: usize,
        /// Reuse a dendrogram JSON artifact instead of re-detecting
        #[arg(long)]
        dendrogram: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace modularity across a range of region counts
    Curve {
        #[command(flatten)]
        inputs: FlowInputs,
        #[command(flatten)]
        options: DetectOptions,
        #[arg(long)]
        k_min: usize,
        #[arg(long)]
        k_max: usize,
        /// Restrict curve output to one format (default: both)
        #[arg(long, value_parser = ["csv", "json"])]
        format: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plurality-rule baseline with contiguity repair
    Baseline {
        #[command(flatten)]
        inputs: FlowInputs,
        /// Adjacency CSV: zone_a,zone_b
        #[arg(long)]
        adjacency: Option<PathBuf>,
        /// Zone geometry GeoJSON (rook adjacency is derived when no
        /// adjacency CSV is given)
        #[arg(long)]
        geoms: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a partition (or compare two) with the nine region indices
    Evaluate {
        /// Partition CSV: zone_id,region_id
        partition: PathBuf,
        /// Optional second partition for side-by-side comparison
        partition2: Option<PathBuf>,
        #[command(flatten)]
        inputs: FlowInputs,
        /// Zone geometry GeoJSON for compactness
        #[arg(long)]
        geoms: Option<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"])]
        format: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate planted-partition test data
    Synth {
        #[arg(long)]
        regions: usize,
        #[arg(long)]
        zones_per_region: usize,
        /// Mean admissions emitted per zone
        #[arg(long)]
        flow_mean: f64,
        /// Probability an admission leaves its home region
        #[arg(long)]
        leakage: f64,
        #[arg(long)]
        hospitals_per_region: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("REGIONFLOW_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect {
            inputs,
            options,
            out,
        } => commands::detect(&inputs, &options, &out),
        Command::Cut {
            inputs,
            options,
            k,
            dendrogram,
            out,
        } => commands::cut(&inputs, &options, k, dendrogram.as_deref(), &out),
        Command::Curve {
            inputs,
            options,
            k_min,
            k_max,
            format,
            out,
        } => commands::curve(&inputs, &options, k_min, k_max, format.as_deref(), &out),
        Command::Baseline {
            inputs,
            adjacency,
            geoms,
            seed,
            out,
        } => commands::baseline(&inputs, adjacency.as_deref(), geoms.as_deref(), seed, &out),
        Command::Evaluate {
            partition,
            partition2,
            inputs,
            geoms,
            format,
            seed,
            out,
        } => commands::evaluate(
            &partition,
            partition2.as_deref(),
            &inputs,
            geoms.as_deref(),
            format.as_deref(),
            seed,
            &out,
        ),
        Command::Synth {
            regions,
            zones_per_region,
            flow_mean,
            leakage,
            hospitals_per_region,
            seed,
            out,
        } => commands::synth(
            regions,
            zones_per_region,
            flow_mean,
            leakage,
            hospitals_per_region,
            seed,
            &out,
        ),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Input { code, message }) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": code, "message": message })
            );
            std::process::exit(2);
        }
        Err(CliError::Internal(message)) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": "internal", "message": message })
            );
            std::process::exit(1);
        }
    }
}
