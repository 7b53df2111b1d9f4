//! Delineation of service regions (such as hospital service areas) from
//! origin-destination flow data.
//!
//! The pipeline is: aggregate raw patient-to-hospital flow records into a
//! [`flow::FlowTable`], symmetrize them into a weighted [`flow::FlowNetwork`],
//! optimize modularity with the multi-level algorithm in [`louvain`], cut the
//! recorded hierarchy to any target region count with [`scale`], and score any
//! zone-to-region assignment with the indices in [`metrics`]. A plurality-rule
//! baseline ([`baseline`]) and a planted-partition generator ([`synth`]) round
//! out the toolkit for comparison studies.
//!
//! All algorithms are deterministic: node visit order is either sorted by id
//! or driven by an explicit seed, and no code path reads the clock or OS
//! entropy.

pub mod baseline;
pub mod compare;
pub mod error;
pub mod flow;
pub mod louvain;
pub mod metrics;
pub mod partition;
pub mod scale;
pub mod synth;
pub mod zones;

pub use error::{Error, Result};
pub use flow::{
    build_network, filter_specialized, ingest_flows, FilterPolicy, FlowNetwork, FlowRecord,
    FlowTable, Hospital, HospitalRoster, IngestStats, ServiceClass,
};
pub use louvain::{
    aggregate, modularity, phase_one, run_louvain, CommunityState, Dendrogram, LouvainOptions,
    NodeOrder,
};
pub use partition::{Partition, ZonePartition};
pub use scale::{cut_at_level, cut_to_k, modularity_curve, CutProvenance, ModularityCurve, ScaleCut};
pub use zones::{ZoneAttributes, ZoneId};
