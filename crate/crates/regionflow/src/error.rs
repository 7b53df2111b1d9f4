use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A record in an input stream could not be parsed. Indices are 1-based
    /// over data records (the header line is not counted).
    #[error("malformed record {index}: {message}")]
    MalformedRecord { index: usize, message: String },

    /// A roster-dependent filter flag was set but no roster was supplied.
    #[error("filter policy requires a hospital roster but the roster is empty")]
    MissingRoster,

    /// A hospital referenced by a flow row is absent from the roster.
    #[error("hospital {0} not present in roster")]
    UnknownHospital(String),

    /// A hospital's home zone falls outside the declared zone universe.
    #[error("hospital {hospital} home zone {zone} is outside the declared zone universe")]
    HospitalOutsideUniverse { hospital: String, zone: String },

    #[error("duplicate hospital id {0} in roster")]
    DuplicateHospital(String),

    /// The network has no nodes or no edge weight; modularity is undefined.
    #[error("network is empty or has zero total weight")]
    EmptyNetwork,

    /// A partition does not cover exactly the nodes of the network.
    #[error("partition covers {got} nodes but the network has {expected}")]
    PartitionSizeMismatch { expected: usize, got: usize },

    /// Labels are not dense 0..C-1 with every label used.
    #[error("partition labels are not dense: {0}")]
    InvalidLabels(String),

    #[error("unknown community label {0}")]
    UnknownCommunity(usize),

    /// move_gain was called on a node that is neither detached nor targeting
    /// its own community.
    #[error("node {0} must be detached before computing a cross-community gain")]
    NodeNotDetached(usize),

    #[error("node {0} is already detached")]
    AlreadyDetached(usize),

    #[error("level {level} out of range: dendrogram has {count} levels")]
    LevelOutOfRange { level: usize, count: usize },

    #[error("target region count {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    /// Zones referenced by the flow table but missing from a partition or an
    /// attribute set.
    #[error("{context}: zones not covered: {}", zones.join(", "))]
    ZonesNotCovered { context: String, zones: Vec<String> },

    /// Zero-flow zones that cannot be placed because centroid data is absent.
    #[error("no flow and no centroid data for zones: {}", zones.join(", "))]
    NoCentroidForZones { zones: Vec<String> },

    #[error("geometry error in zone {zone}: {message}")]
    BadGeometry { zone: String, message: String },

    #[error("compactness requires positive perimeter and area (got P={p}, A={a})")]
    NonPositiveGeometry { p: f64, a: f64 },

    #[error("total population is zero; weighted centroid is undefined")]
    ZeroPopulation,

    #[error("adjacency pair lists zone {0} as its own neighbor")]
    SelfAdjacency(String),

    /// Two partitions being compared do not share the same zone set.
    #[error("partitions cover different zones ({left} vs {right} zones)")]
    ZoneSetMismatch { left: usize, right: usize },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
