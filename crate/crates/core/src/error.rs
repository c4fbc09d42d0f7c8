use thiserror::Error;

/// Errors raised while building or simulating photonic circuits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate beam id `{0}`")]
    DuplicateBeam(String),

    #[error("beam `{0}` is not registered")]
    UnknownBeam(String),

    #[error("mode {beam}/{pol}{bin} is not registered")]
    UnknownMode {
        beam: String,
        pol: String,
        bin: String,
    },

    #[error("logical amplitudes are not normalized: sum |a|^2 = {0}")]
    NotNormalized(f64),

    #[error("expected {expected} logical amplitudes, got {got}")]
    AmplitudeCount { expected: usize, got: usize },

    #[error("states belong to different mode registries")]
    RegistryMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("reflectivity {0} outside [0, 1]")]
    InvalidReflectivity(f64),

    #[error("beam-splitter ports must be distinct (got `{0}` twice)")]
    SamePort(String),

    #[error("route is not a permutation of beams: {0}")]
    InvalidRoute(String),

    #[error("elements in one parallel layer both act on beam `{0}`")]
    LayerClash(String),

    #[error("control beam `{beam}` holds {photons} photons; a controlled flip needs exactly one")]
    ControlPhotonCount { beam: String, photons: usize },

    #[error("mode sets in a post-selection rule overlap on mode {0}")]
    OverlappingRule(usize),

    #[error("detector outcome {0} has nonzero probability but no feed-forward entry")]
    MissingOutcome(String),

    #[error("source modes on beam `{0}` are already occupied")]
    OccupiedSource(String),

    #[error("time-bin operation `{0}` requires a time-resolved registry")]
    NotTimeResolved(String),

    #[error("invalid time-bin configuration: {0}")]
    InvalidTimeBinConfig(String),

    #[error("input carries {got} photons, circuit declares {expected}")]
    PhotonCount { expected: usize, got: usize },

    #[error("unknown checkpoint `{0}`")]
    UnknownCheckpoint(String),

    #[error("circuit has no stages")]
    EmptyCircuit,

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("accepted output leaks {amount:.3e} outside the logical subspace for input `{input}`")]
    Leakage { input: String, amount: f64 },

    #[error("process map is identically zero")]
    ZeroMap,

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("unknown optimization problem `{0}`")]
    UnknownProblem(String),

    #[error("tomography inconsistency {0:.3e} on superposition inputs")]
    Tomography(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
