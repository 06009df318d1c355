use crate::domain::Phase;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid cluster profile: {0}")]
    InvalidCluster(String),

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("truncated log: {0}")]
    TruncatedLog(String),

    #[error("insufficient data: {needed} samples required, {got} available")]
    InsufficientData { needed: usize, got: usize },

    #[error("singular design matrix; collinear columns: {}", columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("phase {phase} has {got} samples, at least {needed} required")]
    UnderSampledPhase {
        phase: Phase,
        got: usize,
        needed: usize,
    },

    #[error("no sample file for phase {phase} at {path}")]
    MissingSamples { phase: Phase, path: String },

    #[error("phase model set has no model for {0}")]
    MissingPhaseModel(Phase),

    #[error("missing custom {0} time: supply a measured total or per-record rates")]
    MissingCustomTime(&'static str),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("simulation failed at benchmark point {point}: {source}")]
    Simulation {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
