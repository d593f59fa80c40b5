use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A data row failed validation. `row` is the 1-based data row (header excluded).
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("variance incompatible with beta support (m = {m}, v = {v}, limit m(1-m) = {limit})")]
    IncompatibleVariance { m: f64, v: f64, limit: f64 },

    #[error("fit failed at level x = {level}: {source}")]
    LevelFit {
        level: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("target MARE {r_tilde} is infeasible: maximum feasible MARE is {r_max} (binding input x = {binding_x})")]
    Infeasible {
        r_tilde: f64,
        r_max: f64,
        binding_x: f64,
    },

    #[error("solver failed at level x = {level}: {msg}")]
    Solver { level: f64, msg: String },

    #[error("model is not stationary")]
    NonStationary,

    #[error("no ARMA candidate could be fitted")]
    NoArmaCandidate,
}
