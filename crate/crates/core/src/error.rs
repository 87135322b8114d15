use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shift q = {q} out of range 0..={max}")]
    ShiftOutOfRange { q: i64, max: i64 },

    #[error("level {level}: no conflict-free break point for town [{start}, {end}] within the perturbation budget")]
    PerturbationExhausted { level: usize, start: String, end: String },

    #[error("level {level}: plug solution in hole ({left}, {right}) violates ordering: {detail}")]
    PlugOrdering { level: usize, left: String, right: String, detail: String },

    #[error("singular linear system")]
    SingularSystem,

    #[error("level {level}: degenerate gap at break point {p} (rho = {rho})")]
    DegenerateGap { level: usize, p: String, rho: String },

    #[error("level {level}: shifted break point {point} (from p = {p}, q = {q}) is not covered after plugging")]
    UncoveredCopy { level: usize, p: String, q: i64, point: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("level {level}: {cubes} cubes exceed the limit of {limit}")]
    CubeLimit { level: usize, cubes: u128, limit: u128 },

    #[error("build psi deeper: {0}")]
    BuildDeeper(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
