use thiserror::Error;

/// Errors raised by model construction, discretization and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("supremum diverges: {0}")]
    DivergentSupremum(String),
    #[error("bound re-verification failed at s = {s}: lhs {lhs} > rhs {rhs}")]
    BoundViolated { s: f64, lhs: f64, rhs: f64 },
    #[error("negative source entry {value} at index {index}")]
    NegativeSource { index: usize, value: f64 },
    #[error("sublevel set {{rho < d0}} is unbounded (rho_inf = {rho_inf}, d0 = {d0})")]
    UnboundedSublevel { rho_inf: f64, d0: f64 },
    #[error("singular linear system at row {0}")]
    SingularSystem(usize),
    #[error("grid of {cells} cells ({bytes} bytes) could not be allocated")]
    Allocation { cells: usize, bytes: usize },
    #[error("support of radius {radius} around {center:?} leaves the box of half-width {half_width}")]
    SupportOverflow {
        center: [f64; 3],
        radius: f64,
        half_width: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no mountain-pass geometry detected: ridge height {ridge} does not exceed endpoint level {endpoints}")]
    NoMountainPass { ridge: f64, endpoints: f64 },
    #[error("truncation radius {radius} exceeds grid radius {r_max}")]
    TruncationOutsideGrid { radius: f64, r_max: f64 },
    #[error("overlapping bumps: N^3 = {spacing} <= 2 R0 = {diameter}")]
    OverlappingBumps { spacing: f64, diameter: f64 },
    #[error("{0}")]
    Precondition(String),
    #[error("table parse error: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
