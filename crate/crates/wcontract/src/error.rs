use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 8 nodes, got {0}")]
    Size(usize),
    #[error("invalid domain [{0}, {1}]")]
    Domain(f64, f64),
    #[error("potential is not finite at node {node} (x = {x})")]
    NonFinitePotential { node: usize, x: f64 },
    #[error("drift too large at node {node} (x = {x}): rate {rate} would be negative; refine the grid")]
    Stability { node: usize, x: f64, rate: f64 },
    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid density: {0}")]
    Density(String),
    #[error("empty test-function family")]
    EmptyFamily,
    #[error("every test function has Γ(f) below the threshold; R* undefined")]
    UndefinedR,
    #[error("inconsistent generator: symmetrization residual {0:e}")]
    InconsistentGenerator(f64),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("times are not sorted")]
    UnsortedTimes,
    #[error("s_r out of the monotone branch: sqrt(r)*x = {0} >= pi ({1})")]
    OutOfBranch(f64, String),
    #[error("{0} requires a {1} grid")]
    WrongMethod(&'static str, &'static str),
    #[error("LP oracle limited to n <= {max}, got {n}")]
    Scale { n: usize, max: usize },
    #[error("LP solver failed: {0}")]
    Lp(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("s = {s} violates s * ||L^g f|| < 1 (bound 1/N = {bound})")]
    Positivity { s: f64, bound: f64 },
    #[error("trajectory left the bound {bound} at t = {t}")]
    Divergence { t: f64, bound: f64 },
    #[error("geodesic interpolant is degenerate: {0}")]
    Rebinning(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
