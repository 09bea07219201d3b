use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parity undeclared for a field on reflecting axis {axis}")]
    ParityUndeclared { axis: usize },

    #[error("metric not positive definite at node {node} (t = {time})")]
    Positivity { node: usize, time: f64 },

    #[error("linear solve did not converge in {iterations} iterations (residual {residual:.3e}, parabolicity lambda {lambda:.4})")]
    Stiffness { iterations: usize, residual: f64, lambda: f64 },

    #[error("diffeomorphism degenerated at node {node} (t = {time}, det = {det:.3e})")]
    GaugeDegeneration { node: usize, time: f64, det: f64 },

    #[error("map inversion did not converge at node {node}")]
    Inversion { node: usize },

    #[error("unsupported dimension {dim} for {what}")]
    UnsupportedDimension { dim: usize, what: &'static str },

    #[error("unsupported background mode for {0}")]
    UnsupportedMode(&'static str),

    #[error("time window [{t1}, {t2}] is shorter than one time step")]
    Window { t1: f64, t2: f64 },

    #[error("only {levels} dyadic levels resolvable, need at least 2")]
    DyadicLevels { levels: usize },

    #[error("mixed component g0{component} = {value:.3e} on mirror slice {slice}, reflection ill-posed")]
    IllPosedReflection { slice: usize, component: usize, value: f64 },

    #[error("trajectory not reflection symmetric (residual {0:.3e})")]
    Asymmetric(f64),

    #[error("slice {0} is not a mirror slice normal to axis 0")]
    Slice(usize),

    #[error("warp degenerated: phi <= 0 at interior cell {cell} (t = {time})")]
    WarpDegenerate { cell: usize, time: f64 },

    #[error("reduced right-hand side failed its oracle check: {0}")]
    OracleGate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed metric file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ParityUndeclared { .. } | Error::Format(_) => 2,
            _ => 1,
        }
    }
}
