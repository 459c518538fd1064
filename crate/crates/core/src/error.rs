use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("symbol index {index} out of range for a system with {k} maps")]
    OutOfRangeSymbol { index: usize, k: usize },
    #[error("non-finite point {0:?}")]
    NonFinitePoint(Vec<f64>),
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("derivative requested at piecewise breakpoint {0}")]
    AtBreakpoint(f64),
    #[error("no closed-form bound available for map family {0}")]
    UnsupportedFamily(&'static str),
    #[error("degenerate sampling domain: {0}")]
    DegenerateDomain(String),
    #[error("probability of symbol {symbol} vanished at {point:?}")]
    ProbabilityFloor { symbol: usize, point: Vec<f64> },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("empirical measure is empty")]
    EmptyMeasure,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("orbit became non-finite at step {step}")]
    NonFiniteOrbit { step: usize },
    #[error("trajectory has {got} steps, need at least {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("need at least {needed} trajectories of equal length, got {got}")]
    TooFewTrajectories { needed: usize, got: usize },
    #[error("Lyapunov exponent {0} is not negative")]
    NonNegativeLyapunov(f64),
    #[error("only {0} radii survived the mass window, need at least 3")]
    InsufficientRange(usize),
    #[error("every center was discarded ({0} tried)")]
    AllCentersDiscarded(usize),
    #[error("word enumeration needs {needed} words, cap is {cap}")]
    BudgetExceeded { needed: u128, cap: u128 },
    #[error("open set condition violated: {0}")]
    OscViolated(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("degenerate open set: {0}")]
    DegenerateSet(String),
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("length mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid probability field: {0}")]
    InvalidProbabilityField(String),
    #[error("invalid word: {0}")]
    InvalidWord(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("snapshot format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
