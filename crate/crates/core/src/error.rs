use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index order violated: m = {m} < n = {n}")]
    IndexOrder { m: usize, n: usize },

    #[error("coefficient A({index}) is outside the declared range 0..={max}")]
    OutOfRange { index: usize, max: usize },

    #[error("projection family is not compatible with the system at n = {n} (defect {defect:e})")]
    IncompatibleProjection { n: usize, defect: f64 },

    #[error("degenerate range: {0}")]
    DegenerateRange(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("invalid projection: {0}")]
    InvalidProjection(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("numerical overflow in dense evolution product at ({m}, {n})")]
    Overflow { m: usize, n: usize },

    #[error("no feasible (alpha, beta) pair: {0}")]
    EmptyFeasibleSet(String),

    #[error("schedule out of range: {0}")]
    ScheduleOutOfRange(String),

    #[error("decay certificate rate {alpha} does not exceed summation rate d = {d}")]
    NoDecayCertificate { alpha: f64, d: f64 },

    #[error("summation rate d = {d} must be strictly below alpha = {alpha}")]
    DecayGap { alpha: f64, d: f64 },

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("parameter `{name}` = {value} outside admissible range {range}")]
    ParamOutOfRange {
        name: String,
        value: f64,
        range: String,
    },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
}

impl Error {
    /// Stable variant name, used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::IndexOrder { .. } => "IndexOrder",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::IncompatibleProjection { .. } => "IncompatibleProjection",
            Error::DegenerateRange(_) => "DegenerateRange",
            Error::InvalidCertificate(_) => "InvalidCertificate",
            Error::InvalidProjection(_) => "InvalidProjection",
            Error::InvalidSystem(_) => "InvalidSystem",
            Error::Overflow { .. } => "Overflow",
            Error::EmptyFeasibleSet(_) => "EmptyFeasibleSet",
            Error::ScheduleOutOfRange(_) => "ScheduleOutOfRange",
            Error::NoDecayCertificate { .. } => "NoDecayCertificate",
            Error::DecayGap { .. } => "DecayGap",
            Error::InvalidConstants(_) => "InvalidConstants",
            Error::UnknownExample(_) => "UnknownExample",
            Error::ParamOutOfRange { .. } => "ParamOutOfRange",
            Error::InvalidWindow(_) => "InvalidWindow",
            Error::EmptyGrid(_) => "EmptyGrid",
            Error::Config { .. } => "Config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
