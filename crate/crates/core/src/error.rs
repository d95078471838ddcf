use thiserror::Error;

/// Every failure the library reports.
///
/// Variants map one-to-one onto the machine-readable codes printed by the
/// command-line front end (see [`Error::code`]).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("value range {range:?} escapes trusted domain {domain:?} ({context})")]
    DomainEscape {
        context: String,
        range: [f64; 2],
        domain: [f64; 2],
    },
    #[error("orbit left the trusted domain at depth {depth} of word {word}")]
    WordEscape { word: String, depth: usize },
    #[error("Newton iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("rescaling mu = {mu} outside (0, 1)")]
    DegenerateScaling { mu: f64 },
    #[error("normalization violated: {0}")]
    NormalizationFailure(String),
    #[error("invalid degree schedule: {0}")]
    InvalidSchedule(String),
    #[error("solve failed at degree {degree}: {source}")]
    AtDegree {
        degree: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("no root of y + s(X, x) in bracket [{lo}, {hi}] for (x, y) = ({x}, {y})")]
    NoRoot { x: f64, y: f64, lo: f64, hi: f64 },
    #[error("twist derivative s_1 = {value} too small at ({x}, {xx})")]
    SingularTwist { x: f64, xx: f64, value: f64 },
    #[error("no fixed point of F on the symmetry line inside the trusted domain")]
    NoSymmetricFixedPoint,
    #[error("ambiguous symmetric fixed point; candidates include {candidates:?}")]
    AmbiguousFixedPoint { candidates: Vec<f64> },
    #[error("nesting violated: {0}")]
    NestingViolation(String),
    #[error("box image map is not a permutation: {0}")]
    NotPermutation(String),
    #[error("odometer permutation is not a single cycle (cycle lengths {0:?})")]
    NotSingleCycle(Vec<usize>),
    #[error("degenerate curve parametrization at segment {0}")]
    DegenerateParam(usize),
    #[error("identity {name} violated: lhs = {lhs}, rhs = {rhs}")]
    ChainViolation { name: String, lhs: f64, rhs: f64 },
    #[error("twist violation: dX/dy = {value} >= 0 at ({x}, {y})")]
    TwistViolation { x: f64, y: f64, value: f64 },
    #[error("image direction escapes the horizontal cone: angle {angle} rad, half-angle {half_angle} rad")]
    ConeEscape { angle: f64, half_angle: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable identifier for scripted consumers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DomainEscape { .. } => "DomainEscape",
            Error::WordEscape { .. } => "DomainEscape",
            Error::NoConvergence(_) => "NoConvergence",
            Error::SingularJacobian(_) => "SingularJacobian",
            Error::DegenerateScaling { .. } => "DegenerateScaling",
            Error::NormalizationFailure(_) => "NormalizationFailure",
            Error::InvalidSchedule(_) => "InvalidSchedule",
            Error::AtDegree { source, .. } => source.code(),
            Error::NoRoot { .. } => "NoRoot",
            Error::SingularTwist { .. } => "SingularTwist",
            Error::NoSymmetricFixedPoint => "NoSymmetricFixedPoint",
            Error::AmbiguousFixedPoint { .. } => "AmbiguousFixedPoint",
            Error::NestingViolation(_) => "NestingViolation",
            Error::NotPermutation(_) => "NotPermutation",
            Error::NotSingleCycle(_) => "NotSingleCycle",
            Error::DegenerateParam(_) => "DegenerateParam",
            Error::ChainViolation { .. } => "ChainViolation",
            Error::TwistViolation { .. } => "TwistViolation",
            Error::ConeEscape { .. } => "ConeEscape",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
