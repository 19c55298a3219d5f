use thiserror::Error;

/// A lattice node at which a certified quantity failed to be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationNode {
    /// Time coordinate of the node.
    pub t: f64,
    /// Radial coordinate |x - x0| of the node.
    pub rho: f64,
    /// Name of the offending coefficient function ("F1", "F2" or "G").
    pub which: &'static str,
    /// Value attained there.
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("coupling c = {c} too large for radii (R0, R1) = ({r0}, {r1}); must be below {critical}")]
    CouplingTooLarge { c: f64, r0: f64, r1: f64, critical: f64 },

    #[error("admissible time window is empty: lower bound {lower} meets upper bound {upper}")]
    EmptyTimeWindow { lower: f64, upper: f64 },

    #[error("invalid weight parameters: {0}")]
    InvalidWeightParams(String),

    #[error("weight exponent {exponent:.3} exceeds evaluation cap {cap} at t = {t}, lambda = {lambda}; lower lambda or shift the weight")]
    Saturation { exponent: f64, cap: f64, t: f64, lambda: f64 },

    #[error("positivity certification failed for every (beta, lambda) on the ladder; worst violation {}(t = {:.6}, rho = {:.6}) = {:.6e} and {} more nodes", worst.which, worst.t, worst.rho, worst.value, count - 1)]
    CertificationFailed { worst: ViolationNode, count: usize },

    #[error("time step {dt} violates the stability bound {limit} for this grid")]
    CflViolation { dt: f64, limit: f64 },

    #[error("solution became non-finite at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("initial data length {got} does not match grid ({want} nodes)")]
    DataShapeMismatch { got: usize, want: usize },

    #[error("cutoff window support reaches the grid boundary; shrink the window or refine")]
    CutoffTouchesBoundary,

    #[error("matrix field is not symmetric at t = {t}, x = ({x0}, {x1})")]
    AsymmetricMatrix { t: f64, x0: f64, x1: f64 },

    #[error("a valid positivity certificate is required: {0}")]
    MissingCertificate(String),

    #[error("observability violation: terminal norm {lhs:.6e} is positive while every observed term vanished")]
    ObservabilityViolation { lhs: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
