use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} is not a real literal")]
    NonLiteralExponent { offset: usize },

    #[error("variable `{0}` is not bound")]
    UnboundVariable(&'static str),
    #[error("binding has zb != conj(z)")]
    InconsistentBinding,
    #[error("division by a value with modulus below 1e-300")]
    DivisionNearZero,
    #[error("expression produced a non-finite value")]
    NonFinite,
    #[error("expression mixes Heisenberg variables with foliation parameters")]
    VariableMismatch,

    #[error("tangent is not legendrian (residual {residual:e})")]
    NonLegendrianTangent { residual: f64 },
    #[error("quadratic differential is not real-positive along the leaf (q(γ') = {re:e} + {im:e}i)")]
    NegativeQ { re: f64, im: f64 },
    #[error("foliation velocity ∂sΦ₁ vanishes at s = {s}, p = ({p1}, {p2})")]
    ZeroVelocity { s: f64, p1: f64, p2: f64 },
    #[error("foliation is not legendrian (max residual {residual:e})")]
    NotLegendrian { residual: f64 },
    #[error("density factor f is not positive at s = {s}, p = ({p1}, {p2})")]
    NonPositiveFactor { s: f64, p1: f64, p2: f64 },
    #[error("failed to invert the foliation map: {0}")]
    InversionFailure(String),

    #[error("quadrature did not converge (value {value:e}, error estimate {error:e})")]
    NonConvergent { value: f64, error: f64 },
    #[error("leaf lengths are not constant (relative spread {spread:e})")]
    ConstantLengthViolated { spread: f64 },
    #[error("B2 residual check failed (max relative residual {residual:e})")]
    NotInKernelB2 { residual: f64 },
    #[error("leaf length is zero")]
    ZeroLeafLength,
    #[error("density is negative ({0:e})")]
    NegativeDensity(f64),
    #[error("renormalized density is not admissible (leaf integral {0:e})")]
    NonAdmissibleAfterRenormalization(f64),
    #[error("perturbation factor 1 + εg is not positive ({0:e})")]
    NonPositivePerturbation(f64),

    #[error("|q| fell below the zero floor")]
    ZeroOfQ,
    #[error("point is outside the domain")]
    LeftDomain,
    #[error("step size underflow at arc length {0}")]
    StepFailure(f64),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Short variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownIdentifier { .. } => "UnknownIdentifier",
            Error::NonLiteralExponent { .. } => "NonLiteralExponent",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::InconsistentBinding => "InconsistentBinding",
            Error::DivisionNearZero => "DivisionNearZero",
            Error::NonFinite => "NonFinite",
            Error::VariableMismatch => "VariableMismatch",
            Error::NonLegendrianTangent { .. } => "NonLegendrianTangent",
            Error::NegativeQ { .. } => "NegativeQ",
            Error::ZeroVelocity { .. } => "ZeroVelocity",
            Error::NotLegendrian { .. } => "NotLegendrian",
            Error::NonPositiveFactor { .. } => "NonPositiveFactor",
            Error::InversionFailure(_) => "InversionFailure",
            Error::NonConvergent { .. } => "NonConvergent",
            Error::ConstantLengthViolated { .. } => "ConstantLengthViolated",
            Error::NotInKernelB2 { .. } => "NotInKernelB2",
            Error::ZeroLeafLength => "ZeroLeafLength",
            Error::NegativeDensity(_) => "NegativeDensity",
            Error::NonAdmissibleAfterRenormalization(_) => "NonAdmissibleAfterRenormalization",
            Error::NonPositivePerturbation(_) => "NonPositivePerturbation",
            Error::ZeroOfQ => "ZeroOfQ",
            Error::LeftDomain => "LeftDomain",
            Error::StepFailure(_) => "StepFailure",
            Error::Invalid(_) => "Invalid",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
