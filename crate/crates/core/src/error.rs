use thiserror::Error;

/// Errors produced by the kinetic toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("particle count must be even and >= 2, got {0}")]
    OddParticleCount(usize),

    #[error("invalid random coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("fractional moment of order {order} undefined on support reaching {support_min}")]
    FractionalMomentUndefined { order: f64, support_min: f64 },

    #[error("interaction coefficients must be nonnegative: support minimum {0} < 0")]
    NegativeCoefficientSupport(f64),

    #[error("epsilon {eps} exceeds the admissible bound {eps_max}")]
    EpsilonTooLarge { eps: f64, eps_max: f64 },

    #[error("eta must have mean 0 and unit second moment, got mean {mean}, second moment {second}")]
    EtaMomentsInvalid { mean: f64, second: f64 },

    #[error("eta support minimum {support_min} lies below the required bound {required}")]
    EtaSupportInvalid { support_min: f64, required: f64 },

    #[error("scaling regime is inadmissible: {0}")]
    InadmissibleRegime(String),

    #[error("law must satisfy <p+q>=1 and <p^2+q^2><1 for this operation (got {mean_sum}, {energy_sum})")]
    LawNotAdmissible { mean_sum: f64, energy_sum: f64 },

    #[error("energy rate <p^2+q^2> = 1 makes the closed form singular for nonzero mean")]
    EnergyRateSingular,

    #[error("third-moment bound requires <p^3+q^3> < 1, got {0}")]
    CubicMomentNotContractive(f64),

    #[error("moment order {0} exceeds the supported maximum 8")]
    MomentOrderTooLarge(u32),

    #[error("ODE step {dt} is unstable for rate {rate} (|rate|*dt > 0.5)")]
    OdeStepUnstable { dt: f64, rate: f64 },

    #[error("time step {dt} must not exceed {bound} ({context})")]
    TimeStepTooLarge { dt: f64, bound: f64, context: &'static str },

    #[error("empty state array")]
    EmptyStates,

    #[error("invalid histogram specification: {0}")]
    InvalidHistogram(String),

    #[error("xi grids of the two characteristic functions differ")]
    GridMismatch,

    #[error("pdf undefined for a Dirac atom")]
    PdfUndefined,

    #[error("sampling undefined for this distribution: {0}")]
    SampleUndefined(&'static str),

    #[error("column {column} of the transition matrix sums to {sum}, expected 1")]
    NonStochasticColumn { column: usize, sum: f64 },

    #[error("transition matrix entry ({row},{column}) = {value} outside [0,1]")]
    TransitionEntryOutOfRange { row: usize, column: usize, value: f64 },

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("power iteration did not reach residual {target} within {iterations} iterations")]
    PowerIterationStalled { target: f64, iterations: usize },

    #[error("interaction rate {rate} * dt {dt} exceeds 1 in vertex {vertex}")]
    RateOverflow { rate: f64, dt: f64, vertex: usize },

    #[error("graph density vector invalid: {0}")]
    InvalidDensity(String),

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
