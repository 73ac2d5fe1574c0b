use alloc::string::String;

/// Errors signalled by the simulation engines and estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time step too coarse: dt * rate = {0} (must be < 0.1)")]
    DiscretizationTooCoarse(f64),

    #[error("unstable equilibrium: eigenvalue with real part {0} <= 0")]
    Unstable(f64),

    #[error("autocorrelation does not decay below threshold within {0} lags")]
    NonDecaying(usize),

    #[error("series of length {len} is shorter than 10x the fitted time ({fitted_steps} steps)")]
    SeriesTooShort { len: usize, fitted_steps: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("population diverged: abundance {0:e} exceeds 1e12")]
    Diverged(f64),

    #[error("interval [{lo}, {hi}] does not bracket the transition")]
    Unbracketed { lo: f64, hi: f64 },

    #[error("network is infeasible: {0} non-positive price component(s)")]
    Infeasible(usize),

    #[error("runaway cascade: {0} forced repricings in one step")]
    RunawayCascade(usize),

    #[error("no stationary state for coupling J = {0}")]
    NoStationaryState(f64),

    #[error("feedback g = {0} admits no stationary state")]
    Nonstationary(f64),

    #[error("optimization failed: {0}")]
    OptimizationFailed(&'static str),

    #[error("insufficient data: {got} samples, need {need}")]
    InsufficientData { got: usize, need: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
