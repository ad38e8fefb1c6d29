use thiserror::Error;

/// Errors surfaced by simulation, analysis, and experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state became non-finite at t = {t}")]
    Divergence { t: f64 },
    #[error("integrator step underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("plant input gain k_p must be nonzero")]
    ZeroInputGain,
    #[error("parameter vector outside projection set: ||theta|| = {norm} > {bound}")]
    OutsideSet { norm: f64, bound: f64 },
    #[error("scenario does not carry the true plant parameters")]
    MissingTruth,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("undersampled: {0}")]
    Undersampled(String),
    #[error("no matching gains exist: matching residual {0:e}")]
    NoMatch(f64),
    #[error("Assumption-1 structure violated: {0}")]
    AssumptionViolated(String),
    #[error("unstable observer gain: g_theta = {0} >= 0")]
    UnstableGain(f64),
    #[error("mismatched scenarios: {0}")]
    MismatchedScenarios(String),
    #[error("beta(x) is singular at the current state")]
    SingularBeta,
    #[error("unsupported backstepping order n = {0} (supported: 1..=3)")]
    UnsupportedOrder(usize),
    #[error("inertia matrix is singular")]
    SingularInertia,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
