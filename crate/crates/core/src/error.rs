use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ground-state iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("exponent p = {p} is not mass-subcritical in dimension {d} (need 1 < p < {limit})")]
    SubcriticalityViolated { p: f64, d: usize, limit: f64 },
    #[error("radial domain too small: tail/peak = {ratio:e} at r_max")]
    DomainTooSmall { ratio: f64 },
    #[error("relative step {0:e} outside [1e-6, 1e-2]")]
    RelStepOutOfRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cutoff band too narrow: delta = {delta} must exceed 2h = {two_h}")]
    BandTooNarrow { delta: f64, two_h: f64 },
    #[error("cutoff band does not fit inside the computational box")]
    BandOutsideBox,
    #[error("velocity first components are not strictly increasing")]
    UnsortedVelocities,
    #[error("solitons {0} and {1} have the same velocity")]
    DuplicateVelocity(usize, usize),
    #[error("inner solve did not converge within {iterations} iterations (change {change:e})")]
    InnerSolveDiverged { iterations: usize, change: f64 },
    #[error("box contamination at t = {t}: boundary-band mass fraction {fraction:e}")]
    BoxContamination { t: f64, fraction: f64 },
    #[error("configuration rejected: {0}")]
    ConfigRejected(String),
    #[error("tail radius M = {m} outside [0, L = {l})")]
    MOutOfBox { m: f64, l: f64 },
    #[error("constraint rows are linearly dependent (smallest singular value {0:e})")]
    SingularConstraints(f64),
    #[error("eigensolve failed: {0}")]
    EigSolveFailed(String),
    #[error("modulated frequency {omega_tilde} left the resolve window around {omega}")]
    GroundStateResolve { omega_tilde: f64, omega: f64 },
    #[error("Newton iteration diverged at t = {t} (residual {residual:e})")]
    NewtonDiverged { t: f64, residual: f64 },
    #[error("field is outside the modulation radius: |u - R|_H1 = {distance:e} > {radius:e}")]
    OutsideModulationRadius { distance: f64, radius: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("output directory used by more than one run: {0}")]
    OutputCollision(String),
    #[error("ladder entry T_n = {tn}: {source}")]
    Ladder {
        tn: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by an inconsistent request rather than by the numerics.
    pub fn is_config_rejection(&self) -> bool {
        match self {
            Error::SubcriticalityViolated { .. }
            | Error::RelStepOutOfRange(_)
            | Error::InvalidInput(_)
            | Error::BandTooNarrow { .. }
            | Error::BandOutsideBox
            | Error::UnsortedVelocities
            | Error::DuplicateVelocity(..)
            | Error::ConfigRejected(_)
            | Error::MOutOfBox { .. }
            | Error::OutputCollision(_)
            | Error::DomainTooSmall { .. }
            | Error::Json(_) => true,
            Error::Ladder { source, .. } => source.is_config_rejection(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
