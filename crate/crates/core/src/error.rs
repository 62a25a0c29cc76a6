use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rejected input: amplitude {index} is not finite ({value})")]
    NonFiniteAmplitude { index: usize, value: f64 },

    #[error("state has {got} amplitudes but the circuit declares {expected} modes")]
    Misaligned { expected: usize, got: usize },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size underflow at t = {t:e} (h = {h:e}); system too stiff for the explicit pair")]
    StiffnessFailure { t: f64, h: f64, last_state: Vec<f64> },

    #[error("step budget of {max_steps} exhausted at t = {t:e}")]
    StepBudgetExhausted { t: f64, max_steps: usize, last_state: Vec<f64> },

    #[error("non-finite state at t = {t:e}; integration diverged")]
    Divergence { t: f64, last_state: Vec<f64> },

    #[error("event not found before t = {budget:e}")]
    EventNotFound { budget: f64 },

    #[error("stage {k}: threshold not reached within its time budget; parameters outside the constructive regime")]
    StageFailure { k: usize },

    #[error("scale window exhausted at n = {n_hi}")]
    WindowExhausted { n_hi: i32 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("energy identity residual undefined for zero initial energy")]
    UndefinedResidual,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}
