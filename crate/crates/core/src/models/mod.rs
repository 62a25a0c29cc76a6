//! Concrete systems: the Katz–Pavlovic dyadic model, its truncated
//! constructive blowup, the five-mode delay circuit and the full cascade.

mod cascade;
mod delay;
mod kp;
mod truncated;

pub use cascade::{
    cascade_checkpoints, cascade_coefficients, cascade_initial_state, cascade_integrator_config, cascade_mode, cascade_run,
    cascade_spec, cascade_spec_with_manifest, rescale_run, unrescale_run, CascadeParams, CoefficientRow,
    DroppedTerm, M,
};
pub use delay::{
    delay_circuit_spec, delay_initial_state, delay_integrator_config, delay_modes, DelayParams, GAMMA_MAX,
};
pub use kp::{kp_modified_spec, kp_spec, KPParams};
pub use truncated::{stage_spec, truncated_blowup_run, TruncatedParams, TruncatedRun, EPS_LIMIT};

/// Checkpoint of a cascade: scale `n` holds amplitude `e_n` in its first
/// component at time `t_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEvent {
    pub n: i32,
    pub t_n: f64,
    pub e_n: f64,
}
