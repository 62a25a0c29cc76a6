//! Pump, amplifier and rotor gates as interaction-term builders, with their
//! closed-form solutions.
//!
//! Circuits are assembled by concatenating gate term lists; each list is
//! energy-neutral on its own, so any superposition is too.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{InteractionTerm, ModeId};
use crate::error::{Error, Result};
use crate::math;

/// Coupling constant of a gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    alpha: f64,
}

impl GateParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("gate coupling must be finite and positive, got {alpha}"),
            });
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn distinct(modes: &[&ModeId]) -> Result<()> {
    for (i, a) in modes.iter().enumerate() {
        for b in &modes[i + 1..] {
            if a == b {
                return Err(Error::InvalidGate(format!("mode `{}` used twice", a.label)));
            }
        }
    }
    Ok(())
}

/// `dx/dt = -α x y`, `dy/dt = α x²`: drains `x` into `y`.
pub fn pump_terms(x: &ModeId, y: &ModeId, p: GateParams) -> Result<Vec<InteractionTerm>> {
    distinct(&[x, y])?;
    let a = p.alpha;
    Ok(vec![
        InteractionTerm::new(x.clone(), x.clone(), y.clone(), -a),
        InteractionTerm::new(y.clone(), x.clone(), x.clone(), a),
    ])
}

/// `dx/dt = -α y²`, `dy/dt = α x y`: large `x` amplifies `y` exponentially.
pub fn amplifier_terms(x: &ModeId, y: &ModeId, p: GateParams) -> Result<Vec<InteractionTerm>> {
    distinct(&[x, y])?;
    let a = p.alpha;
    Ok(vec![
        InteractionTerm::new(x.clone(), y.clone(), y.clone(), -a),
        InteractionTerm::new(y.clone(), x.clone(), y.clone(), a),
    ])
}

/// `dx/dt = -α y z`, `dy/dt = α x z`, `dz/dt = 0`: `z` rotates `(x, y)`.
pub fn rotor_terms(
    x: &ModeId,
    y: &ModeId,
    z: &ModeId,
    p: GateParams,
) -> Result<Vec<InteractionTerm>> {
    distinct(&[x, y, z])?;
    let a = p.alpha;
    Ok(vec![
        InteractionTerm::new(x.clone(), y.clone(), z.clone(), -a),
        InteractionTerm::new(y.clone(), x.clone(), z.clone(), a),
    ])
}

/// Pump started from `(A, 0)`: `(A sech(αAt), A tanh(αAt))`.
pub fn pump_closed_form(amplitude: f64, alpha: f64, t: f64) -> (f64, f64) {
    let s = alpha * amplitude * t;
    (amplitude * math::sech(s), amplitude * math::tanh(s))
}

/// Amplifier solution that reaches `(0, A)` at time `T`:
/// `(A tanh(αA(T-t)), A sech(αA(T-t)))`.
pub fn amplifier_closed_form(amplitude: f64, alpha: f64, t_peak: f64, t: f64) -> (f64, f64) {
    let s = alpha * amplitude * (t_peak - t);
    (amplitude * math::tanh(s), amplitude * math::sech(s))
}

/// Rotor solution: `(x0, y0)` rotated by `α z0 t`, `z` fixed.
pub fn rotor_closed_form(x0: f64, y0: f64, z0: f64, alpha: f64, t: f64) -> (f64, f64, f64) {
    let phi = alpha * z0 * t;
    let (s, c) = (math::sin(phi), math::cos(phi));
    (x0 * c - y0 * s, y0 * c + x0 * s, z0)
}
