//! The five-mode circuit `(a, b, c, d, ã)` that moves its energy from `a`
//! to `ã` abruptly, after a delay of about `√2`.

use alloc::format;
use alloc::vec::Vec;

use crate::circuit::{CircuitSpec, ModeId, StateVector};
use crate::error::{Error, Result};
use crate::gates::{amplifier_terms, pump_terms, rotor_terms, GateParams};
use crate::integrator::{IntegratorConfig, ModeSelector};
use crate::math;

/// Largest `Γ` for which `exp(-Γ)` stays comfortably normal in double precision.
pub const GAMMA_MAX: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    pub k: f64,
    pub eps: f64,
    /// Stands in for `K^10` in both the amplifier coupling and the seed
    /// `exp(-K^10)`.
    pub gamma: f64,
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= GAMMA_MAX) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must lie in (0, {GAMMA_MAX}], got {gamma}"),
        });
    }
    Ok(())
}

impl DelayParams {
    /// `gamma = None` uses `K^10`.
    pub fn new(k: f64, eps: f64, gamma: Option<f64>) -> Result<Self> {
        let p = Self { k, eps, gamma: gamma.unwrap_or_else(|| math::powi(k, 10)) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter { name: "K", reason: format!("must be at least 1, got {}", self.k) });
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter { name: "eps", reason: format!("must lie in (0, 1), got {}", self.eps) });
        }
        check_gamma(self.gamma)
    }
}

/// Modes in state order: `a, b, c, d` (components 1–4 at scale 0) and `ã`
/// (component 1 at scale 1, the input of the next copy of the circuit).
pub fn delay_modes() -> [ModeId; 5] {
    [
        ModeId::new("a", 1, 0),
        ModeId::new("b", 2, 0),
        ModeId::new("c", 3, 0),
        ModeId::new("d", 4, 0),
        ModeId::new("a_tilde", 1, 1),
    ]
}

pub fn delay_circuit_spec(p: &DelayParams) -> Result<CircuitSpec> {
    p.validate()?;
    let [a, b, c, d, at] = delay_modes();
    let e = p.eps;
    let g = |alpha: f64| GateParams::new(alpha);
    let mut terms = Vec::new();
    terms.extend(rotor_terms(&a, &d, &c, g(1.0 / (e * e))?)?);
    terms.extend(pump_terms(&a, &b, g(e)?)?);
    terms.extend(pump_terms(&a, &c, g(e * e * math::exp(-p.gamma))?)?);
    terms.extend(amplifier_terms(&b, &c, g(p.gamma / e)?)?);
    terms.extend(pump_terms(&d, &at, g(p.k)?)?);
    CircuitSpec::new(4, delay_modes().to_vec(), terms, &[])
}

/// `a = 1`, everything else zero.
pub fn delay_initial_state() -> StateVector {
    StateVector::new(0.0, alloc::vec![1.0, 0.0, 0.0, 0.0, 0.0])
}

/// Integrator settings suited to the circuit: `c` is seeded at the
/// `ε² e^{-Γ}` level, so it gets a far smaller absolute tolerance.
pub fn delay_integrator_config() -> IntegratorConfig {
    IntegratorConfig {
        atol: 1e-14,
        atol_overrides: alloc::vec![(ModeSelector::Label("c".into()), 1e-24)],
        ..IntegratorConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{assemble_rhs, check_cancellation_structural};
    use alloc::vec;

    #[test]
    fn coefficients_match_equations() {
        let p = DelayParams::new(10.0, 1e-3, Some(30.0)).unwrap();
        let s = delay_circuit_spec(&p).unwrap();
        assert!(check_cancellation_structural(&s).pass);
        assert_eq!(s.interactions().len(), 10);
        let x = vec![0.3, -0.2, 0.5, 0.7, 0.1];
        let d = assemble_rhs(&s, &StateVector::new(0.0, x.clone())).unwrap().x;
        let (a, b, c, dd, at) = (x[0], x[1], x[2], x[3], x[4]);
        let (e, k, g) = (1e-3, 10.0, 30.0);
        let seed = e * e * libm::exp(-g);
        let want = [
            -c * dd / (e * e) - e * a * b - seed * a * c,
            e * a * a - g / e * c * c,
            seed * a * a + g / e * b * c,
            c * a / (e * e) - k * dd * at,
            k * dd * dd,
        ];
        for (got, w) in d.iter().zip(want) {
            assert!((got - w).abs() <= 1e-12 * w.abs().max(1.0), "{got} vs {w}");
        }
    }

    #[test]
    fn default_gamma_is_k_to_the_tenth() {
        let p = DelayParams::new(1.5, 0.1, None).unwrap();
        assert!((p.gamma - libm::pow(1.5, 10.0)).abs() < 1e-12);
        assert!(DelayParams::new(2.0, 0.1, None).is_err()); // 1024 > GAMMA_MAX
    }

    #[test]
    fn invalid_params() {
        assert!(DelayParams::new(0.5, 0.1, Some(10.0)).is_err());
        assert!(DelayParams::new(2.0, 1.0, Some(10.0)).is_err());
        assert!(DelayParams::new(2.0, 0.1, Some(0.0)).is_err());
        assert!(DelayParams::new(2.0, 0.1, Some(701.0)).is_err());
    }
}
