//! Katz–Pavlovic dyadic model and its log-modified variant.

use alloc::format;
use alloc::vec::Vec;

use crate::circuit::{CircuitSpec, InteractionTerm, ModeId};
use crate::error::{Error, Result};
use crate::integrator::ScaleWindowed;
use crate::math;

/// `dX_n/dt = -λ^{2nα} X_n + λ^{n-1} X_{n-1}² - λ^n X_n X_{n+1}` on a scale window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPParams {
    pub lambda: f64,
    pub alpha_diss: f64,
    pub n_lo: i32,
    pub n_hi: i32,
    /// `false` drops the dissipation entirely.
    pub viscous: bool,
}

impl KPParams {
    pub fn new(lambda: f64, alpha_diss: f64, n_lo: i32, n_hi: i32) -> Result<Self> {
        let p = Self { lambda, alpha_diss, n_lo, n_hi, viscous: true };
        p.validate()?;
        Ok(p)
    }

    pub fn inviscid(self) -> Self {
        Self { viscous: false, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must exceed 1, got {}", self.lambda),
            });
        }
        if !(self.alpha_diss >= 0.0 && self.alpha_diss.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha_diss",
                reason: format!("must be nonnegative, got {}", self.alpha_diss),
            });
        }
        if self.n_lo > self.n_hi {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("empty window [{}, {}]", self.n_lo, self.n_hi),
            });
        }
        Ok(())
    }
}

pub(crate) fn kp_mode(n: i32) -> ModeId {
    ModeId::new(format!("X{n}"), 1, n)
}

fn modes(p: &KPParams) -> Vec<ModeId> {
    (p.n_lo..=p.n_hi).map(kp_mode).collect()
}

/// Builds the KP spec. Boundary scales lose the partner outside the window.
pub fn kp_spec(p: &KPParams) -> Result<CircuitSpec> {
    p.validate()?;
    let l = p.lambda;
    let mut terms = Vec::new();
    for n in p.n_lo..p.n_hi {
        let (lo, hi) = (kp_mode(n), kp_mode(n + 1));
        let c = math::powi(l, n);
        terms.push(InteractionTerm::new(hi.clone(), lo.clone(), lo.clone(), c));
        terms.push(InteractionTerm::new(lo.clone(), lo, hi, -c));
    }
    let rates: Vec<(ModeId, f64)> = if p.viscous {
        (p.n_lo..=p.n_hi)
            .map(|n| (kp_mode(n), math::powf(l, 2.0 * n as f64 * p.alpha_diss)))
            .collect()
    } else {
        Vec::new()
    };
    CircuitSpec::new(1, modes(p), terms, &rates)
}

/// The variant with dissipation `λⁿ/g(λⁿ)²` and transfer terms
/// `λ^{n-1}(X_{n-1}² + X_{n-1}X_n)` in, `λⁿ(X_nX_{n+1} + X_{n+1}²)` out.
pub fn kp_modified_spec<G: Fn(f64) -> f64>(p: &KPParams, g: G) -> Result<CircuitSpec> {
    p.validate()?;
    let l = p.lambda;
    let mut terms = Vec::new();
    for n in p.n_lo..p.n_hi {
        let (lo, hi) = (kp_mode(n), kp_mode(n + 1));
        let c = math::powi(l, n);
        terms.push(InteractionTerm::new(hi.clone(), lo.clone(), lo.clone(), c));
        terms.push(InteractionTerm::new(hi.clone(), lo.clone(), hi.clone(), c));
        terms.push(InteractionTerm::new(lo.clone(), lo.clone(), hi.clone(), -c));
        terms.push(InteractionTerm::new(lo, hi.clone(), hi, -c));
    }
    let mut rates = Vec::new();
    if p.viscous {
        for n in p.n_lo..=p.n_hi {
            let s = math::powi(l, n);
            let gs = g(s);
            if !(gs > 0.0 && gs.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "g",
                    reason: format!("g(λ^{n}) = {gs} must be finite and positive"),
                });
            }
            rates.push((kp_mode(n), s / (gs * gs)));
        }
    }
    CircuitSpec::new(1, modes(p), terms, &rates)
}

impl ScaleWindowed for KPParams {
    fn spec_for_window(&self, n_lo: i32, n_hi: i32) -> Result<CircuitSpec> {
        kp_spec(&KPParams { n_lo, n_hi, ..*self })
    }
}
