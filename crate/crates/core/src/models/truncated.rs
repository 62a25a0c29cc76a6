//! Constructive blowup for the truncated dyadic model: at any time only the
//! pair `(X_{n0+k}, X_{n0+k+1})` interacts, every other mode decays
//! linearly, and stage `k` ends when `X_{n0+k+1}` first reaches `λ^{-δ(k+1)}`.
//!
//! Each stage is integrated in its natural variables
//! `x(τ) = λ^{δk} X_{n0+k}(t_k + sτ)`, `y(τ) = λ^{δk} X_{n0+k+1}(t_k + sτ)`,
//! `s = λ^{-n0-k+δk}`, which turns the stage into the damped pump
//! `x' = -εx - xy`, `y' = -λ^{2α}εy + x²` started from `(1, 0)` with the
//! event `y = λ^{-δ}`. Working at unit scale keeps the event tolerance
//! meaningful for every `k`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::kp::kp_mode;
use super::TransitionEvent;
use crate::circuit::{CircuitSpec, ModeId, StateVector};
use crate::diagnostics::geometric_fit;
use crate::error::{Error, Result};
use crate::gates::{pump_terms, GateParams};
use crate::integrator::{integrate_until, IntegratorConfig, Sample, StepStats, Trajectory};
use crate::math;

/// Largest stage dissipation `ε_k` the construction accepts.
pub const EPS_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedParams {
    pub lambda: f64,
    pub alpha_diss: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub n0: i32,
    /// Number of pump stages.
    pub k_max: usize,
}

impl TruncatedParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return bad("lambda", format!("must exceed 1, got {}", self.lambda));
        }
        if !(self.alpha_diss > 0.0 && self.alpha_diss < 0.5) {
            return bad("alpha_diss", format!("must lie in (0, 1/2), got {}", self.alpha_diss));
        }
        if !(self.delta > 0.0 && self.delta < 1.0 - 2.0 * self.alpha_diss) {
            return bad("delta", format!("must lie in (0, 1 - 2α), got {}", self.delta));
        }
        if !(self.delta_prime > self.delta) {
            return bad("delta_prime", format!("must exceed delta, got {}", self.delta_prime));
        }
        if self.n0 < 1 {
            return bad("n0", format!("must be at least 1, got {}", self.n0));
        }
        if self.k_max < 1 {
            return bad("k_max", "must be at least 1".into());
        }
        for k in 0..self.k_max {
            let e = self.stage_eps(k);
            if !(e < EPS_LIMIT) {
                return bad("n0", format!("stage {k} has ε = {e:.3e} ≥ {EPS_LIMIT}; increase n0"));
            }
        }
        Ok(())
    }

    /// `ε_k = λ^{-(1-2α)n0 - (1-2α-δ)k}`.
    pub fn stage_eps(&self, k: usize) -> f64 {
        let a = 1.0 - 2.0 * self.alpha_diss;
        math::powf(self.lambda, -a * self.n0 as f64 - (a - self.delta) * k as f64)
    }

    /// Time unit of stage `k`: `λ^{-n0-k+δk}`.
    pub fn stage_time_scale(&self, k: usize) -> f64 {
        let k = k as f64;
        math::powf(self.lambda, -(self.n0 as f64) - k + self.delta * k)
    }

    /// Checkpoint amplitude `λ^{-δk}`.
    pub fn checkpoint_amplitude(&self, k: usize) -> f64 {
        math::powf(self.lambda, -self.delta * k as f64)
    }

    /// Undamped stage duration `artanh(λ^{-δ})` in stage units.
    pub fn ideal_stage_duration(&self) -> f64 {
        math::atanh(math::powf(self.lambda, -self.delta))
    }

    fn nu(&self, n: i32) -> f64 {
        math::powf(self.lambda, 2.0 * n as f64 * self.alpha_diss)
    }

    /// `sup_n λ^{δ'n}|X_n|` over a state of this model.
    pub fn weighted_norm(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, v)| math::powf(self.lambda, self.delta_prime * (self.n0 + j as i32) as f64) * v.abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of [`truncated_blowup_run`].
#[derive(Debug, Clone)]
pub struct TruncatedRun {
    /// `k_max + 1` checkpoints, scales `n0 ..= n0 + k_max`.
    pub checkpoints: Vec<TransitionEvent>,
    pub trajectory: Trajectory,
    pub t_star: f64,
    /// `ε_k` of every stage.
    pub stage_eps: Vec<f64>,
    /// Event time of every stage in stage units.
    pub stage_durations: Vec<f64>,
}

/// The damped pump of stage `k` in stage variables.
pub fn stage_spec(p: &TruncatedParams, k: usize) -> Result<CircuitSpec> {
    let (x, y) = (ModeId::simple("x", 1), ModeId::simple("y", 2));
    let eps = p.stage_eps(k);
    let terms = pump_terms(&x, &y, GateParams::new(1.0)?)?;
    let rates = [(x.clone(), eps), (y.clone(), math::powf(p.lambda, 2.0 * p.alpha_diss) * eps)];
    CircuitSpec::new(2, vec![x, y], terms, &rates)
}

/// Runs `k_max` stages from `X_{n0} = 1`.
///
/// `cfg` applies to the stage variables (all of order one); its
/// `sample_interval` is ignored and every accepted step is recorded.
pub fn truncated_blowup_run(p: &TruncatedParams, cfg: &IntegratorConfig) -> Result<TruncatedRun> {
    p.validate()?;
    let stage_cfg = IntegratorConfig { sample_interval: None, ..cfg.clone() };
    let width = p.k_max + 1;
    let modes: Vec<ModeId> = (0..width).map(|j| kp_mode(p.n0 + j as i32)).collect();
    let nus: Vec<f64> = (0..width).map(|j| p.nu(p.n0 + j as i32)).collect();
    let budget = 10.0 * p.ideal_stage_duration();
    let threshold = math::powf(p.lambda, -p.delta);

    let mut x_k = vec![0.0; width];
    x_k[0] = 1.0;
    let mut t_k = 0.0;
    let mut d_k = 0.0;
    let mut samples: Vec<Sample> = Vec::new();
    let mut stats = StepStats::default();
    let mut checkpoints = vec![TransitionEvent { n: p.n0, t_n: 0.0, e_n: 1.0 }];
    let mut stage_eps = Vec::with_capacity(p.k_max);
    let mut stage_durations = Vec::with_capacity(p.k_max);

    for k in 0..p.k_max {
        let spec = stage_spec(p, k)?;
        let s = p.stage_time_scale(k);
        let amp = p.checkpoint_amplitude(k);
        let start = StateVector::new(0.0, vec![1.0, 0.0]);
        let (tau, _, stage) = integrate_until(&spec, &start, |_, x| x[1] - threshold, budget, &stage_cfg)
            .map_err(|e| match e {
                Error::EventNotFound { .. } => Error::StageFailure { k },
                other => other,
            })?;
        stats.add(stage.step_stats());
        let map = |smp: &Sample| -> Sample {
            let dt = smp.t * s;
            let mut x = vec![0.0; width];
            let mut dxdt = vec![0.0; width];
            let mut dissipation = d_k + amp * amp * smp.dissipation;
            for j in 0..width {
                if j == k || j == k + 1 {
                    let l = j - k;
                    x[j] = amp * smp.x[l];
                    dxdt[j] = amp * smp.dxdt[l] / s;
                } else if x_k[j] != 0.0 {
                    let decay = math::exp(-nus[j] * dt);
                    x[j] = x_k[j] * decay;
                    dxdt[j] = -nus[j] * x[j];
                    dissipation += 0.5 * x_k[j] * x_k[j] * (1.0 - decay * decay);
                }
            }
            Sample { t: t_k + dt, x, dxdt, dissipation }
        };
        let first = if k == 0 { 0 } else { 1 };
        let last = map(stage.samples().last().unwrap());
        for smp in &stage.samples()[first..stage.len() - 1] {
            samples.push(map(smp));
        }
        // The checkpoint records the located amplitude, which overshoots
        // λ^{-δ(k+1)} by at most the event tolerance; the next stage starts
        // from the exact value. Derivatives stored here are left limits.
        let e_next = last.x[k + 1];
        let t_next = last.t;
        if !(t_next > t_k) {
            return Err(Error::StageFailure { k });
        }
        x_k = last.x.clone();
        d_k = last.dissipation;
        t_k = t_next;
        samples.push(last);
        checkpoints.push(TransitionEvent { n: p.n0 + k as i32 + 1, t_n: t_k, e_n: e_next });
        stage_eps.push(p.stage_eps(k));
        stage_durations.push(tau);
    }

    let times: Vec<f64> = checkpoints.iter().map(|c| c.t_n).collect();
    let t_star = if times.len() >= 3 {
        geometric_fit(&times)?.t_star
    } else {
        let r = math::powf(p.lambda, p.delta - 1.0);
        times[1] + (times[1] - times[0]) * r / (1.0 - r)
    };
    let trajectory = Trajectory::from_samples(modes, samples, stats)?;
    Ok(TruncatedRun { checkpoints, trajectory, t_star, stage_eps, stage_durations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::check_cancellation_structural;
    use crate::diagnostics::{detect_transitions, energy_identity_residual};

    fn params(k_max: usize) -> TruncatedParams {
        TruncatedParams { lambda: 2.0, alpha_diss: 0.25, delta: 0.25, delta_prime: 0.3, n0: 14, k_max }
    }

    #[test]
    fn rejects_large_stage_eps_and_bad_exponents() {
        assert!(TruncatedParams { n0: 2, ..params(4) }.validate().is_err());
        assert!(TruncatedParams { delta: 0.6, ..params(4) }.validate().is_err());
        assert!(TruncatedParams { delta_prime: 0.2, ..params(4) }.validate().is_err());
        assert!(params(4).validate().is_ok());
    }

    #[test]
    fn stage_spec_is_a_damped_pump() {
        let p = params(3);
        let s = stage_spec(&p, 1).unwrap();
        assert!(check_cancellation_structural(&s).pass);
        let e = p.stage_eps(1);
        assert!((s.dissipation()[0] - e).abs() < 1e-18);
        assert!((s.dissipation()[1] - libm::sqrt(2.0) * e).abs() < 1e-15);
    }

    #[test]
    fn checkpoints_follow_the_schedule() {
        let p = params(6);
        let cfg = IntegratorConfig { event_tol: 1e-9, ..IntegratorConfig::default() };
        let run = truncated_blowup_run(&p, &cfg).unwrap();
        assert_eq!(run.checkpoints.len(), 7);
        for (k, c) in run.checkpoints.iter().enumerate() {
            assert_eq!(c.n, 14 + k as i32);
            let want = p.checkpoint_amplitude(k);
            assert!(c.e_n >= want && c.e_n - want <= 1e-9, "k={k}: {} vs {want}", c.e_n);
        }
        let bound = 2.0 * p.ideal_stage_duration();
        for (k, w) in run.checkpoints.windows(2).enumerate() {
            assert!(w[1].t_n - w[0].t_n <= bound * p.stage_time_scale(k));
        }
        assert!(run.t_star.is_finite() && run.t_star > run.checkpoints.last().unwrap().t_n);
        assert!(energy_identity_residual(&run.trajectory).unwrap() < 1e-8);
    }

    #[test]
    fn detected_transitions_match_interior_checkpoints() {
        let run = truncated_blowup_run(&params(6), &IntegratorConfig::default()).unwrap();
        let found = detect_transitions(&run.trajectory, 1e-3).unwrap();
        // the final checkpoint ends the record, so it is never a local maximum
        for c in &run.checkpoints[..run.checkpoints.len() - 1] {
            let e = found.iter().find(|e| e.n == c.n).expect("checkpoint detected");
            assert_eq!(e.t_n, c.t_n);
        }
    }

    #[test]
    fn two_stage_run_uses_ratio_extrapolation() {
        let p = TruncatedParams { k_max: 1, ..params(1) };
        let run = truncated_blowup_run(&p, &IntegratorConfig::default()).unwrap();
        let r = libm::pow(2.0, -0.75);
        let t1 = run.checkpoints[1].t_n;
        assert!((run.t_star - t1 / (1.0 - r)).abs() < 1e-15);
    }
}
