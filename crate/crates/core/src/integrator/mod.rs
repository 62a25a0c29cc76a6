//! Adaptive explicit integration of circuit specs with dense output,
//! threshold events and sliding scale windows.

mod dopri;
mod trajectory;
mod window;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use dopri::Stepper;
pub use trajectory::{Sample, Trajectory};
pub use window::{extend_window, integrate_windowed, top_scale_fraction, ScaleWindowed, WindowPolicy, WindowedRun};

use crate::circuit::{CircuitSpec, ModeId, StateVector};
use crate::error::{Error, Result};

/// Picks modes for a per-mode absolute tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSelector {
    Label(String),
    /// Every mode with this component index, at any scale.
    Component(usize),
}

impl ModeSelector {
    pub fn matches(&self, m: &ModeId) -> bool {
        match self {
            ModeSelector::Label(l) => *l == m.label,
            ModeSelector::Component(c) => *c == m.component,
        }
    }
}

/// Tolerances, step bounds and sampling for one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    /// Default absolute tolerance.
    pub atol: f64,
    /// Later entries win when several selectors match one mode.
    pub atol_overrides: Vec<(ModeSelector, f64)>,
    pub h_init: Option<f64>,
    /// `None` means "only guard against steps below the time resolution".
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub event_tol: f64,
    /// `None` records every accepted step; otherwise samples sit on the grid
    /// `t0 + k * sample_interval` (plus the final time).
    pub sample_interval: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            atol_overrides: Vec::new(),
            h_init: None,
            h_min: None,
            h_max: None,
            event_tol: 1e-12,
            sample_interval: None,
            max_steps: 50_000_000,
        }
    }
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol <= 1e-3) {
            return Err(invalid("rtol", format!("must lie in (0, 1e-3], got {}", self.rtol)));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(invalid("atol", format!("must be positive, got {}", self.atol)));
        }
        for (sel, a) in &self.atol_overrides {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(invalid("atol", format!("override for {sel:?} must be positive, got {a}")));
            }
        }
        for (name, v) in [("h_init", self.h_init), ("h_min", self.h_min), ("h_max", self.h_max)] {
            if let Some(h) = v {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(invalid(name, format!("must be positive, got {h}")));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.h_min, self.h_max) {
            if lo > hi {
                return Err(invalid("h_min", format!("{lo} exceeds h_max {hi}")));
            }
        }
        if !(self.event_tol > 0.0 && self.event_tol.is_finite()) {
            return Err(invalid("event_tol", format!("must be positive, got {}", self.event_tol)));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("sample_interval", format!("must be positive, got {dt}")));
            }
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1".into()));
        }
        Ok(())
    }

    /// Absolute tolerance of every mode of `spec`.
    pub fn atol_vector(&self, spec: &CircuitSpec) -> Vec<f64> {
        spec.modes()
            .iter()
            .map(|m| {
                self.atol_overrides
                    .iter()
                    .rev()
                    .find(|(sel, _)| sel.matches(m))
                    .map_or(self.atol, |(_, a)| *a)
            })
            .collect()
    }
}

/// Accepted/rejected step counts and right-hand-side evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl StepStats {
    pub(crate) fn add(&mut self, o: StepStats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
    }
}

/// Turns accepted steps into trajectory samples.
pub(crate) struct Recorder {
    t0: f64,
    interval: Option<f64>,
    next_k: u64,
    buf: Vec<f64>,
    dx: Vec<f64>,
}

impl Recorder {
    pub(crate) fn new(t0: f64, interval: Option<f64>) -> Self {
        Self { t0, interval, next_k: 1, buf: Vec::new(), dx: Vec::new() }
    }

    fn grid(&self, k: u64) -> f64 {
        self.t0 + k as f64 * self.interval.unwrap_or(0.0)
    }

    pub(crate) fn push_current(&mut self, st: &Stepper<'_>, traj: &mut Trajectory) {
        if traj.last_time().is_some_and(|t| t >= st.t()) {
            return;
        }
        traj.push(Sample {
            t: st.t(),
            x: st.x().to_vec(),
            dxdt: st.dxdt().to_vec(),
            dissipation: st.dissipation(),
        });
    }

    pub(crate) fn push_dense(&mut self, st: &Stepper<'_>, t: f64, traj: &mut Trajectory) {
        if traj.last_time().is_some_and(|tl| tl >= t) {
            return;
        }
        let n = st.x().len();
        self.buf.resize(st.dense_len(), 0.0);
        self.dx.resize(n, 0.0);
        st.dense_into(t, &mut self.buf);
        st.spec().rhs_into(&self.buf[..n], &mut self.dx);
        traj.push(Sample {
            t,
            x: self.buf[..n].to_vec(),
            dxdt: self.dx.clone(),
            dissipation: if st.is_augmented() { self.buf[n] } else { 0.0 },
        });
    }

    /// Records what the last accepted step covered, strictly before `upto`.
    pub(crate) fn after_step(&mut self, st: &Stepper<'_>, traj: &mut Trajectory, upto: f64) {
        match self.interval {
            None => {
                if st.t() < upto {
                    self.push_current(st, traj);
                }
            }
            Some(_) => loop {
                let tk = self.grid(self.next_k);
                if tk > st.t() || tk >= upto {
                    break;
                }
                if tk == st.t() {
                    self.push_current(st, traj);
                } else {
                    self.push_dense(st, tk, traj);
                }
                self.next_k += 1;
            },
        }
    }
}

fn initial_sample(spec: &CircuitSpec, state0: &StateVector) -> Sample {
    let mut dxdt = vec![0.0; spec.len()];
    spec.rhs_into(&state0.x, &mut dxdt);
    Sample { t: state0.t, x: state0.x.clone(), dxdt, dissipation: 0.0 }
}

/// Integrates from `state0` to `t_end`.
pub fn integrate(
    spec: &CircuitSpec,
    state0: &StateVector,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t_end > state0.t) {
        return Err(invalid("t_end", format!("{t_end} does not exceed start time {}", state0.t)));
    }
    let mut st = Stepper::new(spec, state0, cfg)?;
    let mut traj = Trajectory::new(spec.modes().to_vec());
    traj.push(initial_sample(spec, state0));
    let mut rec = Recorder::new(state0.t, cfg.sample_interval);
    while st.t() < t_end {
        st.step(t_end)?;
        rec.after_step(&st, &mut traj, t_end);
    }
    rec.push_current(&st, &mut traj);
    traj.set_stats(st.stats());
    Ok(traj)
}

/// Integrates until the first sign change of `g(t, X)`, searching no later
/// than `t_max`. The event time is the right end of the final bisection
/// bracket, so `g` has already changed sign there.
pub fn integrate_until<G>(
    spec: &CircuitSpec,
    state0: &StateVector,
    mut g: G,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, StateVector, Trajectory)>
where
    G: FnMut(f64, &[f64]) -> f64,
{
    let g0 = g(state0.t, &state0.x);
    if g0 == 0.0 || !g0.is_finite() {
        return Err(invalid("g", format!("event function must be nonzero at the start, got {g0}")));
    }
    if !(t_max > state0.t) {
        return Err(invalid("t_max", format!("{t_max} does not exceed start time {}", state0.t)));
    }
    let mut st = Stepper::new(spec, state0, cfg)?;
    let mut traj = Trajectory::new(spec.modes().to_vec());
    traj.push(initial_sample(spec, state0));
    let mut rec = Recorder::new(state0.t, cfg.sample_interval);
    let n = spec.len();
    let mut buf = vec![0.0; st.dense_len()];
    while st.t() < t_max {
        st.step(t_max)?;
        let g1 = g(st.t(), st.x());
        if g1 * g0 > 0.0 {
            rec.after_step(&st, &mut traj, f64::INFINITY);
            continue;
        }
        let (mut lo, mut hi) = (st.t_prev(), st.t());
        while hi - lo > cfg.event_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            st.dense_into(mid, &mut buf);
            if g(mid, &buf[..n]) * g0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rec.after_step(&st, &mut traj, hi);
        if hi == st.t() {
            rec.push_current(&st, &mut traj);
        } else {
            rec.push_dense(&st, hi, &mut traj);
        }
        traj.set_stats(st.stats());
        let state = traj.final_state();
        return Ok((hi, state, traj));
    }
    Err(Error::EventNotFound { budget: t_max - state0.t })
}
