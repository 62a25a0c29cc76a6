//! Sliding scale windows: the finest active scale is extended by one as soon
//! as it carries a non-negligible share of the energy.

use alloc::vec::Vec;

use super::{initial_sample, IntegratorConfig, Recorder, Stepper, Trajectory};
use crate::circuit::{energy_of, CircuitSpec, StateVector};
use crate::error::{Error, Result};

/// A model that can emit its spec restricted to any scale window.
///
/// Modes must be ordered by scale, so that a wider window only appends modes.
pub trait ScaleWindowed {
    fn spec_for_window(&self, n_lo: i32, n_hi: i32) -> Result<CircuitSpec>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPolicy {
    /// Extend once `E_top > threshold * E_total`.
    pub threshold: f64,
    /// Largest scale the window may reach.
    pub max_scale: i32,
}

impl WindowPolicy {
    pub fn new(threshold: f64, max_scale: i32) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: alloc::format!("must lie in (0, 1), got {threshold}"),
            });
        }
        Ok(Self { threshold, max_scale })
    }
}

/// Share of the energy held by the finest scale of `spec` (0 for a zero state).
pub fn top_scale_fraction(spec: &CircuitSpec, x: &[f64]) -> f64 {
    let total = energy_of(x);
    if total == 0.0 {
        return 0.0;
    }
    let Some(&top) = spec.scales().last() else { return 0.0 };
    let e_top: f64 = spec
        .modes()
        .iter()
        .zip(x)
        .filter(|(m, _)| m.scale == top)
        .map(|(_, v)| 0.5 * v * v)
        .sum();
    e_top / total
}

/// Appends the next finer scale with zero amplitudes.
pub fn extend_window<M: ScaleWindowed + ?Sized>(
    model: &M,
    spec: &CircuitSpec,
    state: &StateVector,
    policy: &WindowPolicy,
) -> Result<(CircuitSpec, StateVector)> {
    state.check_aligned(spec)?;
    let scales = spec.scales();
    let (Some(&lo), Some(&hi)) = (scales.first(), scales.last()) else {
        return Err(Error::Shape("empty window cannot be extended".into()));
    };
    if hi >= policy.max_scale {
        return Err(Error::WindowExhausted { n_hi: hi });
    }
    let wider = model.spec_for_window(lo, hi + 1)?;
    if wider.len() < spec.len() || wider.modes()[..spec.len()] != *spec.modes() {
        return Err(Error::Shape("wider window does not extend the old mode list".into()));
    }
    let mut x = state.x.clone();
    x.resize(wider.len(), 0.0);
    Ok((wider, StateVector::new(state.t, x)))
}

/// Result of [`integrate_windowed`].
#[derive(Debug, Clone)]
pub struct WindowedRun {
    /// Samples over the final (widest) mode list; modes that did not exist
    /// yet are recorded as zero.
    pub trajectory: Trajectory,
    pub spec: CircuitSpec,
    /// `(time, new top scale)` of every extension.
    pub extensions: Vec<(f64, i32)>,
    /// Set when the window cap was hit; the run stops there.
    pub truncated_at: Option<f64>,
}

/// Integrates to `t_end`, widening the window whenever the policy triggers.
pub fn integrate_windowed<M: ScaleWindowed + ?Sized>(
    model: &M,
    spec0: CircuitSpec,
    state0: &StateVector,
    t_end: f64,
    cfg: &IntegratorConfig,
    policy: &WindowPolicy,
) -> Result<WindowedRun> {
    if !(t_end > state0.t) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: alloc::format!("{t_end} does not exceed start time {}", state0.t),
        });
    }
    let mut spec = spec0;
    let mut state = state0.clone();
    let mut dissipation = 0.0;
    let mut h_carry = None;
    let mut traj = Trajectory::new(spec.modes().to_vec());
    traj.push(initial_sample(&spec, state0));
    let mut rec = Recorder::new(state0.t, cfg.sample_interval);
    let mut extensions = Vec::new();
    let mut truncated_at = None;

    'run: loop {
        while top_scale_fraction(&spec, &state.x) > policy.threshold {
            match extend_window(model, &spec, &state, policy) {
                Ok((s, x)) => {
                    extensions.push((state.t, *s.scales().last().unwrap()));
                    traj.widen(s.modes().to_vec());
                    spec = s;
                    state = x;
                }
                Err(Error::WindowExhausted { .. }) => {
                    truncated_at = Some(state.t);
                    break 'run;
                }
                Err(e) => return Err(e),
            }
        }
        let mut st = Stepper::with_dissipation(&spec, &state, dissipation, cfg)?;
        if let Some(h) = h_carry {
            st.set_step(h);
        }
        loop {
            if st.t() >= t_end {
                rec.push_current(&st, &mut traj);
                traj.add_stats(st.stats());
                break 'run;
            }
            st.step(t_end)?;
            if top_scale_fraction(&spec, st.x()) <= policy.threshold {
                rec.after_step(&st, &mut traj, t_end);
                continue;
            }
            // Restart from the crossing itself: the trigger can jump by many
            // orders of magnitude within one step.
            let n = spec.len();
            let mut buf = alloc::vec![0.0; st.dense_len()];
            let (mut lo, mut hi) = (st.t_prev(), st.t());
            while hi - lo > cfg.event_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                st.dense_into(mid, &mut buf);
                if top_scale_fraction(&spec, &buf[..n]) > policy.threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            rec.after_step(&st, &mut traj, hi);
            if hi == st.t() {
                state = st.state();
                dissipation = st.dissipation();
            } else {
                st.dense_into(hi, &mut buf);
                state = StateVector::new(hi, buf[..n].to_vec());
                dissipation = if st.is_augmented() { buf[n] } else { 0.0 };
            }
            if cfg.sample_interval.is_none() {
                if hi == st.t() {
                    rec.push_current(&st, &mut traj);
                } else {
                    rec.push_dense(&st, hi, &mut traj);
                }
            }
            h_carry = Some(st.step_size());
            traj.add_stats(st.stats());
            continue 'run;
        }
    }
    if truncated_at.is_some() && traj.last_time().is_some_and(|t| t < state.t) {
        let mut dxdt = alloc::vec![0.0; spec.len()];
        spec.rhs_into(&state.x, &mut dxdt);
        traj.push(super::Sample { t: state.t, x: state.x.clone(), dxdt, dissipation });
    }
    Ok(WindowedRun { trajectory: traj, spec, extensions, truncated_at })
}
