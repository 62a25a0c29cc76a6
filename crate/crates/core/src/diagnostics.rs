//! Observables extracted from trajectories: per-scale energies, transition
//! checkpoints, blowup-time extrapolation and bound monitors.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::energy_of;
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::math;
use crate::models::TransitionEvent;

/// Energy share a scale must hold at a local maximum of its first component
/// to count as a checkpoint.
pub const DEFAULT_DOMINANCE: f64 = 0.4;

/// `E_n(t) = ½ Σ_i X_{i,n}(t)²` for every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    /// Ascending.
    pub scales: Vec<i32>,
    pub times: Vec<f64>,
    /// `per_scale[k][s]` is the energy at `times[k]` on `scales[s]`.
    pub per_scale: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub dissipation: Vec<f64>,
}

impl EnergyProfile {
    pub fn scale_index(&self, n: i32) -> Option<usize> {
        self.scales.binary_search(&n).ok()
    }
}

pub fn energy_profile(traj: &Trajectory) -> Result<EnergyProfile> {
    if traj.is_empty() {
        return Err(Error::Shape("trajectory has no samples".into()));
    }
    let mut scales: Vec<i32> = traj.modes().iter().map(|m| m.scale).collect();
    scales.sort_unstable();
    scales.dedup();
    let slot: Vec<usize> = traj
        .modes()
        .iter()
        .map(|m| scales.binary_search(&m.scale).unwrap())
        .collect();
    let mut per_scale = Vec::with_capacity(traj.len());
    let mut total = Vec::with_capacity(traj.len());
    for s in traj.samples() {
        let mut e = vec![0.0; scales.len()];
        for (v, &k) in s.x.iter().zip(&slot) {
            e[k] += 0.5 * v * v;
        }
        total.push(e.iter().sum());
        per_scale.push(e);
    }
    Ok(EnergyProfile {
        scales,
        times: traj.times(),
        per_scale,
        total,
        dissipation: traj.samples().iter().map(|s| s.dissipation).collect(),
    })
}

/// Checkpoints `t_n`: for each scale, the first sampled local maximum of
/// `X_{1,n}` at which `E_n ≥ dominance · E_total`. Scales without one are
/// skipped, as is any candidate not later than the previous event.
///
/// Under viscosity the rotor makes `X_{1,n}` dip briefly during a transfer,
/// so this can fire before the transfer completes; cascade runs have the
/// better conditioned [`crate::models::cascade_checkpoints`].
pub fn detect_transitions(traj: &Trajectory, dominance: f64) -> Result<Vec<TransitionEvent>> {
    let prof = energy_profile(traj)?;
    let samples = traj.samples();
    let len = samples.len();
    let mut events: Vec<TransitionEvent> = Vec::new();
    for (si, &n) in prof.scales.iter().enumerate() {
        let Some(j) = traj.index_of(1, n) else { continue };
        let x = |i: usize| samples[i].x[j];
        let is_max = |i: usize| {
            if len < 2 {
                return false;
            }
            if i == 0 {
                x(0) > 0.0 && x(0) >= x(1)
            } else {
                i + 1 < len && x(i) > x(i - 1) && x(i) >= x(i + 1) && x(i) > 0.0
            }
        };
        let hit = (0..len).find(|&i| is_max(i) && prof.per_scale[i][si] >= dominance * prof.total[i]);
        if let Some(i) = hit {
            let t = samples[i].t;
            if events.last().is_none_or(|e| t > e.t_n) {
                events.push(TransitionEvent { n, t_n: t, e_n: x(i) });
            }
        }
    }
    Ok(events)
}

/// Geometric fit of checkpoint gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupFit {
    /// `+∞` when the fitted ratio is not below one.
    pub t_star: f64,
    pub ratio: f64,
    /// RMS residual of the fit of `ln(gap)` against the gap index.
    pub fit_residual: f64,
}

impl BlowupFit {
    pub fn blowup_detected(&self) -> bool {
        self.t_star.is_finite()
    }
}

/// Least-squares fit of `ln(t_{k+1} - t_k)` against `k`, extrapolated as a
/// geometric tail from the last gap. Needs at least three times.
pub fn geometric_fit(times: &[f64]) -> Result<BlowupFit> {
    if times.len() < 3 {
        return Err(Error::Shape(format!("need at least 3 checkpoint times, got {}", times.len())));
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(g) = gaps.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::Shape(format!("checkpoint times must increase (gap {g})")));
    }
    let m = gaps.len() as f64;
    let ys: Vec<f64> = gaps.iter().map(|g| math::ln(*g)).collect();
    let k_mean = (m - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dk = k as f64 - k_mean;
        sxy += dk * (y - y_mean);
        sxx += dk * dk;
    }
    let slope = sxy / sxx;
    let resid = ys
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let r = y - (y_mean + slope * (k as f64 - k_mean));
            r * r
        })
        .sum::<f64>();
    let ratio = math::exp(slope);
    let last = *times.last().unwrap();
    let gap = *gaps.last().unwrap();
    let t_star = if ratio < 1.0 { last + gap * ratio / (1.0 - ratio) } else { f64::INFINITY };
    Ok(BlowupFit { t_star, ratio, fit_residual: math::sqrt(resid / m) })
}

/// [`geometric_fit`] over event times; needs at least four events.
pub fn blowup_extrapolate(events: &[TransitionEvent]) -> Result<BlowupFit> {
    if events.len() < 4 {
        return Err(Error::Shape(format!("need at least 4 events, got {}", events.len())));
    }
    let times: Vec<f64> = events.iter().map(|e| e.t_n).collect();
    geometric_fit(&times)
}

/// `|½ΣX²(T) + D(T) - ½ΣX²(0)| / ½ΣX²(0)`.
pub fn energy_identity_residual(traj: &Trajectory) -> Result<f64> {
    let (Some(first), Some(last)) = (traj.samples().first(), traj.samples().last()) else {
        return Err(Error::UndefinedResidual);
    };
    let e0 = energy_of(&first.x);
    if e0 == 0.0 {
        return Err(Error::UndefinedResidual);
    }
    Ok((energy_of(&last.x) + last.dissipation - first.dissipation - e0).abs() / e0)
}

/// Constants of the energy-shape bounds between checkpoints:
/// `E_{n-m} ≤ c1 ρ1^m e²` (m ≥ 2), `E_{n-1} + E_n ≤ e²`,
/// `E_{n+m} ≤ c2 ρ2^{-m} e²` (m ≥ 1), with `e = e_{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c1: f64,
    pub rho1: f64,
    pub c2: f64,
    pub rho2: f64,
}

impl BoundConstants {
    /// The asymptotic-regime values `K^{-10}, (1+ε₀)^{1/10}, K^{-30}, (1+ε₀)^{10}`.
    pub fn asymptotic(k: f64, eps0: f64) -> Self {
        Self {
            c1: math::powi(k, -10),
            rho1: math::powf(1.0 + eps0, 0.1),
            c2: math::powi(k, -30),
            rho2: math::powf(1.0 + eps0, 10.0),
        }
    }
}

/// Worst ratio of one bound over all checked intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub id: String,
    pub ratio: f64,
    pub pass: bool,
}

/// Ids of the three reports, in output order.
pub const BOUND_IDS: [&str; 3] = ["lower-scales", "active-pair", "upper-scales"];

/// Evaluates the three bounds on every sample of every interval
/// `[t_{n-1}, t_n]` between consecutive events.
pub fn monitor_proposition_bounds(
    traj: &Trajectory,
    events: &[TransitionEvent],
    c: &BoundConstants,
) -> Result<Vec<BoundReport>> {
    if events.is_empty() {
        return Err(Error::Shape("no events to monitor".into()));
    }
    let prof = energy_profile(traj)?;
    let mut worst = [0.0f64; 3];
    for w in events.windows(2) {
        let (prev, next) = (w[0], w[1]);
        let n = prev.n + 1;
        let e2 = prev.e_n * prev.e_n;
        for (k, &t) in prof.times.iter().enumerate() {
            if t < prev.t_n || t > next.t_n {
                continue;
            }
            let row = &prof.per_scale[k];
            let energy = |s: i32| prof.scale_index(s).map_or(0.0, |i| row[i]);
            for (si, &s) in prof.scales.iter().enumerate() {
                let m = s - n;
                let r = if m <= -2 {
                    (0, row[si] / (c.c1 * math::powi(c.rho1, -m) * e2))
                } else if m >= 1 {
                    (2, row[si] / (c.c2 * math::powi(c.rho2, -m) * e2))
                } else {
                    continue;
                };
                worst[r.0] = worst[r.0].max(r.1);
            }
            worst[1] = worst[1].max((energy(n - 1) + energy(n)) / e2);
        }
    }
    Ok(BOUND_IDS
        .iter()
        .zip(worst)
        .map(|(id, ratio)| BoundReport { id: String::from(*id), ratio, pass: ratio <= 1.0 })
        .collect())
}

/// Equipartition of a rotor pair over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equipartition {
    /// `|(1/|W|)∫x² - E/2|` with `E = x² + y²` at the window start.
    pub deviation: f64,
    /// `E / (α |z| |W|)`, `z` taken at the window start.
    pub bound: f64,
    /// `max |z(t) - z(t0)| / |z(t0)|` over samples in the window.
    pub z_drift: f64,
}

/// Modes are given as indices into the trajectory.
pub fn equipartition_check(
    traj: &Trajectory,
    x: usize,
    y: usize,
    z: usize,
    alpha: f64,
    window: (f64, f64),
) -> Result<Equipartition> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::InvalidParameter { name: "window", reason: format!("empty window [{t0}, {t1}]") });
    }
    let s0 = traj
        .state_at(t0)
        .ok_or_else(|| Error::Shape(format!("window start {t0} outside trajectory")))?;
    if traj.state_at(t1).is_none() {
        return Err(Error::Shape(format!("window end {t1} outside trajectory")));
    }
    let w = t1 - t0;
    let e = s0.x[x] * s0.x[x] + s0.x[y] * s0.x[y];
    let z0 = s0.x[z];
    let mean = traj.integral_of_square(x, t0, t1) / w;
    let z_drift = traj
        .samples()
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| (s.x[z] - z0).abs())
        .fold(0.0, f64::max)
        / z0.abs();
    Ok(Equipartition { deviation: (mean - 0.5 * e).abs(), bound: e / (alpha * z0.abs() * w), z_drift })
}

/// `E_{n+m}(t_n) / e_n²` for `m` in `offsets`, one row per event.
pub fn energy_table(traj: &Trajectory, events: &[TransitionEvent], offsets: &[i32]) -> Result<Vec<Vec<f64>>> {
    let prof = energy_profile(traj)?;
    events
        .iter()
        .map(|ev| {
            let k = prof
                .times
                .iter()
                .position(|&t| t == ev.t_n)
                .ok_or_else(|| Error::Shape(format!("event time {} is not a sample", ev.t_n)))?;
            Ok(offsets
                .iter()
                .map(|m| prof.scale_index(ev.n + m).map_or(0.0, |i| prof.per_scale[k][i]) / (ev.e_n * ev.e_n))
                .collect())
        })
        .collect()
}
