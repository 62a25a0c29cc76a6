use alloc::format;
use alloc::vec::Vec;

use super::StepStats;
use crate::circuit::{ModeId, StateVector};
use crate::error::{Error, Result};

/// One recorded point: amplitudes, their derivative and the dissipation
/// integral accumulated since the start of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub dxdt: Vec<f64>,
    pub dissipation: f64,
}

/// Time-ordered samples of one run over a fixed mode list.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    modes: Vec<ModeId>,
    samples: Vec<Sample>,
    stats: StepStats,
}

// 4-point Gauss–Legendre on [0, 1]; exact for the degree-6 square of a cubic.
const GL_NODES: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_87,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

impl Trajectory {
    pub(crate) fn new(modes: Vec<ModeId>) -> Self {
        Self { modes, samples: Vec::new(), stats: StepStats::default() }
    }

    /// Assembles a trajectory from externally produced samples, checking
    /// shapes and strictly increasing times.
    pub fn from_samples(modes: Vec<ModeId>, samples: Vec<Sample>, stats: StepStats) -> Result<Self> {
        for (k, s) in samples.iter().enumerate() {
            if s.x.len() != modes.len() || s.dxdt.len() != modes.len() {
                return Err(Error::Misaligned { expected: modes.len(), got: s.x.len().min(s.dxdt.len()) });
            }
            if k > 0 && !(s.t > samples[k - 1].t) {
                return Err(Error::Shape(format!("sample times not increasing at index {k}")));
            }
        }
        Ok(Self { modes, samples, stats })
    }

    pub(crate) fn push(&mut self, s: Sample) {
        self.samples.push(s);
    }

    pub(crate) fn set_stats(&mut self, s: StepStats) {
        self.stats = s;
    }

    pub(crate) fn add_stats(&mut self, s: StepStats) {
        self.stats.add(s);
    }

    /// Appends zero-amplitude modes (used after a window extension).
    pub(crate) fn widen(&mut self, modes: Vec<ModeId>) {
        let n = modes.len();
        for s in &mut self.samples {
            s.x.resize(n, 0.0);
            s.dxdt.resize(n, 0.0);
        }
        self.modes = modes;
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step_stats(&self) -> StepStats {
        self.stats
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub(crate) fn last_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Time series of mode `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.x[j]).collect()
    }

    pub fn index_of(&self, component: usize, scale: i32) -> Option<usize> {
        self.modes.iter().position(|m| m.component == component && m.scale == scale)
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    /// Accumulated `∫ Σ ν_j X_j² dt` at the last sample.
    pub fn dissipation_integral(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.dissipation)
    }

    pub fn initial_state(&self) -> StateVector {
        let s = &self.samples[0];
        StateVector::new(s.t, s.x.clone())
    }

    pub fn final_state(&self) -> StateVector {
        let s = self.samples.last().expect("trajectory has samples");
        StateVector::new(s.t, s.x.clone())
    }

    /// Index `k` with `t_k <= t <= t_{k+1}`; `None` outside the sampled range.
    fn bracket(&self, t: f64) -> Option<usize> {
        let n = self.samples.len();
        if n == 0 || t < self.samples[0].t || t > self.samples[n - 1].t {
            return None;
        }
        if n == 1 {
            return Some(0);
        }
        let k = self.samples.partition_point(|s| s.t <= t);
        Some(k.clamp(1, n - 1) - 1)
    }

    fn hermite(&self, k: usize, j: usize, t: f64) -> f64 {
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * a.x[j] + h10 * h * a.dxdt[j] + h01 * b.x[j] + h11 * h * b.dxdt[j]
    }

    /// Cubic Hermite interpolation of every mode at `t`.
    pub fn state_at(&self, t: f64) -> Option<StateVector> {
        let k = self.bracket(t)?;
        if self.samples.len() == 1 || t == self.samples[k].t {
            return Some(StateVector::new(t, self.samples[k].x.clone()));
        }
        let x = (0..self.modes.len()).map(|j| self.hermite(k, j, t)).collect();
        Some(StateVector::new(t, x))
    }

    /// First time `t ≥ after` at which mode `j` reaches `level`, located on
    /// the Hermite interpolant to within `tol` (the right end of the final
    /// bracket is returned). Returns `after` itself if the mode is already at
    /// or above `level` there.
    pub fn first_crossing(&self, j: usize, level: f64, after: f64, tol: f64) -> Option<f64> {
        let k0 = self.bracket(after)?;
        let value = |t: f64| self.state_at(t).map(|s| s.x[j]);
        if value(after)? >= level {
            return Some(after);
        }
        let k = (k0 + 1..self.samples.len()).find(|&k| self.samples[k].x[j] >= level)?;
        let (mut lo, mut hi) = (self.samples[k - 1].t.max(after), self.samples[k].t);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(k - 1, j, mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// `∫_a^b X_j(t)² dt` over the Hermite interpolant, clipped to the
    /// sampled range.
    pub fn integral_of_square(&self, j: usize, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.samples.len().saturating_sub(1) {
            let (t0, t1) = (self.samples[k].t, self.samples[k + 1].t);
            let (lo, hi) = (t0.max(a), t1.min(b));
            if hi <= lo {
                continue;
            }
            let w = hi - lo;
            for (s, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let v = self.hermite(k, j, lo + s * w);
                total += wt * w * v * v;
            }
        }
        total
    }
}
