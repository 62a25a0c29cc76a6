//! Dormand–Prince 5(4) stepper with PI step-size control and the
//! fourth-order continuous extension of Hairer, Nørsett & Wanner.
//!
//! When the circuit has dissipation, the state is augmented with one extra
//! component `D' = Σ ν_j X_j²`, so the dissipation integral is advanced by the
//! same stages (and interpolated by the same dense output) as the amplitudes.
//! That component is excluded from the error norm.

use alloc::vec;
use alloc::vec::Vec;

use super::{IntegratorConfig, StepStats};
use crate::circuit::{CircuitSpec, StateVector};
use crate::error::{Error, Result};
use crate::math;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
/// Step may shrink by at most 5x and grow by at most 10x per step.
const FAC_SHRINK: f64 = 5.0;
const FAC_GROW: f64 = 0.1;

/// One isolated integration context over a fixed spec.
pub struct Stepper<'s> {
    spec: &'s CircuitSpec,
    n: usize,
    augmented: bool,
    t: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    atol: Vec<f64>,
    rtol: f64,
    h: f64,
    h_min: f64,
    h_max: f64,
    err_old: f64,
    last_rejected: bool,
    max_steps: usize,
    stats: StepStats,
    t_prev: f64,
    h_last: f64,
    rcont: [Vec<f64>; 5],
}

impl<'s> Stepper<'s> {
    pub fn new(spec: &'s CircuitSpec, state0: &StateVector, cfg: &IntegratorConfig) -> Result<Self> {
        Self::with_dissipation(spec, state0, 0.0, cfg)
    }

    /// Starts with an already accumulated dissipation integral (used when a
    /// run is resumed on a regenerated spec).
    pub fn with_dissipation(
        spec: &'s CircuitSpec,
        state0: &StateVector,
        dissipation0: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        state0.check_aligned(spec)?;
        let n = spec.len();
        let augmented = !spec.is_inviscid();
        let dim = n + augmented as usize;
        let mut y = state0.x.clone();
        if augmented {
            y.push(dissipation0);
        }
        let zeros = || vec![0.0; dim];
        let mut s = Self {
            spec,
            n,
            augmented,
            t: state0.t,
            y,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            tmp: zeros(),
            y_new: zeros(),
            atol: cfg.atol_vector(spec),
            rtol: cfg.rtol,
            h: 0.0,
            h_min: cfg.h_min.unwrap_or(0.0),
            h_max: cfg.h_max.unwrap_or(f64::INFINITY),
            err_old: 1e-4,
            last_rejected: false,
            max_steps: cfg.max_steps,
            stats: StepStats::default(),
            t_prev: state0.t,
            h_last: 0.0,
            rcont: [zeros(), zeros(), zeros(), zeros(), zeros()],
        };
        let mut k1 = core::mem::take(&mut s.k[0]);
        s.eval(&s.y.clone(), &mut k1);
        s.k[0] = k1;
        s.h = match cfg.h_init {
            Some(h) => h,
            None => s.initial_step(),
        };
        Ok(s)
    }

    /// Overrides the next trial step (e.g. to carry it across a restart).
    pub fn set_step(&mut self, h: f64) {
        if h > 0.0 && h.is_finite() {
            self.h = h;
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Current amplitudes (without the dissipation component).
    pub fn x(&self) -> &[f64] {
        &self.y[..self.n]
    }

    /// Derivative at the current point (FSAL stage).
    pub fn dxdt(&self) -> &[f64] {
        &self.k[0][..self.n]
    }

    pub fn dissipation(&self) -> f64 {
        if self.augmented {
            self.y[self.n]
        } else {
            0.0
        }
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Start time of the last accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn state(&self) -> StateVector {
        StateVector::new(self.t, self.x().to_vec())
    }

    fn eval(&mut self, y: &[f64], out: &mut [f64]) {
        self.stats.rhs_evals += 1;
        self.spec.rhs_into(&y[..self.n], &mut out[..self.n]);
        if self.augmented {
            out[self.n] = self.spec.dissipation_rate(&y[..self.n]);
        }
    }

    fn scale(&self, i: usize, a: f64, b: f64) -> f64 {
        self.atol[i] + self.rtol * a.abs().max(b.abs())
    }

    fn underflow_limit(&self) -> f64 {
        self.h_min.max(16.0 * f64::EPSILON * self.t.abs()).max(f64::MIN_POSITIVE)
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.n.max(1);
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..self.n {
            let sk = self.scale(i, self.y[i], self.y[i]);
            dnf += (self.k[0][i] / sk) * (self.k[0][i] / sk);
            dny += (self.y[i] / sk) * (self.y[i] / sk);
        }
        dnf /= n as f64;
        dny /= n as f64;
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { math::sqrt(dny / dnf) * 0.01 };
        h = h.min(self.h_max);
        let mut y1 = core::mem::take(&mut self.tmp);
        for ((v, &y), &k0) in y1.iter_mut().zip(&self.y).zip(&self.k[0]) {
            *v = y + h * k0;
        }
        let mut f1 = core::mem::take(&mut self.k[1]);
        self.eval(&y1, &mut f1);
        let mut der2 = 0.0;
        for (i, (&f, &k0)) in f1.iter().zip(&self.k[0]).take(self.n).enumerate() {
            let sk = self.scale(i, self.y[i], self.y[i]);
            let d = (f - k0) / sk;
            der2 += d * d;
        }
        self.tmp = y1;
        self.k[1] = f1;
        let der2 = math::sqrt(der2 / n as f64) / h;
        let der12 = der2.abs().max(math::sqrt(dnf));
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            math::powf(0.01 / der12, 0.2)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Takes one accepted step that does not pass `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        if self.t >= t_limit {
            return Ok(());
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(Error::StepBudgetExhausted {
                    t: self.t,
                    max_steps: self.max_steps,
                    last_state: self.x().to_vec(),
                });
            }
            let mut h = self.h.min(self.h_max);
            let mut last = false;
            if self.t + h >= t_limit || self.t + 1.01 * h >= t_limit {
                h = t_limit - self.t;
                last = true;
            }
            if h < self.underflow_limit() && !last {
                return Err(Error::StiffnessFailure {
                    t: self.t,
                    h,
                    last_state: self.x().to_vec(),
                });
            }
            let err = self.attempt(h);
            let finite = err.is_finite() && self.y_new.iter().all(|v| v.is_finite());
            if !finite {
                self.stats.rejected += 1;
                self.last_rejected = true;
                self.h = h * 0.1;
                if self.h < self.underflow_limit() {
                    return Err(Error::Divergence { t: self.t, last_state: self.x().to_vec() });
                }
                continue;
            }
            let fac11 = math::powf(err, EXPO1);
            if err <= 1.0 {
                let mut fac = fac11 / math::powf(self.err_old, BETA);
                fac = FAC_GROW.max(FAC_SHRINK.min(fac / SAFETY));
                let mut h_new = h / fac;
                self.err_old = err.max(1e-4);
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.last_rejected = false;
                self.accept(h, if last { t_limit } else { self.t + h });
                self.stats.accepted += 1;
                // a step clipped to the limit says little about the next one
                self.h = if last { self.h.max(h_new) } else { h_new }.min(self.h_max);
                return Ok(());
            }
            self.stats.rejected += 1;
            self.last_rejected = true;
            self.h = h / FAC_SHRINK.min(fac11 / SAFETY);
        }
    }

    /// Computes stages for step `h`, leaving the candidate in `y_new` and the
    /// final stage in `k[6]`. Returns the scaled max-norm error.
    fn attempt(&mut self, h: f64) -> f64 {
        let dim = self.y.len();
        let mut k = core::mem::take(&mut self.k);
        let mut tmp = core::mem::take(&mut self.tmp);
        let y = &self.y;

        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k[0][i];
        }
        self.eval(&tmp, &mut k[1]);
        for i in 0..dim {
            tmp[i] = self.y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        self.eval(&tmp, &mut k[2]);
        for i in 0..dim {
            tmp[i] = self.y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        self.eval(&tmp, &mut k[3]);
        for i in 0..dim {
            tmp[i] = self.y[i]
                + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        self.eval(&tmp, &mut k[4]);
        for i in 0..dim {
            tmp[i] = self.y[i]
                + h * (A61 * k[0][i]
                    + A62 * k[1][i]
                    + A63 * k[2][i]
                    + A64 * k[3][i]
                    + A65 * k[4][i]);
        }
        self.eval(&tmp, &mut k[5]);
        let mut y_new = core::mem::take(&mut self.y_new);
        for i in 0..dim {
            y_new[i] = self.y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i]
                    + A76 * k[5][i]);
        }
        self.eval(&y_new, &mut k[6]);
        let mut err: f64 = 0.0;
        for i in 0..self.n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sk = self.scale(i, self.y[i], y_new[i]);
            err = err.max(e.abs() / sk);
        }
        self.k = k;
        self.tmp = tmp;
        self.y_new = y_new;
        err
    }

    fn accept(&mut self, h: f64, t_new: f64) {
        let dim = self.y.len();
        for i in 0..dim {
            let k = &self.k;
            let ydiff = self.y_new[i] - self.y[i];
            let bspl = h * k[0][i] - ydiff;
            self.rcont[0][i] = self.y[i];
            self.rcont[1][i] = ydiff;
            self.rcont[2][i] = bspl;
            self.rcont[3][i] = ydiff - h * k[6][i] - bspl;
            self.rcont[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        self.t_prev = self.t;
        self.h_last = t_new - self.t;
        self.t = t_new;
        core::mem::swap(&mut self.y, &mut self.y_new);
        self.k.swap(0, 6);
    }

    /// Dense output over the last accepted step, including the dissipation
    /// component when present. `out` must have the augmented length.
    pub fn dense_into(&self, t: f64, out: &mut [f64]) {
        if self.h_last == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let theta = (t - self.t_prev) / self.h_last;
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        for (i, o) in out.iter_mut().enumerate() {
            *o = r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
    }

    /// Length of the vector expected by [`dense_into`](Self::dense_into).
    pub fn dense_len(&self) -> usize {
        self.y.len()
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn spec(&self) -> &'s CircuitSpec {
        self.spec
    }
}
