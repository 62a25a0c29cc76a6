//! The infinite chain of delay circuits: four components per dyadic scale,
//! coupled through a sixteen-row coefficient table.

use alloc::format;
use alloc::vec::Vec;

use super::delay::check_gamma;
use super::TransitionEvent;
use crate::circuit::{CircuitSpec, InteractionTerm, ModeId, StateVector};
use crate::error::{Error, Result};
use crate::integrator::{
    integrate_windowed, IntegratorConfig, ModeSelector, Sample, ScaleWindowed, Trajectory, WindowPolicy,
    WindowedRun,
};
use crate::math;

/// Components per scale.
pub const M: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeParams {
    pub eps0: f64,
    pub eps: f64,
    pub k: f64,
    /// Stands in for `K^10`.
    pub gamma: f64,
    pub n_lo: i32,
    pub n_hi: i32,
    pub viscous: bool,
    /// Dissipation rate is `(1+ε₀)^{exponent·n}`.
    pub alpha_diss_exponent: f64,
    /// Scale carrying the initial unit amplitude.
    pub n0: i32,
}

impl CascadeParams {
    /// Inviscid parameters with window `[n0, n0+3]` and `Γ = K^10` unless given.
    pub fn new(eps0: f64, eps: f64, k: f64, gamma: Option<f64>, n0: i32) -> Result<Self> {
        let p = Self {
            eps0,
            eps,
            k,
            gamma: gamma.unwrap_or_else(|| math::powi(k, 10)),
            n_lo: n0,
            n_hi: n0 + 3,
            viscous: false,
            alpha_diss_exponent: 2.0,
            n0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn viscous(self, on: bool) -> Self {
        Self { viscous: on, ..self }
    }

    pub fn with_window(self, n_lo: i32, n_hi: i32) -> Self {
        Self { n_lo, n_hi, ..self }
    }

    /// `1 + ε₀`, the dyadic scale ratio.
    pub fn scale_ratio(&self) -> f64 {
        1.0 + self.eps0
    }

    /// `(1+ε₀)^{5n/2}`: the time-rate multiplier at scale `n`.
    pub fn rate_at(&self, n: i32) -> f64 {
        math::powf(self.scale_ratio(), 2.5 * n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: alloc::string::String| Err(Error::InvalidParameter { name, reason });
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return bad("eps0", format!("must lie in (0, 1), got {}", self.eps0));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("eps", format!("must lie in (0, 1), got {}", self.eps));
        }
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return bad("K", format!("must be at least 1, got {}", self.k));
        }
        if self.n_lo > self.n_hi {
            return bad("window", format!("empty window [{}, {}]", self.n_lo, self.n_hi));
        }
        if !self.alpha_diss_exponent.is_finite() {
            return bad("alpha_diss_exponent", "must be finite".into());
        }
        check_gamma(self.gamma)
    }
}

/// One entry `α_{i₁,i₂,i₃,μ₁,μ₂,μ₃}` of the coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientRow {
    pub i: [usize; 3],
    pub mu: [i32; 3],
    pub alpha: f64,
}

/// The sixteen nonzero coefficients (components 1–4 stand for `a, b, c, d`).
pub fn cascade_coefficients(p: &CascadeParams) -> Result<Vec<CoefficientRow>> {
    p.validate()?;
    let e = p.eps;
    let rot = 1.0 / (e * e);
    let seed = e * e * math::exp(-p.gamma);
    let amp = p.gamma / e;
    let hop = math::powf(p.scale_ratio(), 2.5) * p.k;
    let row = |i1, i2, i3, mu: [i32; 3], alpha| CoefficientRow { i: [i1, i2, i3], mu, alpha };
    let z = [0, 0, 0];
    Ok(alloc::vec![
        row(3, 4, 1, z, -rot / 2.0),
        row(4, 3, 1, z, -rot / 2.0),
        row(1, 3, 4, z, rot / 2.0),
        row(3, 1, 4, z, rot / 2.0),
        row(1, 2, 1, z, -e / 2.0),
        row(2, 1, 1, z, -e / 2.0),
        row(1, 1, 2, z, e),
        row(1, 3, 1, z, -seed / 2.0),
        row(3, 1, 1, z, -seed / 2.0),
        row(1, 1, 3, z, seed),
        row(3, 3, 2, z, -amp),
        row(2, 3, 3, z, amp / 2.0),
        row(3, 2, 3, z, amp / 2.0),
        row(4, 4, 1, [0, 0, 1], hop),
        row(1, 4, 4, [1, 0, 0], -hop / 2.0),
        row(4, 1, 4, [0, 1, 0], -hop / 2.0),
    ])
}

pub fn cascade_mode(i: usize, n: i32) -> ModeId {
    ModeId::new(format!("X{i}_{n}"), i, n)
}

/// A table term that would reach outside the window, at output scale `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroppedTerm {
    /// Index into [`cascade_coefficients`].
    pub row: usize,
    pub n: i32,
}

/// Spec over the window `[n_lo, n_hi]`, modes ordered by scale then component.
pub fn cascade_spec(p: &CascadeParams) -> Result<CircuitSpec> {
    cascade_spec_with_manifest(p).map(|(s, _)| s)
}

/// As [`cascade_spec`], also listing the boundary terms that were dropped.
pub fn cascade_spec_with_manifest(p: &CascadeParams) -> Result<(CircuitSpec, Vec<DroppedTerm>)> {
    let rows = cascade_coefficients(p)?;
    let inside = |n: i32| n >= p.n_lo && n <= p.n_hi;
    let mut terms = Vec::new();
    let mut dropped = Vec::new();
    for n in p.n_lo..=p.n_hi {
        for (r, row) in rows.iter().enumerate() {
            let [m1, m2, m3] = row.mu;
            let (s1, s2) = (n - m3 + m1, n - m3 + m2);
            if !(inside(s1) && inside(s2)) {
                dropped.push(DroppedTerm { row: r, n });
                continue;
            }
            let coeff = row.alpha * p.rate_at(n - m3);
            terms.push(InteractionTerm::new(
                cascade_mode(row.i[2], n),
                cascade_mode(row.i[0], s1),
                cascade_mode(row.i[1], s2),
                coeff,
            ));
        }
    }
    let modes: Vec<ModeId> =
        (p.n_lo..=p.n_hi).flat_map(|n| (1..=M).map(move |i| cascade_mode(i, n))).collect();
    let rates: Vec<(ModeId, f64)> = if p.viscous {
        modes
            .iter()
            .map(|m| (m.clone(), math::powf(p.scale_ratio(), p.alpha_diss_exponent * m.scale as f64)))
            .collect()
    } else {
        Vec::new()
    };
    Ok((CircuitSpec::new(M, modes, terms, &rates)?, dropped))
}

/// `X_{1,n0} = 1`, everything else zero, at `t = 0`.
pub fn cascade_initial_state(spec: &CircuitSpec, n0: i32) -> Result<StateVector> {
    let j = spec.index_of(1, n0).ok_or_else(|| Error::Shape(format!("scale {n0} not in window")))?;
    let mut s = StateVector::zeros(0.0, spec.len());
    s.x[j] = 1.0;
    Ok(s)
}

/// Tolerances for cascade runs: `c`-type modes (component 3) are seeded at
/// the `ε² e^{-Γ}` level and get a far smaller absolute tolerance.
pub fn cascade_integrator_config() -> IntegratorConfig {
    IntegratorConfig {
        atol: 1e-14,
        atol_overrides: alloc::vec![(ModeSelector::Component(3), 1e-24)],
        ..IntegratorConfig::default()
    }
}

impl ScaleWindowed for CascadeParams {
    fn spec_for_window(&self, n_lo: i32, n_hi: i32) -> Result<CircuitSpec> {
        cascade_spec(&self.with_window(n_lo, n_hi))
    }
}

/// Runs the cascade from `X_{1,n0} = 1` to `t_end` on a sliding window that
/// starts at `[n0, n0+3]`.
pub fn cascade_run(
    p: &CascadeParams,
    t_end: f64,
    cfg: &IntegratorConfig,
    policy: &WindowPolicy,
) -> Result<WindowedRun> {
    let p = p.with_window(p.n0, p.n0 + 3);
    let spec = cascade_spec(&p)?;
    let state0 = cascade_initial_state(&spec, p.n0)?;
    integrate_windowed(&p, spec, &state0, t_end, cfg, policy)
}

/// Checkpoints built the way the blowup proof chains its circuits: from
/// `(t_n, e_n)`, scale `n` ignites when `X_{3,n}` first reaches
/// `ε² e_n / Γ` (the rescaled `c = K^{-10} ε²` threshold), and the next
/// checkpoint is `t_{n+1} = t_c + K^{-1/2} / ((1+ε₀)^{5n/2} e_n)` with
/// `e_{n+1} = X_{1,n+1}(t_{n+1})`.
///
/// The chain starts at the first sample on scale `p.n0` and stops at the
/// first scale that does not ignite, leaves the record or the window, or
/// hands over a nonpositive amplitude. Crossings are located to `time_tol`
/// relative to the local time unit.
pub fn cascade_checkpoints(traj: &Trajectory, p: &CascadeParams, time_tol: f64) -> Result<Vec<TransitionEvent>> {
    if !(time_tol > 0.0) {
        return Err(Error::InvalidParameter { name: "time_tol", reason: format!("must be positive, got {time_tol}") });
    }
    let Some(first) = traj.samples().first() else {
        return Ok(Vec::new());
    };
    let Some(j0) = traj.index_of(1, p.n0) else {
        return Err(Error::Shape(format!("scale {} not in trajectory", p.n0)));
    };
    let mut events = Vec::new();
    let (mut n, mut t, mut e) = (p.n0, first.t, first.x[j0]);
    while e > 0.0 {
        events.push(TransitionEvent { n, t_n: t, e_n: e });
        let unit = 1.0 / (p.rate_at(n) * e);
        let (Some(c), Some(a_next)) = (traj.index_of(3, n), traj.index_of(1, n + 1)) else { break };
        let Some(t_c) = traj.first_crossing(c, p.eps * p.eps * e / p.gamma, t, time_tol * unit) else { break };
        let t_next = t_c + unit / math::sqrt(p.k);
        let Some(s) = traj.state_at(t_next) else { break };
        (n, t, e) = (n + 1, t_next, s.x[a_next]);
    }
    Ok(events)
}

/// Renormalizes a cascade trajectory around scale `N`: amplitudes are divided
/// by `e_N`, scales shifted by `-N`, and time becomes
/// `τ = (t - t_N)(1+ε₀)^{5N/2} e_N`.
pub fn rescale_run(traj: &Trajectory, p: &CascadeParams, n: i32, e_n: f64, t_n: f64) -> Result<Trajectory> {
    if !(e_n > 0.0 && e_n.is_finite()) {
        return Err(Error::InvalidParameter { name: "e_N", reason: format!("must be positive, got {e_n}") });
    }
    map_run(traj, n, e_n, t_n, p.rate_at(n) * e_n)
}

/// Inverse of [`rescale_run`].
pub fn unrescale_run(traj: &Trajectory, p: &CascadeParams, n: i32, e_n: f64, t_n: f64) -> Result<Trajectory> {
    if !(e_n > 0.0 && e_n.is_finite()) {
        return Err(Error::InvalidParameter { name: "e_N", reason: format!("must be positive, got {e_n}") });
    }
    // τ = (t - t_N) r  ⇔  t = τ / r + t_N, with amplitudes multiplied by e_N
    let r = p.rate_at(n) * e_n;
    let modes = traj.modes().iter().map(|m| cascade_mode(m.component, m.scale + n)).collect();
    let samples = traj
        .samples()
        .iter()
        .map(|s| Sample {
            t: s.t / r + t_n,
            x: s.x.iter().map(|v| v * e_n).collect(),
            dxdt: s.dxdt.iter().map(|v| v * e_n * r).collect(),
            dissipation: s.dissipation * e_n * e_n,
        })
        .collect();
    Trajectory::from_samples(modes, samples, traj.step_stats())
}

fn map_run(traj: &Trajectory, n: i32, e_n: f64, t_n: f64, r: f64) -> Result<Trajectory> {
    let modes = traj.modes().iter().map(|m| cascade_mode(m.component, m.scale - n)).collect();
    let samples = traj
        .samples()
        .iter()
        .map(|s| Sample {
            t: (s.t - t_n) * r,
            x: s.x.iter().map(|v| v / e_n).collect(),
            dxdt: s.dxdt.iter().map(|v| v / (e_n * r)).collect(),
            dissipation: s.dissipation / (e_n * e_n),
        })
        .collect();
    Trajectory::from_samples(modes, samples, traj.step_stats())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{assemble_rhs, check_cancellation_structural};
    use crate::models::delay::{delay_circuit_spec, DelayParams};
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn params() -> CascadeParams {
        CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 3).unwrap()
    }

    #[test]
    fn table_has_sixteen_rows_with_listed_values() {
        let p = params();
        let rows = cascade_coefficients(&p).unwrap();
        assert_eq!(rows.len(), 16);
        assert_eq!(rows[0], CoefficientRow { i: [3, 4, 1], mu: [0, 0, 0], alpha: -0.5e4 });
        assert_eq!(rows[13].i, [4, 4, 1]);
        assert_eq!(rows[13].mu, [0, 0, 1]);
        assert!((rows[13].alpha - libm::pow(1.5, 2.5) * 8.0).abs() < 1e-12);
    }

    #[test]
    fn table_symmetry() {
        // (i₁,μ₁) ↔ (i₂,μ₂) maps the table onto itself
        let rows = cascade_coefficients(&params()).unwrap();
        for r in &rows {
            let mirror = rows
                .iter()
                .find(|s| s.i == [r.i[1], r.i[0], r.i[2]] && s.mu == [r.mu[1], r.mu[0], r.mu[2]])
                .expect("mirror row");
            assert_eq!(mirror.alpha, r.alpha);
        }
    }

    #[test]
    fn table_cyclic_cancellation() {
        // group by the multiset of (i, μ) pairs; each group sums to zero
        let rows = cascade_coefficients(&params()).unwrap();
        let mut sums: BTreeMap<Vec<(usize, i32)>, (f64, f64)> = BTreeMap::new();
        for r in &rows {
            let mut key: Vec<(usize, i32)> = (0..3).map(|j| (r.i[j], r.mu[j])).collect();
            key.sort();
            let e = sums.entry(key).or_insert((0.0, 0.0));
            e.0 += r.alpha;
            e.1 = e.1.max(r.alpha.abs());
        }
        assert_eq!(sums.len(), 5);
        for (k, (s, m)) in sums {
            assert!(s.abs() <= 1e-12 * m, "{k:?}: {s}");
        }
    }

    #[test]
    fn expanded_a_equation() {
        let p = params().with_window(2, 4);
        let s = cascade_spec(&p).unwrap();
        assert!(check_cancellation_structural(&s).pass);
        let mut st = StateVector::zeros(0.0, s.len());
        let ix = |i, n| s.index_of(i, n).unwrap();
        st.x[ix(4, 2)] = 0.7;
        st.x[ix(3, 3)] = 0.2;
        st.x[ix(4, 3)] = 0.3;
        let d = assemble_rhs(&s, &st).unwrap();
        let r3 = libm::pow(1.5, 7.5);
        let want = 8.0 * r3 * 0.49 - 1e4 * r3 * 0.2 * 0.3;
        assert!((d.x[ix(1, 3)] - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn boundary_manifest_lists_cross_scale_rows() {
        let (s, dropped) = cascade_spec_with_manifest(&params().with_window(5, 6)).unwrap();
        // row 13 at the bottom, rows 14 and 15 at the top
        assert_eq!(
            dropped,
            vec![DroppedTerm { row: 13, n: 5 }, DroppedTerm { row: 14, n: 6 }, DroppedTerm { row: 15, n: 6 }]
        );
        assert_eq!(s.interactions().len(), 16 * 2 - 3);
    }

    #[test]
    fn single_scale_matches_delay_circuit_without_hop() {
        let p = params().with_window(0, 0);
        let s = cascade_spec(&p).unwrap();
        let d = delay_circuit_spec(&DelayParams::new(8.0, 1e-2, Some(30.0)).unwrap()).unwrap();
        let x = [0.3, -0.2, 0.5, 0.7];
        let got = assemble_rhs(&s, &StateVector::new(0.0, x.to_vec())).unwrap().x;
        let mut x5 = x.to_vec();
        x5.push(0.0);
        let want = assemble_rhs(&d, &StateVector::new(0.0, x5)).unwrap().x;
        // the delay circuit's d also pumps into ã, which is absent here
        for j in 0..4 {
            assert!((got[j] - want[j]).abs() <= 1e-12 * want[j].abs().max(1.0), "{j}");
        }
    }

    #[test]
    fn viscous_rates() {
        let s = cascade_spec(&params().viscous(true).with_window(1, 2)).unwrap();
        assert_eq!(s.dissipation()[0], 1.5 * 1.5);
        assert_eq!(s.dissipation()[7], libm::pow(1.5, 4.0));
    }

    #[test]
    fn mode_order_is_stable_under_extension() {
        let a = cascade_spec(&params().with_window(3, 5)).unwrap();
        let b = cascade_spec(&params().with_window(3, 6)).unwrap();
        assert_eq!(&b.modes()[..a.len()], a.modes());
    }

    fn toy_trajectory() -> Trajectory {
        let modes = vec![cascade_mode(1, 3), cascade_mode(2, 4)];
        let samples = vec![
            Sample { t: 0.5, x: vec![1.0, 0.0], dxdt: vec![-0.1, 0.2], dissipation: 0.0 },
            Sample { t: 0.75, x: vec![0.9, 0.3], dxdt: vec![-0.3, 0.5], dissipation: 0.01 },
        ];
        Trajectory::from_samples(modes, samples, Default::default()).unwrap()
    }

    #[test]
    fn checkpoints_chain_through_ignition() {
        let p = CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 0).unwrap();
        let policy = WindowPolicy::new(1e-12, 8).unwrap();
        let run = cascade_run(&p, 2.55, &cascade_integrator_config(), &policy).unwrap();
        let ev = cascade_checkpoints(&run.trajectory, &p, 1e-9).unwrap();
        assert!(ev.len() >= 4, "{ev:?}");
        assert_eq!((ev[0].n, ev[0].t_n, ev[0].e_n), (0, 0.0, 1.0));
        for w in ev.windows(2) {
            assert_eq!(w[1].n, w[0].n + 1);
            assert!(w[1].t_n > w[0].t_n);
            let r = w[1].e_n / w[0].e_n;
            assert!((0.8..=1.25).contains(&r), "{r}");
        }
        assert!(cascade_checkpoints(&run.trajectory, &p, 0.0).is_err());
    }

    #[test]
    fn rescale_identity_and_round_trip() {
        let traj = toy_trajectory();
        let p = params();
        let same = rescale_run(&traj, &p, 0, 1.0, 0.0).unwrap();
        assert_eq!(same.samples(), traj.samples());
        assert_eq!(same.modes(), traj.modes());
        let r = rescale_run(&traj, &p, 3, 0.8, 0.5).unwrap();
        assert_eq!(r.modes()[0], cascade_mode(1, 0));
        assert_eq!(r.samples()[0].t, 0.0);
        assert_eq!(r.samples()[0].x[0], 1.25);
        let back = unrescale_run(&r, &p, 3, 0.8, 0.5).unwrap();
        assert_eq!(back.modes(), traj.modes());
        for (a, b) in back.samples().iter().zip(traj.samples()) {
            assert!((a.t - b.t).abs() <= 4.0 * f64::EPSILON * b.t.abs());
            for (u, v) in a.x.iter().chain(&a.dxdt).zip(b.x.iter().chain(&b.dxdt)) {
                assert!((u - v).abs() <= 4.0 * f64::EPSILON * v.abs());
            }
        }
        assert!(rescale_run(&traj, &p, 3, 0.0, 0.5).is_err());
    }
}
