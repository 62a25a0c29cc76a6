//! Acceptance suite: one line per criterion with its measured figures and
//! runtime. Failures are reported, not hidden; set `ACCEPTANCE_STRICT=1` to
//! turn any failing criterion into a nonzero exit status.

use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

use dyadic_core::circuit::{check_cancellation_numeric, check_cancellation_structural, total_energy};
use dyadic_core::diagnostics::{detect_transitions, energy_identity_residual, DEFAULT_DOMINANCE};
use dyadic_core::gates::{
    amplifier_closed_form, amplifier_terms, pump_closed_form, pump_terms, rotor_closed_form, rotor_terms, GateParams,
};
use dyadic_core::models::*;
use dyadic_core::trilinear::{fourier_coefficients, nondegeneracy_scan, FreqTriple, SCAN_GRID};
use dyadic_core::integrator::WindowPolicy;
use dyadic_core::{integrate, integrate_until, CircuitSpec, Error, IntegratorConfig, ModeId, StateVector, Trajectory};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Outcome, Error>;

fn main() {
    let criteria: [(&str, Check, Duration); 8] = [
        ("1 gate oracles", gate_oracles, Duration::from_secs(5)),
        ("2 conservation and energy identity", conservation, Duration::from_secs(30)),
        ("3 cancellation audit", cancellation_audit, Duration::from_secs(1)),
        ("4 truncated blowup", truncated_blowup, Duration::from_secs(60)),
        ("5 delay-circuit transition", delay_transition, Duration::from_secs(120)),
        ("6 cascade chaining", cascade_chaining, Duration::from_secs(600)),
        ("7 self-similarity", self_similarity, Duration::from_secs(60)),
        ("8 non-degeneracy", non_degeneracy, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let t0 = Instant::now();
        let result = check();
        let elapsed = t0.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed < budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {detail} ({:.3} s, budget {} s)", elapsed.as_secs_f64(), budget.as_secs());
    }
    println!("acceptance: {} of {} criteria pass", 8 - failed, 8);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

fn simple(label: &str, c: usize) -> ModeId {
    ModeId::simple(label, c)
}

fn grid_config(rtol: f64, dt: f64) -> IntegratorConfig {
    IntegratorConfig { rtol, atol: 1e-14, sample_interval: Some(dt), ..IntegratorConfig::default() }
}

/// Largest `‖x - exact(t)‖ / ‖exact(t)‖` over the samples.
fn worst_relative(traj: &Trajectory, exact: impl Fn(f64) -> Vec<f64>) -> f64 {
    traj.samples()
        .iter()
        .map(|s| {
            let e = exact(s.t);
            let diff: f64 = s.x.iter().zip(&e).map(|(a, b)| (a - b) * (a - b)).sum();
            let norm: f64 = e.iter().map(|v| v * v).sum();
            (diff / norm).sqrt()
        })
        .fold(0.0, f64::max)
}

fn gate_oracles() -> Result<Outcome, Error> {
    let cfg = grid_config(1e-10, 0.05);
    let (x, y, z) = (simple("x", 1), simple("y", 2), simple("z", 3));

    let pump = CircuitSpec::new(2, vec![x.clone(), y.clone()], pump_terms(&x, &y, GateParams::new(1.3)?)?, &[])?;
    let traj = integrate(&pump, &StateVector::new(0.0, vec![1.0, 0.0]), 5.0, &cfg)?;
    let e_pump = worst_relative(&traj, |t| {
        let (a, b) = pump_closed_form(1.0, 1.3, t);
        vec![a, b]
    });

    let amp = CircuitSpec::new(2, vec![x.clone(), y.clone()], amplifier_terms(&x, &y, GateParams::new(0.8)?)?, &[])?;
    let (a0, b0) = amplifier_closed_form(1.0, 0.8, 3.0, 0.0);
    let traj = integrate(&amp, &StateVector::new(0.0, vec![a0, b0]), 5.0, &cfg)?;
    let e_amp = worst_relative(&traj, |t| {
        let (a, b) = amplifier_closed_form(1.0, 0.8, 3.0, t);
        vec![a, b]
    });

    let rotor = CircuitSpec::new(
        3,
        vec![x.clone(), y.clone(), z.clone()],
        rotor_terms(&x, &y, &z, GateParams::new(2.0)?)?,
        &[],
    )?;
    let traj = integrate(&rotor, &StateVector::new(0.0, vec![0.6, -0.3, 1.5]), 5.0, &cfg)?;
    let e_rot = worst_relative(&traj, |t| {
        let (a, b, c) = rotor_closed_form(0.6, -0.3, 1.5, 2.0, t);
        vec![a, b, c]
    });

    let worst = e_pump.max(e_amp).max(e_rot);
    Ok(Outcome {
        pass: worst <= 1e-8,
        detail: format!("max relative error pump {e_pump:.2e}, amplifier {e_amp:.2e}, rotor {e_rot:.2e} (limit 1e-8)"),
    })
}

fn energy_drift(spec: &CircuitSpec, x0: Vec<f64>, cfg: &IntegratorConfig) -> Result<f64, Error> {
    let s0 = StateVector::new(0.0, x0);
    let e0 = total_energy(&s0);
    let traj = integrate(spec, &s0, 100.0, cfg)?;
    Ok(traj
        .samples()
        .iter()
        .map(|s| (total_energy(&StateVector::new(s.t, s.x.clone())) - e0).abs() / e0)
        .fold(0.0, f64::max))
}

fn conservation() -> Result<Outcome, Error> {
    let (x, y, z) = (simple("x", 1), simple("y", 2), simple("z", 3));
    let cfg = IntegratorConfig { rtol: 1e-12, atol: 1e-16, ..IntegratorConfig::default() };
    let xy = vec![x.clone(), y.clone()];
    let mut drifts: Vec<(&str, f64)> = Vec::new();

    let pump = CircuitSpec::new(2, xy.clone(), pump_terms(&x, &y, GateParams::new(1.0)?)?, &[])?;
    drifts.push(("pump", energy_drift(&pump, vec![1.0, 0.0], &cfg)?));
    let amp = CircuitSpec::new(2, xy, amplifier_terms(&x, &y, GateParams::new(1.0)?)?, &[])?;
    drifts.push(("amplifier", energy_drift(&amp, vec![1.0, 1e-3], &cfg)?));
    let rotor = CircuitSpec::new(3, vec![x.clone(), y.clone(), z.clone()], rotor_terms(&x, &y, &z, GateParams::new(1.0)?)?, &[])?;
    drifts.push(("rotor", energy_drift(&rotor, vec![1.0, 0.0, 1.0], &cfg)?));

    let kp = kp_spec(&KPParams::new(2.0, 0.25, 0, 7)?.inviscid())?;
    let mut x0 = vec![0.0; kp.len()];
    x0[0] = 1.0;
    drifts.push(("kp", energy_drift(&kp, x0, &cfg)?));

    let delay = delay_circuit_spec(&DelayParams::new(10.0, 1e-3, Some(30.0))?)?;
    let dcfg = IntegratorConfig { rtol: 1e-12, ..delay_integrator_config() };
    drifts.push(("delay", energy_drift(&delay, delay_initial_state().x, &dcfg)?));

    let cp = CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 0)?;
    let cascade = cascade_spec(&cp)?;
    let ccfg = IntegratorConfig { rtol: 1e-12, ..cascade_integrator_config() };
    drifts.push(("cascade", energy_drift(&cascade, cascade_initial_state(&cascade, 0)?.x, &ccfg)?));

    let worst = drifts.iter().map(|d| d.1).fold(0.0, f64::max);

    let visc = kp_spec(&KPParams::new(2.0, 0.25, 0, 7)?)?;
    let mut x0 = vec![0.0; visc.len()];
    x0[0] = 1.0;
    let traj = integrate(&visc, &StateVector::new(0.0, x0), 100.0, &IntegratorConfig::default())?;
    let identity = energy_identity_residual(&traj)?;

    let list: Vec<String> = drifts.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect();
    Ok(Outcome {
        pass: worst <= 1e-9 && identity <= 1e-6,
        detail: format!(
            "inviscid drift over [0,100]: {} (limit 1e-9); viscous KP identity residual {identity:.2e} (limit 1e-6)",
            list.join(", ")
        ),
    })
}

fn cancellation_audit() -> Result<Outcome, Error> {
    let p = CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 0)?.with_window(0, 4);
    let spec = cascade_spec(&p)?;
    let structural = check_cancellation_structural(&spec);
    let numeric = check_cancellation_numeric(&spec, 1000, 7)?;
    Ok(Outcome {
        pass: structural.pass && structural.max_residual <= 1e-12 && numeric.max_relative <= 1e-12,
        detail: format!(
            "structural max residual {:.2e}, numeric max relative {:.2e} over 1000 states (limit 1e-12)",
            structural.max_residual, numeric.max_relative
        ),
    })
}

fn truncated_blowup() -> Result<Outcome, Error> {
    let lambda: f64 = 2.0;
    let (delta, delta_p) = (0.25, 0.3);
    // smallest n0 with every stage ε at most 0.01
    let mut n0 = 1;
    let p = loop {
        let p = TruncatedParams { lambda, alpha_diss: 0.25, delta, delta_prime: delta_p, n0, k_max: 12 };
        if p.stage_eps(0) <= 0.01 {
            break p;
        }
        n0 += 1;
    };
    let cfg = IntegratorConfig { event_tol: 1e-9, ..IntegratorConfig::default() };
    let run = truncated_blowup_run(&p, &cfg)?;

    let amp_err = run
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, c)| (c.e_n - lambda.powf(-delta * k as f64)).abs())
        .fold(0.0, f64::max);
    let gap_bound = 2.0 * (lambda.powf(-delta)).atanh();
    let gap_worst = run
        .checkpoints
        .windows(2)
        .enumerate()
        .map(|(k, w)| (w[1].t_n - w[0].t_n) / (gap_bound * p.stage_time_scale(k)))
        .fold(0.0, f64::max);
    let times: Vec<f64> = run.checkpoints.iter().map(|c| c.t_n).collect();
    let fit = dyadic_core::diagnostics::geometric_fit(&times)?;
    let target = lambda.powf(-1.0 + delta);
    let ratio_err = (fit.ratio - target).abs() / target;

    let at = |k: usize| {
        let t = run.checkpoints[k].t_n;
        let s = run.trajectory.samples().iter().find(|s| s.t == t).expect("checkpoint is a sample");
        p.weighted_norm(&s.x)
    };
    let growth = at(12) / at(0);
    let growth_min = lambda.powf((delta_p - delta) * 12.0);

    let pass = amp_err <= 1e-9 && gap_worst <= 1.0 && ratio_err <= 0.05 && run.t_star.is_finite() && growth >= growth_min;
    Ok(Outcome {
        pass,
        detail: format!(
            "n0 {n0}; amplitude error {amp_err:.1e} (limit 1e-9); worst gap / bound {gap_worst:.3}; ratio {:.4} vs {target:.4} ({:.2}% , limit 5%); T* {:.6e}; weighted growth {growth:.4} (min {growth_min:.4})",
            fit.ratio,
            100.0 * ratio_err,
            run.t_star
        ),
    })
}

fn delay_transition() -> Result<Outcome, Error> {
    let (eps, k) = (1e-3, 10.0f64);
    let width_max = 5.0 / k.sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut prev_dev = f64::INFINITY;
    for gamma in [20.0, 30.0, 40.0] {
        let p = DelayParams::new(k, eps, Some(gamma))?;
        let spec = delay_circuit_spec(&p)?;
        let cfg = delay_integrator_config();
        let s0 = delay_initial_state();
        let (tc, _, _) = integrate_until(&spec, &s0, |_, x| x[2] - eps * eps, 3.0, &cfg)?;
        let (t1, _, _) = integrate_until(&spec, &s0, |_, x| x[4] - 0.1, 4.0, &cfg)?;
        let width = match integrate_until(&spec, &s0, |_, x| x[4] - 0.9, t1 + width_max, &cfg) {
            Ok((t9, _, _)) => Some(t9 - t1),
            Err(Error::EventNotFound { .. }) => None,
            Err(e) => return Err(e),
        };
        let traj = integrate(&spec, &s0, tc, &cfg)?;
        let quiet_end = tc - 1.0 / k.sqrt();
        let pre = traj
            .samples()
            .iter()
            .filter(|s| s.t <= quiet_end)
            .map(|s| (s.x[0] - 1.0).abs().max(s.x[1..].iter().fold(0.0, |m: f64, v| m.max(v.abs()))))
            .fold(0.0, f64::max);
        let dev = (tc - SQRT_2).abs();
        let ok_width = width.is_some_and(|w| w <= width_max);
        let ok = ok_width && dev < prev_dev && pre <= 0.05;
        pass &= ok;
        prev_dev = dev;
        let w = width.map_or("ã stays below 0.9".to_string(), |w| format!("width {w:.3}"));
        parts.push(format!("Γ={gamma}: t_c {tc:.4}, |t_c-√2| {dev:.4}, {w}, pre-transition max deviation {pre:.1e}"));
    }
    pass &= prev_dev <= 0.25;
    Ok(Outcome { pass, detail: format!("{} (width limit {width_max:.3})", parts.join("; ")) })
}

struct CascadeMeasure {
    events: Vec<TransitionEvent>,
    worst_ratio: f64,
    decreasing: bool,
    upper_energy: f64,
    /// Events from the first-local-maximum detector, for comparison.
    peak_events: Vec<TransitionEvent>,
}

fn measure_cascade(p: &CascadeParams) -> Result<CascadeMeasure, Error> {
    let policy = WindowPolicy::new(1e-12, p.n0 + 20)?;
    let t_end = 10.0 / p.rate_at(p.n0);
    let run = cascade_run(p, t_end, &cascade_integrator_config(), &policy)?;
    let traj = &run.trajectory;
    let events = cascade_checkpoints(traj, p, 1e-9)?;
    let gaps: Vec<f64> = events.windows(2).map(|w| w[1].t_n - w[0].t_n).collect();
    let decreasing = gaps.windows(2).all(|g| g[1] < g[0]);
    let mut worst_ratio: f64 = 1.0;
    for i in 0..gaps.len().saturating_sub(1) {
        let rho = p.scale_ratio().powf(-2.5) * events[i].e_n / events[i + 1].e_n;
        let r = gaps[i + 1] / gaps[i] / rho;
        if (r - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = r;
        }
    }
    let mut upper_energy: f64 = 0.0;
    for e in &events {
        let s = traj.state_at(e.t_n).expect("checkpoint inside the record");
        let (mut upper, mut total) = (0.0, 0.0);
        for (m, v) in traj.modes().iter().zip(&s.x) {
            total += 0.5 * v * v;
            if m.scale >= e.n + 2 {
                upper += 0.5 * v * v;
            }
        }
        upper_energy = upper_energy.max(upper / total);
    }
    let peak_events = detect_transitions(traj, DEFAULT_DOMINANCE)?;
    Ok(CascadeMeasure { events, worst_ratio, decreasing, upper_energy, peak_events })
}

/// Largest relative checkpoint time difference over scales present in both.
fn time_deviation(a: &[TransitionEvent], b: &[TransitionEvent]) -> f64 {
    let mut dev: f64 = 0.0;
    for e in a.iter().filter(|e| e.t_n > 0.0) {
        match b.iter().find(|v| v.n == e.n) {
            Some(v) => dev = dev.max((v.t_n - e.t_n).abs() / e.t_n),
            None => dev = f64::INFINITY,
        }
    }
    dev
}

fn cascade_chaining() -> Result<Outcome, Error> {
    let base = CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 40)?;
    let inv = measure_cascade(&base)?;
    let vis = measure_cascade(&base.viscous(true))?;
    let time_dev = time_deviation(&inv.events, &vis.events);
    let peak_dev = time_deviation(&inv.peak_events, &vis.peak_events);
    let ok = |m: &CascadeMeasure| {
        m.events.len() >= 4 && m.decreasing && (0.5..=1.5).contains(&m.worst_ratio) && m.upper_energy <= 1e-3
    };
    let describe = |m: &CascadeMeasure| {
        format!(
            "{} checkpoints (n {}..{}), gaps decreasing {}, worst gap ratio / ρ {:.3}, max upper-scale share {:.1e}",
            m.events.len(),
            m.events.first().map_or(0, |e| e.n),
            m.events.last().map_or(0, |e| e.n),
            m.decreasing,
            m.worst_ratio,
            m.upper_energy
        )
    };
    Ok(Outcome {
        pass: ok(&inv) && ok(&vis) && time_dev <= 0.01,
        detail: format!(
            "inviscid: {}; viscous: {}; checkpoint time deviation {time_dev:.1e} (limit 1e-2); first-local-maximum detector deviation {peak_dev:.1e} (informational)",
            describe(&inv),
            describe(&vis)
        ),
    })
}

fn self_similarity() -> Result<Outcome, Error> {
    let base = CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 40)?;
    let policy = WindowPolicy::new(1e-12, 80)?;
    let runs: Vec<Trajectory> = [40, 41]
        .into_iter()
        .map(|n0| {
            let p = CascadeParams { n0, ..base };
            let r = p.rate_at(n0);
            let cfg = IntegratorConfig { sample_interval: Some(0.01 / r), ..cascade_integrator_config() };
            let run = cascade_run(&p, 2.4 / r, &cfg, &policy)?;
            rescale_run(&run.trajectory, &p, n0, 1.0, 0.0)
        })
        .collect::<Result<_, _>>()?;
    let (a, b) = (&runs[0], &runs[1]);
    let mut worst: f64 = if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    for (sa, sb) in a.samples().iter().zip(b.samples()) {
        worst = worst.max((sa.t - sb.t).abs());
        for (j, m) in a.modes().iter().enumerate() {
            let vb = b.index_of_label(&m.label).map_or(0.0, |i| sb.x[i]);
            worst = worst.max((sa.x[j] - vb).abs());
        }
        for (i, m) in b.modes().iter().enumerate() {
            if a.index_of_label(&m.label).is_none() {
                worst = worst.max(sb.x[i].abs());
            }
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-8,
        detail: format!(
            "{} rescaled samples to τ = 2.4, max mode-by-mode difference {worst:.2e} (limit 1e-8)",
            a.len().min(b.len())
        ),
    })
}

fn non_degeneracy() -> Result<Outcome, Error> {
    let fc = fourier_coefficients(&FreqTriple::base(), SCAN_GRID)?;
    let (r2m, r2p) = (SQRT_2 - 1.0, SQRT_2 + 1.0);
    let want = [r2m, r2m, 1.0, 1.0, 1.0, 1.0, r2p, r2p];
    let err = fc.magnitudes().iter().zip(want).map(|(m, w)| (8.0 * m - w).abs()).fold(0.0, f64::max);
    let min = fc.min_abs().1;
    let scan = nondegeneracy_scan(&FreqTriple::base(), 1e-3, 500, 11)?;
    Ok(Outcome {
        pass: err <= 1e-6 && (min - 0.05178).abs() <= 5e-6 && scan.min_abs_c >= 0.05,
        detail: format!(
            "magnitude multiset error {err:.1e} (limit 1e-6); min |c_σ| {min:.6}; scan over {} samples min |c_σ| {:.6} (floor 0.05)",
            scan.samples, scan.min_abs_c
        ),
    })
}
