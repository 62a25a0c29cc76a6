//! Executes one configured experiment and writes its artifacts.

use std::f64::consts::SQRT_2;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use dyadic_core::circuit::{check_cancellation_numeric, check_cancellation_structural, total_energy, CircuitSpec, ModeId, StateVector};
use dyadic_core::diagnostics::{blowup_extrapolate, energy_identity_residual, geometric_fit, monitor_proposition_bounds, BoundConstants, BlowupFit};
use dyadic_core::gates::{amplifier_closed_form, amplifier_terms, pump_closed_form, pump_terms, rotor_closed_form, rotor_terms, GateParams};
use dyadic_core::models::*;
use dyadic_core::trilinear::{fourier_coefficients, nondegeneracy_scan, FreqTriple};
use dyadic_core::{integrate, integrate_until, IntegratorConfig, Trajectory};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::*;
use crate::error::CliError;
use crate::output::{events_csv, timeseries_csv, Check, FileRecord, OutputDir};

/// Result of an experiment before anything is written.
pub struct Outcome {
    pub summary: Value,
    pub checks: Vec<Check>,
    pub trajectory: Option<Trajectory>,
    pub events: Option<Vec<TransitionEvent>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub kind: String,
    pub seed: u64,
    pub config: RunConfig,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// `ok` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub acceptance: Vec<Check>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.status == "ok" && self.acceptance.iter().all(|c| c.pass)
    }
}

pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Runs `cfg` into `dir`, always leaving a `manifest.json` behind. A failed
/// run returns its error after the manifest records it.
#[allow(clippy::result_large_err)]
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<RunManifest, (RunManifest, CliError)> {
    let started = now();
    let mut manifest = RunManifest {
        software: SOFTWARE.into(),
        kind: cfg.model.kind().into(),
        seed: cfg.seed(),
        config: cfg.clone(),
        started_unix: started,
        finished_unix: started,
        status: "failed".into(),
        error: None,
        acceptance: Vec::new(),
        files: Vec::new(),
    };
    let mut out = match OutputDir::create(dir) {
        Ok(o) => o,
        Err(e) => {
            manifest.error = Some(e.to_string());
            return Err((manifest, e));
        }
    };
    let result = execute(cfg).and_then(|o| {
        if let Some(t) = &o.trajectory {
            out.write("timeseries.csv", &timeseries_csv(t)?)?;
        }
        if let Some(e) = &o.events {
            out.write("events.csv", &events_csv(e))?;
        }
        out.write_json("summary.json", &o.summary)?;
        Ok(o.checks)
    });
    manifest.files = out.files().to_vec();
    manifest.finished_unix = now();
    let err = match result {
        Ok(checks) => {
            manifest.status = "ok".into();
            manifest.acceptance = checks;
            None
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            Some(e)
        }
    };
    if let Err(e) = out.write_json("manifest.json", &manifest) {
        return Err((manifest, e));
    }
    match err {
        None => Ok(manifest),
        Some(e) => Err((manifest, e)),
    }
}

/// Runs the experiment in memory.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let icfg = cfg.integrator_config()?;
    match &cfg.model {
        Model::GateOracle(g) => gate_oracle(g, &icfg),
        Model::Kp(k) => kp(k, &icfg, cfg.seed()),
        Model::Truncated(t) => truncated(t, &icfg),
        Model::Delay(d) => delay(d, &icfg),
        Model::Cascade(c) => cascade(c, &icfg, cfg.seed()),
        Model::Trilinear(t) => trilinear(t, cfg.seed()),
    }
}

fn max_energy_drift(traj: &Trajectory) -> f64 {
    let e0 = total_energy(&traj.initial_state());
    traj.samples()
        .iter()
        .map(|s| (total_energy(&StateVector::new(s.t, s.x.clone())) - e0).abs() / e0)
        .fold(0.0, f64::max)
}

/// Energy drift for inviscid specs, the dissipation identity otherwise.
fn energy_check(spec: &CircuitSpec, traj: &Trajectory) -> Result<(Check, Value), CliError> {
    if spec.is_inviscid() {
        let d = max_energy_drift(traj);
        Ok((Check::at_most("energy_drift", d, 1e-9), json!({ "energy_drift": d })))
    } else {
        let r = energy_identity_residual(traj)?;
        Ok((Check::at_most("energy_identity_residual", r, 1e-6), json!({ "energy_identity_residual": r })))
    }
}

fn cancellation(spec: &CircuitSpec, seed: u64) -> Result<(Vec<Check>, Value), CliError> {
    let s = check_cancellation_structural(spec);
    let n = check_cancellation_numeric(spec, 1000, seed)?;
    let checks = vec![
        Check::at_most("cancellation_structural", s.max_residual, 1e-12),
        Check::at_most("cancellation_numeric", n.max_relative, 1e-12),
    ];
    Ok((checks, json!({ "structural_residual": s.max_residual, "numeric_relative": n.max_relative })))
}

fn fit_json(fit: &BlowupFit) -> Value {
    json!({ "t_star": fit.t_star, "ratio": fit.ratio, "fit_residual": fit.fit_residual })
}

fn events_json(events: &[TransitionEvent]) -> Value {
    events.iter().map(|e| json!({ "n": e.n, "t_n": e.t_n, "e_n": e.e_n })).collect()
}

fn gate_oracle(g: &GateOracleConfig, icfg: &IntegratorConfig) -> Result<Outcome, CliError> {
    // one spec, three independent blocks on scales 0, 1, 2
    let m = |label: &str, i, n| ModeId::new(label, i, n);
    let (px, py) = (m("pump_x", 1, 0), m("pump_y", 2, 0));
    let (ax, ay) = (m("amp_x", 1, 1), m("amp_y", 2, 1));
    let (rx, ry, rz) = (m("rot_x", 1, 2), m("rot_y", 2, 2), m("rot_z", 3, 2));
    let gp = GateParams::new(g.alpha).map_err(CliError::config)?;
    let mut terms = pump_terms(&px, &py, gp)?;
    terms.extend(amplifier_terms(&ax, &ay, gp)?);
    terms.extend(rotor_terms(&rx, &ry, &rz, gp)?);
    let spec = CircuitSpec::new(3, vec![px, py, ax, ay, rx, ry, rz], terms, &[])?;
    let (a, alpha) = (g.amplitude, g.alpha);
    let [x0, y0, z0] = g.rotor_state;
    let (amp0, amp1) = amplifier_closed_form(a, alpha, g.t_peak, 0.0);
    let s0 = StateVector::new(0.0, vec![a, 0.0, amp0, amp1, x0, y0, z0]);
    let traj = integrate(&spec, &s0, g.t_end, icfg)?;

    let rel = |got: &[f64], want: &[f64]| {
        let d: f64 = got.iter().zip(want).map(|(u, v)| (u - v) * (u - v)).sum();
        let n: f64 = want.iter().map(|v| v * v).sum();
        (d / n).sqrt()
    };
    let mut worst = [0.0f64; 3];
    for s in traj.samples() {
        let (p0, p1) = pump_closed_form(a, alpha, s.t);
        let (q0, q1) = amplifier_closed_form(a, alpha, g.t_peak, s.t);
        let (r0, r1, r2) = rotor_closed_form(x0, y0, z0, alpha, s.t);
        worst[0] = worst[0].max(rel(&s.x[0..2], &[p0, p1]));
        worst[1] = worst[1].max(rel(&s.x[2..4], &[q0, q1]));
        worst[2] = worst[2].max(rel(&s.x[4..7], &[r0, r1, r2]));
    }
    let names = ["pump", "amplifier", "rotor"];
    let checks = names.iter().zip(worst).map(|(n, w)| Check::at_most(&format!("{n}_max_relative_error"), w, 1e-8)).collect();
    let summary = json!({
        "kind": "gate-oracle",
        "max_relative_error": { "pump": worst[0], "amplifier": worst[1], "rotor": worst[2] },
        "energy_drift": max_energy_drift(&traj),
        "steps": traj.step_stats().accepted,
    });
    Ok(Outcome { summary, checks, trajectory: Some(traj), events: None })
}

fn kp(k: &KpConfig, icfg: &IntegratorConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut p = KPParams::new(k.lambda, k.alpha_diss, k.n_lo, k.n_hi).map_err(CliError::config)?;
    if !k.viscous {
        p = p.inviscid();
    }
    let spec = kp_spec(&p)?;
    let x0 = k.initial.clone().unwrap_or_else(|| {
        let mut x = vec![0.0; spec.len()];
        x[0] = 1.0;
        x
    });
    let traj = integrate(&spec, &StateVector::new(0.0, x0), k.t_end, icfg)?;
    let (mut checks, canc) = cancellation(&spec, seed)?;
    let (energy, ejson) = energy_check(&spec, &traj)?;
    checks.push(energy);
    let summary = json!({
        "kind": "kp",
        "modes": spec.len(),
        "cancellation": canc,
        "energy": ejson,
        "final_energy": total_energy(&traj.final_state()),
        "dissipation_integral": traj.dissipation_integral(),
        "steps": traj.step_stats().accepted,
    });
    Ok(Outcome { summary, checks, trajectory: Some(traj), events: None })
}

fn truncated(t: &TruncatedConfig, icfg: &IntegratorConfig) -> Result<Outcome, CliError> {
    let p = t.params()?;
    let run = truncated_blowup_run(&p, icfg)?;
    let cps = &run.checkpoints;
    let amp_err = cps
        .iter()
        .enumerate()
        .map(|(k, c)| (c.e_n - p.lambda.powf(-p.delta * k as f64)).abs())
        .fold(0.0, f64::max);
    let gap_bound = 2.0 * p.lambda.powf(-p.delta).atanh();
    let gap_worst = cps
        .windows(2)
        .enumerate()
        .map(|(k, w)| (w[1].t_n - w[0].t_n) / (gap_bound * p.stage_time_scale(k)))
        .fold(0.0, f64::max);
    let times: Vec<f64> = cps.iter().map(|c| c.t_n).collect();
    let fit = if times.len() >= 3 { Some(geometric_fit(&times)?) } else { None };
    let target = p.lambda.powf(-1.0 + p.delta);
    let weighted = |c: &TransitionEvent| {
        run.trajectory.state_at(c.t_n).map_or(f64::NAN, |s| p.weighted_norm(&s.x))
    };
    let growth = weighted(cps.last().unwrap()) / weighted(&cps[0]);
    let growth_min = p.lambda.powf((p.delta_prime - p.delta) * p.k_max as f64);
    let consts = BoundConstants { c1: 1.0, rho1: p.lambda.powf(2.0 * p.delta), c2: 1.0, rho2: 2.0 };
    let bounds = monitor_proposition_bounds(&run.trajectory, cps, &consts)?;

    let mut checks = vec![
        Check::at_most("checkpoint_amplitude_error", amp_err, icfg.event_tol),
        Check::at_most("worst_gap_over_bound", gap_worst, 1.0),
        Check::holds("t_star_finite", run.t_star.is_finite()),
        Check::at_least("weighted_growth", growth, growth_min),
    ];
    if let Some(f) = &fit {
        checks.push(Check::at_most("gap_ratio_relative_error", (f.ratio - target).abs() / target, 0.05));
    }
    checks.extend(bounds.iter().map(|b| Check::at_most(&format!("bound_{}", b.id), b.ratio, 1.0)));
    let summary = json!({
        "kind": "truncated",
        "n0": p.n0,
        "k_max": p.k_max,
        "stage_eps": run.stage_eps,
        "stage_durations": run.stage_durations,
        "checkpoints": events_json(cps),
        "t_star": run.t_star,
        "gap_fit": fit.as_ref().map(fit_json),
        "target_ratio": target,
        "weighted_growth": growth,
        "bounds": bounds.iter().map(|b| json!({ "id": b.id, "worst_ratio": b.ratio, "pass": b.pass })).collect::<Vec<_>>(),
    });
    Ok(Outcome { summary, checks, trajectory: Some(run.trajectory.clone()), events: Some(run.checkpoints) })
}

fn delay(d: &DelayConfig, icfg: &IntegratorConfig) -> Result<Outcome, CliError> {
    let p = d.params()?;
    let spec = delay_circuit_spec(&p)?;
    let s0 = delay_initial_state();
    let traj = integrate(&spec, &s0, d.t_end, icfg)?;
    let first = |j: usize, level: f64| match integrate_until(&spec, &s0, |_, x| x[j] - level, d.t_end, icfg) {
        Ok((t, s, _)) => Ok(Some((t, s.x[j]))),
        Err(dyadic_core::Error::EventNotFound { .. }) => Ok(None),
        Err(e) => Err(CliError::from(e)),
    };
    let ignition = first(2, p.eps * p.eps)?;
    let rise = first(4, 0.1)?;
    let done = first(4, 0.9)?;
    let width = rise.zip(done).map(|((t1, _), (t9, _))| t9 - t1);
    let width_max = 5.0 / p.k.sqrt();
    let t_c = ignition.map(|(t, _)| t);
    let pre = t_c.map(|tc| {
        let quiet_end = tc - 1.0 / p.k.sqrt();
        traj.samples()
            .iter()
            .filter(|s| s.t <= quiet_end)
            .map(|s| (s.x[0] - 1.0).abs().max(s.x[1..].iter().fold(0.0, |m: f64, v| m.max(v.abs()))))
            .fold(0.0, f64::max)
    });
    let mut events = vec![TransitionEvent { n: 0, t_n: 0.0, e_n: 1.0 }];
    if let Some((t, v)) = done {
        events.push(TransitionEvent { n: 1, t_n: t, e_n: v });
    }
    let mut checks = vec![Check::holds("ignition_found", t_c.is_some())];
    checks.push(Check::at_most("transfer_width", width.unwrap_or(f64::INFINITY), width_max));
    if let Some(pre) = pre {
        checks.push(Check::at_most("pre_transition_deviation", pre, 0.05));
    }
    let (energy, ejson) = energy_check(&spec, &traj)?;
    checks.push(energy);
    let summary = json!({
        "kind": "delay",
        "gamma": p.gamma,
        "t_c": t_c,
        "t_c_deviation": t_c.map(|t| (t - SQRT_2).abs()),
        "a_tilde_rises_at": rise.map(|r| r.0),
        "a_tilde_completes_at": done.map(|r| r.0),
        "transfer_width": width,
        "transfer_width_limit": width_max,
        "pre_transition_deviation": pre,
        "final_a_tilde": traj.final_state().x[4],
        "energy": ejson,
    });
    Ok(Outcome { summary, checks, trajectory: Some(traj), events: Some(events) })
}

/// `E_{n+m}(t_n) / e_n²` for `m = -2..=2` at each checkpoint.
fn energy_report(traj: &Trajectory, events: &[TransitionEvent]) -> Vec<Value> {
    events
        .iter()
        .filter_map(|ev| {
            let s = traj.state_at(ev.t_n)?;
            let ratios: Vec<f64> = (-2..=2)
                .map(|m| {
                    let e: f64 = traj
                        .modes()
                        .iter()
                        .zip(&s.x)
                        .filter(|(md, _)| md.scale == ev.n + m)
                        .map(|(_, v)| 0.5 * v * v)
                        .sum();
                    e / (ev.e_n * ev.e_n)
                })
                .collect();
            Some(json!({ "n": ev.n, "t_n": ev.t_n, "offsets": [-2, -1, 0, 1, 2], "energy_over_e2": ratios }))
        })
        .collect()
}

fn cascade(c: &CascadeConfig, icfg: &IntegratorConfig, seed: u64) -> Result<Outcome, CliError> {
    let p = c.params()?;
    let policy = c.policy()?;
    let run = cascade_run(&p, c.end_time(&p), icfg, &policy)?;
    let traj = &run.trajectory;
    let events = cascade_checkpoints(traj, &p, c.checkpoint_tol)?;
    let gaps: Vec<f64> = events.windows(2).map(|w| w[1].t_n - w[0].t_n).collect();
    let decreasing = gaps.windows(2).all(|g| g[1] < g[0]);
    let fit = if events.len() >= 4 { Some(blowup_extrapolate(&events)?) } else { None };
    let (mut checks, canc) = cancellation(&run.spec, seed)?;
    checks.push(Check::at_least("checkpoints", events.len() as f64, 4.0));
    checks.push(Check::holds("gaps_decreasing", decreasing));
    let (energy, ejson) = energy_check(&run.spec, traj)?;
    checks.push(energy);
    let summary = json!({
        "kind": "cascade",
        "window": run.spec.scales(),
        "extensions": run.extensions.iter().map(|(t, n)| json!({ "t": t, "n_hi": n })).collect::<Vec<_>>(),
        "truncated_at": run.truncated_at,
        "checkpoints": events_json(&events),
        "gaps": gaps,
        "blowup_fit": fit.as_ref().map(fit_json),
        "energy_report": energy_report(traj, &events),
        "cancellation": canc,
        "energy": ejson,
        "steps": traj.step_stats().accepted,
    });
    Ok(Outcome { summary, checks, trajectory: Some(run.trajectory.clone()), events: Some(events) })
}

fn trilinear(t: &TrilinearConfig, seed: u64) -> Result<Outcome, CliError> {
    let eta = t.triple()?;
    let fc = fourier_coefficients(&eta, t.grid)?;
    let (pattern, min) = fc.min_abs();
    let scan = nondegeneracy_scan(&eta, t.scan_radius, t.scan_samples, seed)?;
    let mut checks = vec![Check::at_least("scan_min_abs_c", scan.min_abs_c, 0.05)];
    let mut summary = json!({
        "kind": "trilinear",
        "eta": eta.eta.map(|v| v.0),
        "coefficients": fc.coeffs.iter().map(|(s, c)| json!({ "sigma": s.0, "re": c.re, "im": c.im, "abs": c.norm() })).collect::<Vec<_>>(),
        "max_off_pattern": fc.max_off_pattern,
        "min_abs_c": min,
        "min_pattern": pattern.0,
        "scan": {
            "radius": t.scan_radius,
            "samples": scan.samples,
            "min_abs_c": scan.min_abs_c,
            "argmin_eta": scan.argmin.eta.map(|v| v.0),
            "argmin_pattern": scan.argmin_pattern.0,
        },
    });
    if eta == FreqTriple::base() {
        let (r2m, r2p) = (SQRT_2 - 1.0, SQRT_2 + 1.0);
        let want = [r2m, r2m, 1.0, 1.0, 1.0, 1.0, r2p, r2p];
        let err = fc.magnitudes().iter().zip(want).map(|(m, w)| (8.0 * m - w).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("base_magnitude_multiset_error", err, 1e-6));
        summary["base_magnitude_multiset_error"] = json!(err);
    }
    Ok(Outcome { summary, checks, trajectory: None, events: None })
}
