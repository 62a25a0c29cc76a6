use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyadic_core::circuit::{check_cancellation_numeric, check_cancellation_structural};
use dyadic_core::diagnostics::blowup_extrapolate;
use dyadic_lab::config::{GateOracleConfig, Model, TrilinearConfig};
use dyadic_lab::output::{parse_events_csv, Check};
use dyadic_lab::spec_io::{bundled_cascade_spec, parse_spec, serialize_spec};
use dyadic_lab::sweep::{expand, run_sweep};
use dyadic_lab::{execute, parse_config, run_to_dir, CliError, RunConfig};
use serde_json::json;

/// Numerical lab for energy-conserving quadratic ODE circuits.
#[derive(Parser)]
#[command(name = "dyadic-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Overrides the seed of every pseudo-random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppresses the report on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Exit with status 4 when any self-check fails.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one configured experiment.
    Simulate {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `[output] dir`; default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints the structural cancellation report of a circuit spec.
    VerifyCancellation {
        /// Spec file; the bundled cascade table when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Random unit states for the numeric check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Prints the spec in file format instead of checking it.
        #[arg(long)]
        dump: bool,
    },
    /// Compares integrated gates with their closed forms.
    GatesDemo {
        /// Also write the run files to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refits the blowup time from an events file.
    Extrapolate {
        /// CSV with header `n,t_n,e_n`.
        #[arg(long)]
        events: PathBuf,
    },
    /// Fourier coefficients at the base frequency triple and a perturbation scan.
    ScanNondegeneracy {
        /// Perturbation radius around the base frequencies.
        #[arg(long, default_value_t = 1e-3)]
        radius: f64,
        /// Random perturbations to evaluate.
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Quadrature points per torus direction.
        #[arg(long, default_value_t = 8)]
        grid: usize,
    },
    /// Runs every point of a `[sweep]` grid in parallel.
    Sweep {
        /// Run configuration with a `[sweep]` table.
        #[arg(long)]
        config: PathBuf,
        /// Root directory for the per-run directories [default: sweep-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn say(common: &Common, text: impl AsRef<str>) {
    if !common.quiet {
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let _ = writeln!(std::io::stdout(), "{}", text.as_ref());
    }
}

fn report_checks(common: &Common, checks: &[Check]) -> Result<(), CliError> {
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        say(common, format!("[{tag}] {}: {:e} (limit {:e})", c.name, c.value, c.limit));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if common.check && !failed.is_empty() {
        return Err(CliError::Acceptance(failed.join(", ")));
    }
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(&read(path)?)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_in(common: &Common, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let manifest = run_to_dir(cfg, out).map_err(|(_, e)| e)?;
    say(common, format!("{} run written to {}", manifest.kind, out.display()));
    report_checks(common, &manifest.acceptance)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config, common.seed)?;
            let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            run_in(common, &cfg, &dir)
        }
        Command::VerifyCancellation { spec, samples, dump } => {
            let spec = match spec {
                Some(p) => parse_spec(&read(&p)?)?,
                None => bundled_cascade_spec(),
            };
            if dump {
                let _ = write!(std::io::stdout(), "{}", serialize_spec(&spec)?);
                return Ok(());
            }
            let s = check_cancellation_structural(&spec);
            let n = check_cancellation_numeric(&spec, samples, common.seed.unwrap_or(0))?;
            let violating: Vec<_> = s
                .violating_triples
                .iter()
                .map(|v| json!({ "modes": v.modes.iter().map(|m| m.label.clone()).collect::<Vec<_>>(), "sum": v.sum, "relative": v.relative }))
                .collect();
            say(
                common,
                serde_json::to_string_pretty(&json!({
                    "modes": spec.len(),
                    "terms": spec.interactions().len(),
                    "structural": { "pass": s.pass, "max_residual": s.max_residual, "violating_triples": violating },
                    "numeric": { "samples": samples, "max_residual": n.max_residual, "max_relative": n.max_relative },
                }))
                .unwrap(),
            );
            report_checks(
                common,
                &[
                    Check::holds("structural_cancellation", s.pass),
                    Check::at_most("numeric_cancellation", n.max_relative, 1e-12),
                ],
            )
        }
        Command::GatesDemo { out } => {
            let cfg = RunConfig {
                seed: common.seed,
                model: Model::GateOracle(GateOracleConfig::default()),
                integrator: Default::default(),
                output: Default::default(),
            };
            match out {
                Some(dir) => run_in(common, &cfg, &dir),
                None => {
                    let o = execute(&cfg)?;
                    say(common, serde_json::to_string_pretty(&o.summary).unwrap());
                    report_checks(common, &o.checks)
                }
            }
        }
        Command::Extrapolate { events } => {
            let ev = parse_events_csv(&read(&events)?)?;
            let fit = blowup_extrapolate(&ev)?;
            say(
                common,
                serde_json::to_string_pretty(&json!({
                    "events": ev.len(),
                    "t_star": fit.t_star,
                    "ratio": fit.ratio,
                    "fit_residual": fit.fit_residual,
                    "blowup_detected": fit.blowup_detected(),
                }))
                .unwrap(),
            );
            report_checks(common, &[Check::holds("blowup_detected", fit.blowup_detected())])
        }
        Command::ScanNondegeneracy { radius, samples, grid } => {
            let cfg = RunConfig {
                seed: common.seed,
                model: Model::Trilinear(TrilinearConfig { eta1: None, eta2: None, grid, scan_radius: radius, scan_samples: samples }),
                integrator: Default::default(),
                output: Default::default(),
            };
            let o = execute(&cfg)?;
            say(common, serde_json::to_string_pretty(&o.summary).unwrap());
            report_checks(common, &o.checks)
        }
        Command::Sweep { config, out } => {
            let points = expand(&read(&config)?, common.seed)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("sweep-out"));
            let entries = run_sweep(&points, &dir)?;
            for e in &entries {
                let status = e.error.as_deref().unwrap_or(&e.status);
                say(common, format!("{} {}: {status}", e.dir, toml::to_string(&e.overrides).unwrap_or_default().trim().replace('\n', ", ")));
            }
            // the worst failure decides the exit status
            if let Some(e) = entries.iter().filter(|e| e.exit_status != 0).max_by_key(|e| e.exit_status) {
                return Err(CliError::Sweep {
                    status: e.exit_status,
                    message: format!("{}: {}", e.dir, e.error.clone().unwrap_or_default()),
                });
            }
            let failed: Vec<&str> = entries.iter().filter(|e| !e.acceptance_pass).map(|e| e.dir.as_str()).collect();
            if common.check && !failed.is_empty() {
                return Err(CliError::Acceptance(format!("self-checks failed in {}", failed.join(", "))));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
