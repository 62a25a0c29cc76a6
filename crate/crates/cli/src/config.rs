//! Run configuration: a TOML document with a `[model]` section selected by
//! `kind`, an optional `[integrator]` section overriding the kind's default
//! tolerances, and an optional `[output]` section.

use std::path::PathBuf;

use dyadic_core::gates::GateParams;
use dyadic_core::integrator::WindowPolicy;
use dyadic_core::models::{CascadeParams, DelayParams, KPParams, TruncatedParams};
use dyadic_core::trilinear::{FreqTriple, Vec3, MIN_GRID};
use dyadic_core::{IntegratorConfig, ModeSelector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every pseudo-random draw of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model: Model,
    #[serde(default, skip_serializing_if = "IntegratorSection::is_empty")]
    pub integrator: IntegratorSection,
    #[serde(default, skip_serializing_if = "OutputSection::is_empty")]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    GateOracle(GateOracleConfig),
    Kp(KpConfig),
    Truncated(TruncatedConfig),
    Delay(DelayConfig),
    Cascade(CascadeConfig),
    Trilinear(TrilinearConfig),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::GateOracle(_) => "gate-oracle",
            Model::Kp(_) => "kp",
            Model::Truncated(_) => "truncated",
            Model::Delay(_) => "delay",
            Model::Cascade(_) => "cascade",
            Model::Trilinear(_) => "trilinear",
        }
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Pump from `(amplitude, 0)`, amplifier peaking at `t_peak`, rotor from
/// `rotor_state`, all with coupling `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateOracleConfig {
    #[serde(default = "default_one")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub amplitude: f64,
    #[serde(default = "GateOracleConfig::default_t_peak")]
    pub t_peak: f64,
    #[serde(default = "GateOracleConfig::default_rotor_state")]
    pub rotor_state: [f64; 3],
    #[serde(default = "GateOracleConfig::default_t_end")]
    pub t_end: f64,
}

impl GateOracleConfig {
    fn default_t_peak() -> f64 {
        3.0
    }
    fn default_rotor_state() -> [f64; 3] {
        [0.6, -0.3, 1.5]
    }
    fn default_t_end() -> f64 {
        5.0
    }
}

impl Default for GateOracleConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            amplitude: 1.0,
            t_peak: Self::default_t_peak(),
            rotor_state: Self::default_rotor_state(),
            t_end: Self::default_t_end(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpConfig {
    pub lambda: f64,
    pub alpha_diss: f64,
    pub n_lo: i32,
    pub n_hi: i32,
    #[serde(default = "default_true")]
    pub viscous: bool,
    pub t_end: f64,
    /// One amplitude per scale; defaults to a unit amplitude at `n_lo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedConfig {
    pub lambda: f64,
    pub alpha_diss: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub k_max: usize,
    /// Omitted: the smallest `n0` whose stage dissipations stay at or below
    /// `max_stage_eps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<i32>,
    #[serde(default = "TruncatedConfig::default_max_stage_eps")]
    pub max_stage_eps: f64,
}

impl TruncatedConfig {
    fn default_max_stage_eps() -> f64 {
        0.01
    }

    pub fn params(&self) -> Result<TruncatedParams, CliError> {
        let with = |n0| TruncatedParams {
            lambda: self.lambda,
            alpha_diss: self.alpha_diss,
            delta: self.delta,
            delta_prime: self.delta_prime,
            n0,
            k_max: self.k_max,
        };
        let p = match self.n0 {
            Some(n0) => with(n0),
            None => {
                if !(self.max_stage_eps > 0.0 && self.max_stage_eps < 1.0) {
                    return Err(CliError::invalid("max_stage_eps must lie in (0, 1)"));
                }
                // validate first so that a bad λ or α cannot make the search diverge
                with(i32::MAX / 4).validate().map_err(CliError::config)?;
                let mut n0 = 1;
                while with(n0).stage_eps(0) > self.max_stage_eps {
                    n0 += 1;
                }
                with(n0)
            }
        };
        p.validate().map_err(CliError::config)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    pub k: f64,
    pub eps: f64,
    /// Defaults to `K^10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "DelayConfig::default_t_end")]
    pub t_end: f64,
}

impl DelayConfig {
    fn default_t_end() -> f64 {
        4.0
    }

    pub fn params(&self) -> Result<DelayParams, CliError> {
        DelayParams::new(self.k, self.eps, self.gamma).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub eps0: f64,
    pub eps: f64,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub n0: i32,
    #[serde(default)]
    pub viscous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_diss_exponent: Option<f64>,
    /// Defaults to ten time units of scale `n0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "CascadeConfig::default_threshold")]
    pub window_threshold: f64,
    /// Defaults to `n0 + 20`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_scale: Option<i32>,
    /// Checkpoint crossing tolerance relative to the local time unit.
    #[serde(default = "CascadeConfig::default_checkpoint_tol")]
    pub checkpoint_tol: f64,
}

impl CascadeConfig {
    fn default_threshold() -> f64 {
        1e-12
    }
    fn default_checkpoint_tol() -> f64 {
        1e-9
    }

    pub fn params(&self) -> Result<CascadeParams, CliError> {
        let mut p = CascadeParams::new(self.eps0, self.eps, self.k, self.gamma, self.n0)
            .map_err(CliError::config)?
            .viscous(self.viscous);
        if let Some(a) = self.alpha_diss_exponent {
            p.alpha_diss_exponent = a;
            p.validate().map_err(CliError::config)?;
        }
        Ok(p)
    }

    pub fn policy(&self) -> Result<WindowPolicy, CliError> {
        WindowPolicy::new(self.window_threshold, self.max_scale.unwrap_or(self.n0 + 20)).map_err(CliError::config)
    }

    pub fn end_time(&self, p: &CascadeParams) -> f64 {
        self.t_end.unwrap_or_else(|| 10.0 / p.rate_at(p.n0))
    }
}

/// Frequency triple `(η₁, η₂, -η₁-η₂)`; omitted vectors give the base triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrilinearConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<[f64; 3]>,
    #[serde(default = "TrilinearConfig::default_grid")]
    pub grid: usize,
    #[serde(default = "TrilinearConfig::default_radius")]
    pub scan_radius: f64,
    #[serde(default = "TrilinearConfig::default_samples")]
    pub scan_samples: usize,
}

impl TrilinearConfig {
    fn default_grid() -> usize {
        8
    }
    fn default_radius() -> f64 {
        1e-3
    }
    fn default_samples() -> usize {
        500
    }

    pub fn triple(&self) -> Result<FreqTriple, CliError> {
        match (self.eta1, self.eta2) {
            (None, None) => Ok(FreqTriple::base()),
            (Some(a), Some(b)) => FreqTriple::closing(Vec3(a), Vec3(b)).map_err(CliError::config),
            _ => Err(CliError::invalid("eta1 and eta2 must be given together")),
        }
    }
}

/// Per-mode absolute tolerance, selected by label or by component index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtolOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    pub atol: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    /// Replaces the kind's default overrides when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol_overrides: Option<Vec<AtolOverride>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl IntegratorSection {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// Applies the set fields on top of `base` and validates the result.
    pub fn apply(&self, base: IntegratorConfig) -> Result<IntegratorConfig, CliError> {
        let mut c = base;
        if let Some(v) = self.rtol {
            c.rtol = v;
        }
        if let Some(v) = self.atol {
            c.atol = v;
        }
        if let Some(list) = &self.atol_overrides {
            c.atol_overrides = list
                .iter()
                .map(|o| match (&o.label, o.component) {
                    (Some(l), None) => Ok((ModeSelector::Label(l.clone()), o.atol)),
                    (None, Some(i)) => Ok((ModeSelector::Component(i), o.atol)),
                    _ => Err(CliError::invalid("each atol override needs exactly one of `label` or `component`")),
                })
                .collect::<Result<_, _>>()?;
        }
        c.h_init = self.h_init.or(c.h_init);
        c.h_min = self.h_min.or(c.h_min);
        c.h_max = self.h_max.or(c.h_max);
        if let Some(v) = self.event_tol {
            c.event_tol = v;
        }
        c.sample_interval = self.sample_interval.or(c.sample_interval);
        if let Some(v) = self.max_steps {
            c.max_steps = v;
        }
        c.validate().map_err(CliError::config)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl OutputSection {
    fn is_empty(&self) -> bool {
        self.dir.is_none()
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a configuration back to TOML.
pub fn serialize_config(cfg: &RunConfig) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Parse(e.to_string()))
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Checks every model invariant and the effective integrator settings.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.model {
            Model::GateOracle(g) => {
                GateParams::new(g.alpha).map_err(CliError::config)?;
                if !(g.amplitude > 0.0 && g.amplitude.is_finite()) {
                    return Err(CliError::invalid("amplitude must be positive"));
                }
                if !g.rotor_state.iter().all(|v| v.is_finite()) || !g.t_peak.is_finite() {
                    return Err(CliError::invalid("gate initial data must be finite"));
                }
                positive_time(g.t_end)?;
            }
            Model::Kp(k) => {
                KPParams::new(k.lambda, k.alpha_diss, k.n_lo, k.n_hi).map_err(CliError::config)?;
                positive_time(k.t_end)?;
                if let Some(x) = &k.initial {
                    let want = (k.n_hi - k.n_lo + 1) as usize;
                    if x.len() != want || !x.iter().all(|v| v.is_finite()) {
                        return Err(CliError::invalid(format!("initial must list {want} finite amplitudes")));
                    }
                }
            }
            Model::Truncated(t) => {
                t.params()?;
            }
            Model::Delay(d) => {
                d.params()?;
                positive_time(d.t_end)?;
            }
            Model::Cascade(c) => {
                let p = c.params()?;
                c.policy()?;
                positive_time(c.end_time(&p))?;
                if !(c.checkpoint_tol > 0.0 && c.checkpoint_tol.is_finite()) {
                    return Err(CliError::invalid("checkpoint_tol must be positive"));
                }
            }
            Model::Trilinear(t) => {
                t.triple()?.normal().map_err(CliError::config)?;
                if t.grid < MIN_GRID {
                    return Err(CliError::invalid(format!("grid must be at least {MIN_GRID}")));
                }
                if !(t.scan_radius > 0.0 && t.scan_radius.is_finite()) || t.scan_samples == 0 {
                    return Err(CliError::invalid("scan needs a positive radius and at least one sample"));
                }
            }
        }
        self.integrator_config().map(|_| ())
    }

    /// The kind's default integrator settings with `[integrator]` applied.
    pub fn integrator_config(&self) -> Result<IntegratorConfig, CliError> {
        let base = match &self.model {
            Model::GateOracle(_) => IntegratorConfig {
                rtol: 1e-10,
                atol: 1e-14,
                sample_interval: Some(0.05),
                ..IntegratorConfig::default()
            },
            Model::Delay(_) => IntegratorConfig { sample_interval: Some(0.01), ..dyadic_core::models::delay_integrator_config() },
            Model::Cascade(_) => dyadic_core::models::cascade_integrator_config(),
            Model::Truncated(_) => IntegratorConfig { event_tol: 1e-9, ..IntegratorConfig::default() },
            Model::Kp(_) | Model::Trilinear(_) => IntegratorConfig::default(),
        };
        self.integrator.apply(base)
    }
}

fn positive_time(t: f64) -> Result<(), CliError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(format!("t_end must be positive and finite, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truncated(n0: Option<i32>) -> TruncatedConfig {
        TruncatedConfig { lambda: 2.0, alpha_diss: 0.25, delta: 0.25, delta_prime: 0.3, k_max: 12, n0, max_stage_eps: 0.01 }
    }

    #[test]
    fn truncated_n0_defaults_to_smallest_admissible() {
        let p = truncated(None).params().unwrap();
        assert_eq!(p.n0, 14);
        assert!(p.stage_eps(0) <= 0.01);
        assert!(TruncatedParams { n0: 13, ..p }.stage_eps(0) > 0.01);
        assert_eq!(truncated(Some(20)).params().unwrap().n0, 20);
        assert!(truncated(Some(0)).params().is_err());
    }

    #[test]
    fn integrator_section_overrides_only_what_it_sets() {
        let base = dyadic_core::models::cascade_integrator_config();
        let s = IntegratorSection { rtol: Some(1e-11), ..Default::default() };
        let c = s.apply(base.clone()).unwrap();
        assert_eq!(c.rtol, 1e-11);
        assert_eq!(c.atol_overrides, base.atol_overrides);
        let s = IntegratorSection {
            atol_overrides: Some(vec![AtolOverride { label: Some("a".into()), component: None, atol: 1e-20 }]),
            ..Default::default()
        };
        assert_eq!(s.apply(base).unwrap().atol_overrides, vec![(ModeSelector::Label("a".into()), 1e-20)]);
    }

    #[test]
    fn kind_defaults_differ() {
        let cfg = parse_config("[model]\nkind = \"gate-oracle\"\n").unwrap();
        assert_eq!(cfg.integrator_config().unwrap().rtol, 1e-10);
        let cfg = parse_config("[model]\nkind = \"trilinear\"\n").unwrap();
        assert_eq!(cfg.model.kind(), "trilinear");
        assert!(parse_config("[model]\nkind = \"trilinear\"\neta1 = [1.0, 0.0, 0.0]\n").is_err());
    }
}
