//! Text format for circuit specs.
//!
//! ```toml
//! components = 2
//!
//! [[modes]]
//! label = "x"
//! component = 1
//! scale = 0
//! nu = 0.5          # optional dissipation rate
//!
//! [[terms]]         # dX_out/dt += coeff · X_in1 · X_in2
//! out = "y"
//! in1 = "x"
//! in2 = "x"
//! coeff = 1.0
//! ```

use dyadic_core::circuit::{CircuitSpec, InteractionTerm, ModeId};
use dyadic_core::models::{cascade_spec, CascadeParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub components: usize,
    pub modes: Vec<ModeEntry>,
    #[serde(default)]
    pub terms: Vec<TermEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub label: String,
    pub component: usize,
    pub scale: i32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub nu: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermEntry {
    pub out: String,
    pub in1: String,
    pub in2: String,
    pub coeff: f64,
}

impl SpecFile {
    pub fn from_spec(spec: &CircuitSpec) -> Self {
        let modes = spec
            .modes()
            .iter()
            .zip(spec.dissipation())
            .map(|(m, nu)| ModeEntry { label: m.label.clone(), component: m.component, scale: m.scale, nu: *nu })
            .collect();
        let terms = spec
            .interactions()
            .iter()
            .map(|t| TermEntry { out: t.out.label.clone(), in1: t.in1.label.clone(), in2: t.in2.label.clone(), coeff: t.coeff })
            .collect();
        Self { components: spec.components(), modes, terms }
    }

    pub fn to_spec(&self) -> Result<CircuitSpec, CliError> {
        let modes: Vec<ModeId> = self.modes.iter().map(|m| ModeId::new(m.label.clone(), m.component, m.scale)).collect();
        let find = |label: &str| {
            modes
                .iter()
                .find(|m| m.label == label)
                .cloned()
                .ok_or_else(|| CliError::invalid(format!("term refers to undeclared mode `{label}`")))
        };
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(InteractionTerm::new(find(&t.out)?, find(&t.in1)?, find(&t.in2)?, t.coeff)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let rates: Vec<(ModeId, f64)> =
            modes.iter().zip(&self.modes).filter(|(_, e)| e.nu != 0.0).map(|(m, e)| (m.clone(), e.nu)).collect();
        CircuitSpec::new(self.components, modes, terms, &rates).map_err(CliError::config)
    }
}

pub fn parse_spec(text: &str) -> Result<CircuitSpec, CliError> {
    let file: SpecFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    file.to_spec()
}

pub fn serialize_spec(spec: &CircuitSpec) -> Result<String, CliError> {
    toml::to_string(&SpecFile::from_spec(spec)).map_err(|e| CliError::Parse(e.to_string()))
}

/// The sixteen-coefficient cascade table over scales 0..=4 with
/// `ε₀ = 0.5, ε = 10⁻², K = 8, Γ = 30`.
pub fn bundled_cascade_spec() -> CircuitSpec {
    let p = CascadeParams::new(0.5, 1e-2, 8.0, Some(30.0), 0).expect("bundled parameters are valid");
    cascade_spec(&p.with_window(0, 4)).expect("bundled window is valid")
}
