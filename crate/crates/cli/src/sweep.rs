//! Parameter sweeps: a run config plus a `[sweep]` table mapping model keys
//! to lists of values. Every point of the Cartesian product runs in its own
//! directory, in parallel.
//!
//! ```toml
//! [model]
//! kind = "delay"
//! k = 8.0
//! eps = 1e-2
//!
//! [sweep]
//! gamma = [20.0, 30.0, 40.0]
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{parse_config, RunConfig};
use crate::error::CliError;
use crate::run::run_to_dir;

/// One point of the grid, already validated.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub overrides: Vec<(String, Value)>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub dir: String,
    pub overrides: Table,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub acceptance_pass: bool,
    pub exit_status: u8,
}

/// Expands a sweep document into validated run configs. `seed`, when
/// given, replaces the document's seed in every run.
pub fn expand(text: &str, seed: Option<u64>) -> Result<Vec<SweepPoint>, CliError> {
    let mut doc: Table = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let grid = match doc.remove("sweep") {
        Some(Value::Table(t)) if !t.is_empty() => t,
        Some(_) => return Err(CliError::invalid("[sweep] must be a non-empty table of value lists")),
        None => return Err(CliError::invalid("sweep config needs a [sweep] table")),
    };
    let mut axes: Vec<(String, Vec<Value>)> = Vec::new();
    for (key, values) in grid {
        match values {
            Value::Array(v) if !v.is_empty() => axes.push((key, v)),
            _ => return Err(CliError::invalid(format!("sweep.{key} must be a non-empty list"))),
        }
    }
    let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (key, values) in &axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|overrides| {
            let mut d = doc.clone();
            let model = match d.get_mut("model") {
                Some(Value::Table(m)) => m,
                _ => return Err(CliError::invalid("sweep config needs a [model] table")),
            };
            for (k, v) in &overrides {
                model.insert(k.clone(), v.clone());
            }
            if let Some(s) = seed {
                d.insert("seed".into(), Value::Integer(s as i64));
            }
            let text = toml::to_string(&d).map_err(|e| CliError::Parse(e.to_string()))?;
            let config = parse_config(&text).map_err(|e| match e {
                CliError::Invalid(m) | CliError::Parse(m) => {
                    CliError::Invalid(format!("sweep point {}: {m}", describe(&overrides)))
                }
                other => other,
            })?;
            Ok(SweepPoint { overrides, config })
        })
        .collect()
}

fn describe(overrides: &[(String, Value)]) -> String {
    overrides.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Runs every point under `root/run-NNN` and writes `root/sweep.json`.
pub fn run_sweep(points: &[SweepPoint], root: &Path) -> Result<Vec<SweepEntry>, CliError> {
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let entries: Vec<SweepEntry> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let name = format!("run-{i:03}");
            let dir: PathBuf = root.join(&name);
            let overrides: Table = p.overrides.iter().cloned().collect();
            match run_to_dir(&p.config, &dir) {
                Ok(m) => SweepEntry {
                    dir: name,
                    overrides,
                    status: m.status.clone(),
                    error: None,
                    acceptance_pass: m.all_pass(),
                    exit_status: 0,
                },
                Err((m, e)) => SweepEntry {
                    dir: name,
                    overrides,
                    status: m.status,
                    error: Some(e.to_string()),
                    acceptance_pass: false,
                    exit_status: e.exit_status(),
                },
            }
        })
        .collect();
    let path = root.join("sweep.json");
    let mut text = serde_json::to_string_pretty(&entries).expect("sweep index serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(entries)
}
