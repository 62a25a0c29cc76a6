//! File emission. Every number in a CSV file is written with 17 significant
//! digits so reruns are byte-identical and values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dyadic_core::diagnostics::energy_profile;
use dyadic_core::models::TransitionEvent;
use dyadic_core::Trajectory;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t`, every mode in declared order, `E_<n>` per scale, then `dissipation`.
pub fn timeseries_csv(traj: &Trajectory) -> Result<String, CliError> {
    let prof = energy_profile(traj)?;
    let mut out = String::from("t");
    for m in traj.modes() {
        out.push(',');
        out.push_str(&m.label);
    }
    for n in &prof.scales {
        let _ = write!(out, ",E_{n}");
    }
    out.push_str(",dissipation\n");
    for (k, s) in traj.samples().iter().enumerate() {
        out.push_str(&fmt_num(s.t));
        for v in s.x.iter().chain(&prof.per_scale[k]) {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push(',');
        out.push_str(&fmt_num(s.dissipation));
        out.push('\n');
    }
    Ok(out)
}

pub fn events_csv(events: &[TransitionEvent]) -> String {
    let mut out = String::from("n,t_n,e_n\n");
    for e in events {
        let _ = writeln!(out, "{},{},{}", e.n, fmt_num(e.t_n), fmt_num(e.e_n));
    }
    out
}

pub fn parse_events_csv(text: &str) -> Result<Vec<TransitionEvent>, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "n,t_n,e_n" => {}
        _ => return Err(CliError::Parse("events file must start with the header `n,t_n,e_n`".into())),
    }
    lines
        .map(|(i, line)| {
            let bad = || CliError::Parse(format!("line {}: expected `n,t_n,e_n`, got `{line}`", i + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(TransitionEvent {
                n: f[0].parse().map_err(|_| bad())?,
                t_n: f[1].parse().map_err(|_| bad())?,
                e_n: f[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// One pass/fail line of a run's self-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Non-finite values are written as `null` and read back as NaN.
    #[serde(deserialize_with = "nullable")]
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

fn nullable<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value >= limit }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(ok)), limit: 1.0, pass: ok }
    }
}

/// Writes files into one output directory and records their checksums.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileRecord {
            name: name.into(),
            bytes: contents.len() as u64,
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }
}
