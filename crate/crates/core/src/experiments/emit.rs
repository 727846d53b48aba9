use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::entanglement::EntanglementResult;
use super::hyperopt::HyperoptResult;
use super::susceptibility::SusceptibilityResult;
use crate::error::{Error, Result};

/// Version stamped into every JSON document; bump on breaking layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::domain(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema: &'static str,
    schema_version: u32,
    result: &'a T,
}

/// A pipeline result that can be rendered as JSON or flat CSV.
pub trait Emit: Serialize + Sized {
    /// Stable schema name written into the JSON envelope.
    fn schema(&self) -> &'static str;

    /// One row per step or grid point, with a header line.
    fn to_csv(&self) -> String;

    fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&Envelope {
            schema: self.schema(),
            schema_version: SCHEMA_VERSION,
            result: self,
        })?;
        s.push('\n');
        Ok(s)
    }

    fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => Ok(self.to_csv()),
        }
    }
}

/// Writes `result` to `path`.
pub fn emit_results<R: Emit>(result: &R, path: &Path, format: OutputFormat) -> Result<()> {
    std::fs::write(path, result.render(format)?)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Emit for SusceptibilityResult {
    fn schema(&self) -> &'static str {
        "susceptibility"
    }

    /// Columns: `a,chi_var,chi_exact,energy_var,energy_exact,converged`.
    /// A failed linear solve leaves `chi_var` empty.
    fn to_csv(&self) -> String {
        let mut out = String::from("a,chi_var,chi_exact,energy_var,energy_exact,converged\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.a,
                opt(p.chi_var),
                p.chi_exact,
                p.energy_var,
                p.energy_exact,
                p.converged
            );
        }
        out
    }
}

impl Emit for HyperoptResult {
    fn schema(&self) -> &'static str {
        "hyperopt"
    }

    /// Columns: `step,validation_loss,train_loss,a_0,..,a_{L-1}`.
    fn to_csv(&self) -> String {
        let mut out = String::from("step,validation_loss,train_loss");
        for l in 0..self.metadata.layers {
            let _ = write!(out, ",a_{l}");
        }
        out.push('\n');
        for s in &self.steps {
            let _ = write!(out, "{},{},{}", s.step, s.validation_loss, s.train_loss);
            for a in &s.hyperparams {
                let _ = write!(out, ",{a}");
            }
            out.push('\n');
        }
        out
    }
}

impl Emit for EntanglementResult {
    fn schema(&self) -> &'static str {
        "entanglement"
    }

    /// Columns: `step,loss,measure`.
    fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,measure\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{}", s.step, s.loss, s.measure);
        }
        out
    }
}
