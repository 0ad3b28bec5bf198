//! Self-contained JSON reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use rbnlab_core::occupation::Admissibility;
use rbnlab_core::stats::Estimate;

use crate::config::{ExperimentConfig, Kind};
use crate::error::{HarnessError, Result};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

/// JSON has no infinities; they are written as `null` and read back as NaN.
mod lossy_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod lossy_opt_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => s.serialize_some(x),
            _ => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `measured < tolerance`
    Below,
    /// `measured <= tolerance`
    AtMost,
    /// `measured >= tolerance`
    AtLeast,
    /// `measured > tolerance`
    Above,
}

impl Comparison {
    pub fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Comparison::Below => measured < tolerance,
            Comparison::AtMost => measured <= tolerance,
            Comparison::AtLeast => measured >= tolerance,
            Comparison::Above => measured > tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Advisory checks (fitted constants, stability) do not fail a run
    /// unless the config is strict.
    pub mandatory: bool,
    #[serde(with = "lossy_f64")]
    pub measured: f64,
    pub comparison: Comparison,
    #[serde(with = "lossy_f64")]
    pub tolerance: f64,
    #[serde(with = "lossy_opt_f64", default)]
    pub std_error: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, comparison: Comparison, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: comparison.holds(measured, tolerance),
            mandatory: true,
            measured,
            comparison,
            tolerance,
            std_error: None,
            samples: None,
            note: None,
        }
    }

    /// A yes/no property, recorded as `measured ∈ {0, 1}` against 1.
    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::new(name, if holds { 1.0 } else { 0.0 }, Comparison::AtLeast, 1.0)
    }

    pub fn advisory(mut self) -> Self {
        self.mandatory = false;
        self
    }

    pub fn with_error(mut self, std_error: f64) -> Self {
        self.std_error = Some(std_error);
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = Some(n);
        self
    }

    pub fn with_estimate(self, e: &Estimate) -> Self {
        self.with_error(e.std_error).with_samples(e.n)
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityRecord {
    pub admissible: bool,
    pub hurst: f64,
    pub p: f64,
    pub gamma0: f64,
    pub h_bound: f64,
    pub gamma0_bound: f64,
    pub overridden: bool,
}

impl AdmissibilityRecord {
    pub fn new(a: &Admissibility, overridden: bool) -> Self {
        Self {
            admissible: a.admissible,
            hurst: a.hurst,
            p: a.p,
            gamma0: a.gamma0,
            h_bound: a.h_bound,
            gamma0_bound: a.gamma0_bound,
            overridden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub generator: String,
    pub kind: Kind,
    pub config: ExperimentConfig,
    pub admissibility: AdmissibilityRecord,
    pub checks: Vec<Check>,
    /// Per-suite numeric tables, keyed by suite.
    pub tables: BTreeMap<String, serde_json::Value>,
    /// Monte Carlo samples drawn, over all suites.
    pub samples: usize,
    pub wall_clock_s: f64,
    pub jobs: usize,
    /// Artifact paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Mandatory checks passed (all checks when `strict`).
    pub fn evaluate(checks: &[Check], strict: bool) -> bool {
        checks.iter().all(|c| c.passed || (!c.mandatory && !strict))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::invalid(
                "schema_version",
                format!("report has version {}, expected {SCHEMA_VERSION}", r.schema_version),
            ));
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| HarnessError::io(path, e))
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = match (c.passed, c.mandatory) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "warn",
            };
            let op = match c.comparison {
                Comparison::Below => "<",
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
                Comparison::Above => ">",
            };
            out.push_str(&format!("{status:4} {:48} {:>12.5e} {op} {:<10.4e}", c.name, c.measured, c.tolerance));
            if let Some(se) = c.std_error {
                out.push_str(&format!(" (se {se:.2e})"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Check::new("a", 0.01, Comparison::Below, 0.05).passed);
        assert!(!Check::new("a", 0.05, Comparison::Below, 0.05).passed);
        assert!(Check::new("a", 0.05, Comparison::AtMost, 0.05).passed);
        assert!(Check::new("a", 0.3, Comparison::AtLeast, 0.3).passed);
        assert!(!Check::new("a", f64::NAN, Comparison::AtMost, 1.0).passed);
        assert!(Check::flag("f", true).passed);
    }

    #[test]
    fn advisory_failures_only_matter_when_strict() {
        let checks = vec![Check::flag("a", true), Check::flag("b", false).advisory()];
        assert!(ExperimentReport::evaluate(&checks, false));
        assert!(!ExperimentReport::evaluate(&checks, true));
    }

    #[test]
    fn non_finite_values_survive_json() {
        let c = Check::new("x", f64::INFINITY, Comparison::AtMost, 2.0);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"measured\":null"));
        let back: Check = serde_json::from_str(&text).unwrap();
        assert!(back.measured.is_nan());
    }
}
