//! Experiment runner and parameter sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use rbnlab_core::occupation::{assumption_check, Admissibility};

use crate::config::{ExperimentConfig, Kind, AXES};
use crate::error::{HarnessError, InModule, Result};
use crate::exec::Pool;
use crate::io::{fmt_f64, write_csv};
use crate::report::{AdmissibilityRecord, Check, ExperimentReport, SCHEMA_VERSION};
use crate::suites;

/// Unit of work inside an experiment kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Paths,
    Localtime,
    Region,
    SewDemo,
    Schauder,
    SpdeRun,
    Isometry,
    Identification,
    Volterra,
    Apriori,
    Cauchy,
    Martingale,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Paths => "paths",
            Suite::Localtime => "localtime",
            Suite::Region => "region",
            Suite::SewDemo => "sew-demo",
            Suite::Schauder => "schauder",
            Suite::SpdeRun => "spde-run",
            Suite::Isometry => "isometry",
            Suite::Identification => "identification",
            Suite::Volterra => "volterra",
            Suite::Apriori => "apriori",
            Suite::Cauchy => "cauchy",
            Suite::Martingale => "martingale",
        }
    }

    pub fn runs_spde(self) -> bool {
        matches!(
            self,
            Suite::SpdeRun
                | Suite::Isometry
                | Suite::Identification
                | Suite::Volterra
                | Suite::Apriori
                | Suite::Cauchy
                | Suite::Martingale
        )
    }

    /// Suites run for an experiment kind, in order.
    pub fn of(kind: Kind) -> Vec<Suite> {
        match kind {
            Kind::Paths => vec![Suite::Paths],
            Kind::Localtime => vec![Suite::Localtime],
            Kind::Region => vec![Suite::Region],
            Kind::SewDemo => vec![Suite::SewDemo],
            Kind::Schauder => vec![Suite::Schauder],
            Kind::SpdeRun => vec![Suite::SpdeRun],
            Kind::Isometry => vec![Suite::Isometry, Suite::Identification, Suite::Volterra],
            Kind::Apriori => vec![Suite::Apriori],
            Kind::Cauchy => vec![Suite::Cauchy],
            Kind::Martingale => vec![Suite::Martingale],
            Kind::FullSuite => vec![
                Suite::Paths,
                Suite::Localtime,
                Suite::Region,
                Suite::SewDemo,
                Suite::Schauder,
                Suite::SpdeRun,
                Suite::Isometry,
                Suite::Identification,
                Suite::Volterra,
                Suite::Apriori,
                Suite::Cauchy,
                Suite::Martingale,
            ],
        }
    }

    fn execute(self, ctx: &mut Context<'_>) -> Result<()> {
        match self {
            Suite::Paths => suites::paths(ctx),
            Suite::Localtime => suites::localtime(ctx),
            Suite::Region => suites::region(ctx),
            Suite::SewDemo => suites::sew_demo(ctx),
            Suite::Schauder => suites::schauder(ctx),
            Suite::SpdeRun => suites::spde_run(ctx),
            Suite::Isometry => suites::isometry(ctx),
            Suite::Identification => suites::identification(ctx),
            Suite::Volterra => suites::volterra(ctx),
            Suite::Apriori => suites::apriori(ctx),
            Suite::Cauchy => suites::cauchy(ctx),
            Suite::Martingale => suites::martingale(ctx),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a suite sees while it runs: the config, the worker pool and the
/// report under construction.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub pool: &'a Pool,
    out: &'a Path,
    checks: Vec<Check>,
    tables: BTreeMap<String, serde_json::Value>,
    artifacts: Vec<String>,
    samples: usize,
}

impl Context<'_> {
    pub fn out(&self) -> &Path {
        self.out
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn add_samples(&mut self, n: usize) {
        self.samples += n;
    }

    pub fn table<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.tables.insert(name.to_owned(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Registers a file the suite wrote itself.
    pub fn artifact(&mut self, name: impl Into<String>) {
        self.artifacts.push(name.into());
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        write_csv(&self.out.join(name), header, rows)?;
        self.artifact(name);
        Ok(())
    }
}

pub fn admissibility(cfg: &ExperimentConfig) -> Result<Admissibility> {
    let p = &cfg.physics;
    assumption_check(p.hurst, p.p, p.gamma0).in_module("occupation")
}

/// Runs the suites of `cfg.kind`, writing artifacts and `report.json` to `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<ExperimentReport> {
    run_suites(cfg, out, jobs, &Suite::of(cfg.kind))
}

/// Runs an explicit list of suites under one report.
pub fn run_suites(cfg: &ExperimentConfig, out: &Path, jobs: usize, list: &[Suite]) -> Result<ExperimentReport> {
    cfg.validate()?;
    let adm = admissibility(cfg)?;
    let needs_gate = list.iter().any(|s| s.runs_spde());
    if needs_gate && !adm.admissible && !cfg.override_inadmissible {
        return Err(HarnessError::Inadmissible {
            hurst: adm.hurst,
            h_bound: adm.h_bound,
            gamma0: adm.gamma0,
            gamma0_bound: adm.gamma0_bound,
        });
    }
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let pool = Pool::new(jobs)?;
    let start = Instant::now();
    let mut ctx = Context {
        cfg,
        pool: &pool,
        out,
        checks: Vec::new(),
        tables: BTreeMap::new(),
        artifacts: Vec::new(),
        samples: 0,
    };
    for suite in list {
        suite.execute(&mut ctx)?;
    }
    let passed = ExperimentReport::evaluate(&ctx.checks, cfg.strict);
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        generator: format!("rbnlab {}", env!("CARGO_PKG_VERSION")),
        kind: cfg.kind,
        config: cfg.clone(),
        admissibility: AdmissibilityRecord::new(&adm, !adm.admissible && needs_gate),
        checks: ctx.checks,
        tables: ctx.tables,
        samples: ctx.samples,
        wall_clock_s: start.elapsed().as_secs_f64(),
        jobs: pool.jobs(),
        artifacts: ctx.artifacts,
        passed,
    };
    report.write(&out.join("report.json"))?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: String,
    /// Directory of each point, relative to the sweep output.
    pub points: Vec<String>,
    pub reports: Vec<ExperimentReport>,
    /// The combined table.
    pub csv: PathBuf,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

/// One config per value of `axis`, sharing the seed base. For the Cauchy
/// suite an `epsilon` sweep compares consecutive values, so the points are
/// the ladder's adjacent pairs.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[f64], out: &Path, jobs: usize) -> Result<SweepResult> {
    if !AXES.contains(&axis) && !matches!(axis, "H" | "T" | "k") {
        return Err(HarnessError::invalid(
            "axis",
            format!("`{axis}` is not one of {}", AXES.join(", ")),
        ));
    }
    if values.is_empty() {
        return Err(HarnessError::invalid("values", "no values to sweep"));
    }
    let mut points: Vec<(f64, String, ExperimentConfig)> = Vec::new();
    if axis == "epsilon" && base.kind == Kind::Cauchy {
        if values.len() < 2 {
            return Err(HarnessError::invalid("values", "a Cauchy sweep needs at least two epsilons"));
        }
        for w in values.windows(2) {
            let mut cfg = base.clone();
            cfg.epsilons = vec![w[0], w[1]];
            points.push((w[0], format!("{axis}={}-{}", fmt_f64(w[0]), fmt_f64(w[1])), cfg));
        }
    } else {
        for &v in values {
            let mut cfg = base.clone();
            cfg.set_axis(axis, v)?;
            points.push((v, format!("{axis}={}", fmt_f64(v)), cfg));
        }
    }
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut reports = Vec::with_capacity(points.len());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (value, dir, cfg) in &points {
        let report = run(cfg, &out.join(dir), jobs)?;
        let a = &report.admissibility;
        rows.push(vec![
            axis.to_owned(),
            fmt_f64(*value),
            "admissible".into(),
            a.admissible.to_string(),
            "false".into(),
            fmt_f64(a.hurst),
            fmt_f64(a.h_bound),
            String::new(),
        ]);
        for c in &report.checks {
            rows.push(vec![
                axis.to_owned(),
                fmt_f64(*value),
                c.name.clone(),
                c.passed.to_string(),
                c.mandatory.to_string(),
                fmt_f64(c.measured),
                fmt_f64(c.tolerance),
                c.std_error.map(fmt_f64).unwrap_or_default(),
            ]);
        }
        reports.push(report);
    }
    let csv = out.join(format!("sweep_{axis}.csv"));
    write_csv(
        &csv,
        &["axis", "value", "check", "passed", "mandatory", "measured", "tolerance", "std_error"],
        rows,
    )?;
    Ok(SweepResult {
        axis: axis.to_owned(),
        points: points.into_iter().map(|p| p.1).collect(),
        reports,
        csv,
    })
}
