use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};

use rbnlab::config::{ExperimentConfig, Kind};
use rbnlab::harness::{run, sweep};
use rbnlab::io::{fmt_f64, write_csv, write_path_csv, write_path_raw};
use rbnlab::report::ExperimentReport;
use rbnlab::suites::{sew_case, SEW_CASES};
use rbnlab_core::occupation::{
    assumption_check, averaged_field, local_time, regularity_exponents, AveragingMethod, Smoothing, SpatialGrid,
};
use rbnlab_core::paths::FbmGenerator;
use rbnlab_core::profile::{Envelope, TruncatedPower};

/// Numerical experiments on regularization by noise for the stochastic heat
/// equation with singular multiplicative noise.
#[derive(Parser)]
#[command(name = "rbnlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run SPDE suites even when (H, p, gamma0) is inadmissible.
    #[arg(long)]
    override_inadmissible: bool,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory for this run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat advisory checks as mandatory.
    #[arg(long)]
    strict: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// fBm variance and increment checks, or `paths gen` to write one path.
    #[command(args_conflicts_with_subcommands = true)]
    Paths {
        #[command(subcommand)]
        action: Option<PathsAction>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Occupation-times formula and averaged-field duality.
    Localtime(RunArgs),
    /// Admissibility arithmetic and the averaged-field regularity region.
    Region(RunArgs),
    /// Documented sewing examples.
    SewDemo(RunArgs),
    /// Heat-semigroup Schauder constants under cutoff doubling.
    Schauder(RunArgs),
    /// One mollified trajectory, dumped to disk.
    SpdeRun(RunArgs),
    /// Itô isometry, BDG ratios, identification and the Volterra bound.
    Isometry(RunArgs),
    /// Uniform a-priori bounds down the epsilon ladder.
    Apriori(RunArgs),
    /// Coupled Cauchy distances down the epsilon ladder.
    Cauchy(RunArgs),
    /// Martingale-problem defects.
    Martingale(RunArgs),
    /// Every suite under one report.
    FullSuite(RunArgs),
    /// Local times, averaged fields and the exponent region.
    Occ {
        #[command(subcommand)]
        action: OccAction,
    },
    /// Sewing engine demos.
    Sew {
        #[command(subcommand)]
        action: SewAction,
    },
    /// Repeat an experiment along one parameter axis.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to vary (hurst, p, gamma, epsilon, K, n_t, ...).
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Experiment kind; overrides the config.
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PathFormat {
    Csv,
    Raw,
}

#[derive(Subcommand)]
enum PathsAction {
    /// Sample one fBm path.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long = "H")]
        hurst: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; the format follows the extension unless given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<PathFormat>,
    },
}

#[derive(Args, Clone)]
struct PathArgs {
    #[arg(long = "H")]
    hurst: f64,
    #[arg(long, default_value_t = 1 << 16)]
    n: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    bins: usize,
    #[arg(long, default_value_t = 0.05)]
    pad: f64,
}

#[derive(Subcommand)]
enum OccAction {
    /// Histogram local time `L_T` as an `x,L` CSV.
    Localtime {
        #[command(flatten)]
        path: PathArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Averaged field of `min(|x|^-gamma, cap)` as an `x,Tf` CSV.
    Avgfield {
        #[command(flatten)]
        path: PathArgs,
        #[arg(long, default_value_t = 0.4)]
        gamma: f64,
        #[arg(long, default_value_t = 1e3)]
        cap: f64,
        #[arg(long)]
        quadrature: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Admissibility and regularity exponents as JSON.
    Region {
        #[arg(long = "H")]
        hurst: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.8)]
        gamma0: f64,
    },
}

#[derive(Subcommand)]
enum SewAction {
    /// Run one documented example and print `level,gap`.
    Demo {
        #[arg(long)]
        case: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &RunArgs, kind: Option<Kind>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = kind {
        cfg.kind = k;
    }
    cfg.override_inadmissible |= args.override_inadmissible;
    cfg.strict |= args.strict;
    cfg.validate()?;
    Ok(cfg)
}

/// `--out`, else `$RBNLAB_OUT/<kind>`, else the config's `out`, else `rbnlab-out/<kind>`.
fn output_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(o) = &args.out {
        return o.clone();
    }
    let root = std::env::var_os("RBNLAB_OUT")
        .map(PathBuf::from)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("rbnlab-out"));
    root.join(cfg.kind.name())
}

fn print_report(report: &ExperimentReport, dir: &Path) {
    print!("{}", report.summary());
    println!(
        "{} checks, {} failed; {} samples in {:.1} s",
        report.checks.len(),
        report.failures().filter(|c| c.mandatory || report.config.strict).count(),
        report.samples,
        report.wall_clock_s
    );
    println!("report: {}", dir.join("report.json").display());
}

fn run_kind(kind: Kind, args: &RunArgs) -> anyhow::Result<bool> {
    let cfg = load(args, Some(kind))?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let dir = output_dir(args, &cfg);
    let report = run(&cfg, &dir, args.jobs)?;
    print_report(&report, &dir);
    Ok(report.passed)
}

fn emit_csv(out: Option<&Path>, header: &[&str], rows: Vec<[String; 2]>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_csv(p, header, rows)?,
        None => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{},{}", r[0], r[1]);
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Paths { action: None, run } => run_kind(Kind::Paths, &run),
        Command::Paths {
            action:
                Some(PathsAction::Gen {
                    n,
                    horizon,
                    hurst,
                    seed,
                    out,
                    format,
                }),
            ..
        } => {
            let path = FbmGenerator::new(n, horizon, hurst)?.sample(seed);
            let format = format.unwrap_or(match out.extension().and_then(|e| e.to_str()) {
                Some("csv") => PathFormat::Csv,
                _ => PathFormat::Raw,
            });
            match format {
                PathFormat::Csv => write_path_csv(&out, &path)?,
                PathFormat::Raw => write_path_raw(&out, &path)?,
            }
            Ok(true)
        }
        Command::Localtime(a) => run_kind(Kind::Localtime, &a),
        Command::Region(a) => run_kind(Kind::Region, &a),
        Command::SewDemo(a) => run_kind(Kind::SewDemo, &a),
        Command::Schauder(a) => run_kind(Kind::Schauder, &a),
        Command::SpdeRun(a) => run_kind(Kind::SpdeRun, &a),
        Command::Isometry(a) => run_kind(Kind::Isometry, &a),
        Command::Apriori(a) => run_kind(Kind::Apriori, &a),
        Command::Cauchy(a) => run_kind(Kind::Cauchy, &a),
        Command::Martingale(a) => run_kind(Kind::Martingale, &a),
        Command::FullSuite(a) => run_kind(Kind::FullSuite, &a),
        Command::Occ { action } => occ(action),
        Command::Sew {
            action: SewAction::Demo { case, out },
        } => {
            let c = sew_case(&case, &Default::default())
                .with_context(|| format!("available cases: {}", SEW_CASES.join(", ")))?;
            let rows = c
                .gaps
                .iter()
                .enumerate()
                .map(|(l, g)| [(l + 1).to_string(), fmt_f64(*g)])
                .collect();
            emit_csv(out.as_deref(), &["level", "gap"], rows)?;
            eprintln!(
                "{}: value {} target {} error {:.3e} (tolerance {:.1e}) at level {}",
                c.name, c.value, c.target, c.error, c.tolerance, c.level
            );
            Ok(c.passed())
        }
        Command::Sweep {
            run: args,
            axis,
            values,
            kind,
        } => {
            let kind = kind.map(|k| k.parse::<Kind>()).transpose()?;
            let cfg = load(&args, kind)?;
            if args.print_config {
                print!("{}", cfg.to_toml());
                return Ok(true);
            }
            let dir = args.out.clone().unwrap_or_else(|| output_dir(&args, &cfg).join("sweep"));
            let res = sweep(&cfg, &axis, &values, &dir, args.jobs)?;
            for (point, report) in res.points.iter().zip(&res.reports) {
                let failed = report.failures().filter(|c| c.mandatory || cfg.strict).count();
                println!(
                    "{point}: admissible {} ({} checks, {failed} failed)",
                    report.admissibility.admissible,
                    report.checks.len()
                );
            }
            println!("table: {}", res.csv.display());
            Ok(res.passed())
        }
    }
}

fn occ(action: OccAction) -> anyhow::Result<bool> {
    match action {
        OccAction::Localtime { path: a, out } => {
            let w = FbmGenerator::new(a.n, a.horizon, a.hurst)?.sample(a.seed);
            let grid = SpatialGrid::covering(&w, a.pad, a.bins)?;
            let lt = local_time(&w, &grid, a.n, Smoothing::Histogram)?;
            let rows = lt
                .iter()
                .enumerate()
                .map(|(i, l)| [fmt_f64(grid.center(i)), fmt_f64(*l)])
                .collect();
            emit_csv(out.as_deref(), &["x", "L"], rows)?;
        }
        OccAction::Avgfield {
            path: a,
            gamma,
            cap,
            quadrature,
            out,
        } => {
            let w = FbmGenerator::new(a.n, a.horizon, a.hurst)?.sample(a.seed);
            let grid = SpatialGrid::covering(&w, a.pad, a.bins)?;
            let f = TruncatedPower::new(gamma, cap, Envelope::None)?;
            let method = if quadrature {
                AveragingMethod::Quadrature
            } else {
                AveragingMethod::Convolution
            };
            let field = averaged_field(&w, &f, 0, a.n, &grid, method)?;
            let rows = field
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| [fmt_f64(grid.center(i)), fmt_f64(*v)])
                .collect();
            emit_csv(out.as_deref(), &["x", "Tf"], rows)?;
        }
        OccAction::Region { hurst, p, gamma0 } => {
            let a = assumption_check(hurst, p, gamma0)?;
            let e = regularity_exponents(hurst, p)?;
            let json = serde_json::json!({
                "H": hurst,
                "p": p,
                "gamma0": gamma0,
                "admissible": a.admissible,
                "H_bound": a.h_bound,
                "gamma0_bound": a.gamma0_bound,
                "lambda_max": e.lambda_max,
                "gamma_max_0": e.gamma_max(0.0),
                "gamma_max_1": e.gamma_max(1.0),
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

