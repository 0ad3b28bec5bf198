//! Bodies of the verification suites. Each one appends checks, tables and
//! CSV artifacts to the [`Context`] it is given.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use rbnlab_core::ensemble::Executor;
use rbnlab_core::occupation::{
    self, averaged_field, averaged_field_regularity_check, local_time, regularity_exponents, AveragingMethod,
    RegularityOptions, Smoothing, SpatialGrid,
};
use rbnlab_core::paths::{FbmGenerator, Method, SamplePath};
use rbnlab_core::profile::{Envelope, TruncatedPower};
use rbnlab_core::quad;
use rbnlab_core::sewing::{self, Extrapolation, SewOptions};
use rbnlab_core::spde::{
    apriori_bounds, apriori_ladder, cauchy_in_epsilon, identification_sewing, ito_isometry_check, ladder_spread,
    martingale_check, mollify, solve_mollified, volterra_bound_check, AprioriOptions, CylindricalIncrements,
    DiffusionCoefficient, EnsembleSpec, Functional, IdentificationOptions, MartingaleOptions, MollifiedDiffusion,
    Sigma2, VolterraOptions,
};
use rbnlab_core::spectral::{default_st_grid, schauder_check, SpectralField};
use rbnlab_core::stats::{chi_square_normal, second_moment, Estimate};

use crate::config::{ExperimentConfig, SigmaKind, Tolerances};
use crate::error::{HarnessError, InModule, Result};
use crate::harness::Context;
use crate::io::{fmt_f64, write_trajectory};
use crate::report::{Check, Comparison};

fn f(v: f64) -> String {
    fmt_f64(v)
}

/// `Σ²` of the given shape, built from the `[sigma]` section.
pub fn base_sigma(cfg: &ExperimentConfig, kind: SigmaKind, k_noise: usize) -> Result<DiffusionCoefficient> {
    let s = &cfg.sigma;
    let sigma2 = match kind {
        SigmaKind::Singular => {
            Sigma2::Singular(TruncatedPower::new(cfg.physics.gamma, s.cap, s.envelope()).in_module("profile")?)
        }
        SigmaKind::Gaussian => Sigma2::Gaussian {
            amplitude: s.amplitude,
            length: s.length,
        },
        SigmaKind::Constant => Sigma2::Constant(s.value),
    };
    DiffusionCoefficient::new(sigma2, k_noise, cfg.physics.p).in_module("spde")
}

/// `u_0` truncated to `K` modes.
pub fn initial_field(cfg: &ExperimentConfig, k_max: usize) -> SpectralField {
    let mut u = SpectralField::zeros(k_max);
    for (k, c) in cfg.discretization.u0.iter().enumerate().take(k_max + 1) {
        u.set(k, Complex64::new(c[0], c[1]));
    }
    u
}

/// The fixed path `w` of the SPDE suites.
pub fn spde_path(cfg: &ExperimentConfig, n_t: usize) -> Result<SamplePath> {
    let p = &cfg.physics;
    Ok(FbmGenerator::new(n_t, p.horizon, p.hurst).in_module("paths")?.sample(cfg.seed))
}

fn ladder(base: &DiffusionCoefficient, epsilons: &[f64]) -> Result<Vec<MollifiedDiffusion>> {
    epsilons.iter().map(|&e| mollify(base, e).in_module("spde")).collect()
}

// ---------------------------------------------------------------------------
// paths

pub fn paths(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let s = &cfg.paths;
    let z_max = cfg.tolerances.z_max;
    let mut rows = Vec::new();
    for &h in &s.hursts {
        let gen = FbmGenerator::new(s.n, 1.0, h).in_module("paths")?;
        let ends: Vec<f64> = ctx.pool.map(s.samples, |i| {
            *gen.sample_stream(cfg.seed, i as u64).values().last().expect("non-empty path")
        });
        let var = second_moment(&ends);
        let z = var.z_score(1.0);
        let method = match gen.method() {
            Method::Circulant => "circulant",
            Method::Cholesky => "cholesky",
        };
        ctx.check(
            Check::new(format!("paths.variance.H={}", f(h)), z, Comparison::AtMost, z_max)
                .with_estimate(&var)
                .note(format!("Var(w_1) = {:.6}", var.mean)),
        );
        rows.push(vec![f(h), s.samples.to_string(), method.into(), f(var.mean), f(var.std_error), f(z)]);
        ctx.add_samples(s.samples);
    }
    ctx.csv("paths_variance.csv", &["hurst", "samples", "method", "var_w1", "std_error", "z"], rows)?;

    let gen = FbmGenerator::new(s.n, 1.0, 0.5).in_module("paths")?;
    let mut increments = Vec::with_capacity(s.chi_square_seeds * s.n);
    for k in 0..s.chi_square_seeds {
        let w = gen.sample_stream(cfg.seed, k as u64);
        increments.extend(w.values().windows(2).map(|p| p[1] - p[0]));
    }
    let normal = Normal::standard();
    let bins = s.chi_square_bins.max(2);
    let edges: Vec<f64> = (1..bins).map(|i| normal.inverse_cdf(i as f64 / bins as f64)).collect();
    let scale = (1.0 / s.n as f64).sqrt();
    let (stat, dof) = chi_square_normal(&increments, scale, &edges);
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| HarnessError::invalid("paths.chi_square_bins", e.to_string()))?
        .sf(stat);
    ctx.check(
        Check::new("paths.chi_square.H=0.5", p_value, Comparison::AtLeast, cfg.tolerances.chi_square_level)
            .with_samples(increments.len())
            .note(format!("statistic {stat:.3} on {dof} degrees of freedom")),
    );
    #[derive(Serialize)]
    struct ChiSquare {
        statistic: f64,
        dof: usize,
        p_value: f64,
        increments: usize,
    }
    ctx.table(
        "paths.chi_square",
        &ChiSquare {
            statistic: stat,
            dof,
            p_value,
            increments: increments.len(),
        },
    )
}

// ---------------------------------------------------------------------------
// localtime

fn erf_cell(lo: f64, hi: f64) -> f64 {
    0.5 * PI.sqrt() * (statrs::function::erf::erf(hi) - statrs::function::erf::erf(lo))
}

type TestFunction = (&'static str, fn(f64) -> f64, fn(f64, f64) -> f64);

/// Test functions with their exact integrals over `[lo, hi]`.
const OCCUPATION_TESTS: [TestFunction; 3] = [
    ("one", |_| 1.0, |lo, hi| hi - lo),
    ("cos", f64::cos, |lo, hi| hi.sin() - lo.sin()),
    ("gauss", |x| (-x * x).exp(), erf_cell),
];

pub fn localtime(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let s = &cfg.localtime;
    let tol = &cfg.tolerances;
    let mut rows = Vec::new();
    for &h in &s.hursts {
        let path = FbmGenerator::new(s.n, 1.0, h).in_module("paths")?.sample(cfg.seed);
        let grid = SpatialGrid::covering(&path, s.pad, s.n_bins).in_module("occupation")?;
        let lt = local_time(&path, &grid, s.n, Smoothing::Histogram).in_module("occupation")?;
        ctx.csv(
            &format!("localtime_H{}.csv", f(h)),
            &["x", "L"],
            lt.iter().enumerate().map(|(i, l)| [f(grid.center(i)), f(*l)]),
        )?;
        let dt = path.dt();
        let visited = &path.values()[..s.n];
        for (name, func, cell) in OCCUPATION_TESTS {
            let lhs = dt * visited.iter().map(|&w| func(w)).sum::<f64>();
            let rhs: f64 = lt
                .iter()
                .enumerate()
                .map(|(b, l)| l * cell(grid.edge(b), grid.edge(b) + grid.dx()))
                .sum();
            let rel = (lhs - rhs).abs() / lhs.abs();
            ctx.check(Check::new(
                format!("localtime.occupation.H={}.f={name}", f(h)),
                rel,
                Comparison::Below,
                tol.occupation_relative,
            ));
            rows.push(vec![f(h), name.into(), f(lhs), f(rhs), f(rel)]);
        }
    }
    ctx.csv("localtime_occupation.csv", &["hurst", "f", "time_integral", "space_integral", "relative_error"], rows)?;

    let profile = TruncatedPower::new(s.duality_gamma, s.duality_cap, Envelope::None).in_module("profile")?;
    let gen = FbmGenerator::new(s.duality_n, 1.0, s.duality_hurst).in_module("paths")?;
    let n = s.duality_n;
    let results = ctx.pool.map(s.duality_seeds, |k| -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let path = gen.sample_stream(cfg.seed, k as u64);
        let grid = SpatialGrid::covering(&path, s.pad, s.duality_bins).in_module("occupation")?;
        let q = averaged_field(&path, &profile, 0, n, &grid, AveragingMethod::Quadrature).in_module("occupation")?;
        let c = averaged_field(&path, &profile, 0, n, &grid, AveragingMethod::Convolution).in_module("occupation")?;
        let gap = q.values.iter().zip(&c.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((grid.dx(), gap, grid.centers(), c.values))
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_>>()?;
    let worst = results.iter().map(|r| r.1 / r.0.sqrt()).fold(0.0, f64::max);
    ctx.check(
        Check::new("localtime.duality", worst, Comparison::AtMost, tol.duality_factor)
            .with_samples(results.len())
            .note("sup gap / sqrt(dx), worst seed"),
    );
    ctx.csv(
        "localtime_duality.csv",
        &["seed", "dx", "sup_gap", "bound"],
        results
            .iter()
            .enumerate()
            .map(|(k, r)| vec![k.to_string(), f(r.0), f(r.1), f(tol.duality_factor * r.0.sqrt())]),
    )?;
    if let Some((_, _, xs, tf)) = results.first() {
        ctx.csv(
            "localtime_avgfield.csv",
            &["x", "Tf"],
            xs.iter().zip(tf).map(|(x, v)| [f(*x), f(*v)]),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// region

#[derive(Serialize)]
struct RegionTable {
    hurst: f64,
    p: f64,
    gamma0: f64,
    admissible: bool,
    h_bound: f64,
    gamma0_bound: f64,
    lambda_max: f64,
    gamma_max_0: f64,
    gamma_max_1: f64,
}

pub fn region(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let ph = &cfg.physics;
    let adm = crate::harness::admissibility(cfg)?;
    let ex = regularity_exponents(ph.hurst, ph.p).in_module("occupation")?;
    ctx.table(
        "region",
        &RegionTable {
            hurst: ph.hurst,
            p: ph.p,
            gamma0: ph.gamma0,
            admissible: adm.admissible,
            h_bound: adm.h_bound,
            gamma0_bound: adm.gamma0_bound,
            lambda_max: ex.lambda_max,
            gamma_max_0: ex.gamma_max(0.0),
            gamma_max_1: ex.gamma_max(1.0),
        },
    )?;
    for (p, h_bound, g_bound) in [(1.0, 0.25, 7.0 / 8.0), (4.0, 2.0 / 7.0, 6.0 / 7.0)] {
        let a = occupation::assumption_check(0.1, p, 0.8).in_module("occupation")?;
        ctx.check(Check::new(
            format!("region.bounds.p={}.h_bound", f(p)),
            (a.h_bound - h_bound).abs(),
            Comparison::AtMost,
            0.0,
        ));
        ctx.check(Check::new(
            format!("region.bounds.p={}.gamma0_bound", f(p)),
            (a.gamma0_bound - g_bound).abs(),
            Comparison::AtMost,
            0.0,
        ));
    }

    let r = &cfg.region;
    let profile = TruncatedPower::new(r.test_gamma, r.test_cap, Envelope::Gaussian).in_module("profile")?;
    let opts = RegularityOptions {
        dx: r.dx,
        min_level: r.min_level,
        max_level: r.max_level,
        ..RegularityOptions::default()
    };
    let mut rows = Vec::new();
    for &h in &r.hursts {
        let gen = FbmGenerator::new(r.n, 1.0, h).in_module("paths")?;
        let paths = ctx.pool.map(r.seeds, |k| gen.sample_stream(cfg.seed, k as u64));
        let ex = regularity_exponents(h, ph.p).in_module("occupation")?;
        let lambdas: Vec<f64> = [0.0, 1.0].into_iter().filter(|&l| l < ex.lambda_max).collect();
        for (side, shift) in [("inside", -r.margin_inside), ("outside", r.margin_outside)] {
            let g0 = ex.gamma_max(0.0) + shift;
            let g1 = ex.gamma_max(1.0) + shift;
            let rep = averaged_field_regularity_check(&paths, &profile, ph.p, g0, g1.max(0.05), &opts)
                .in_module("occupation")?;
            for &lambda in &lambdas {
                let (trend, gamma) = if lambda == 0.0 { (&rep.c0, g0) } else { (&rep.c1, g1) };
                let name = format!("region.H={}.lambda={}.{side}", f(h), f(lambda));
                let note = format!(
                    "gamma {gamma:.4}, typical growth {:.4}, ratios in band {}",
                    trend.typical_growth, trend.ratios_in_band
                );
                let mut check = if side == "inside" {
                    let mut c = Check::new(name, trend.typical_growth, Comparison::AtMost, opts.growth_threshold);
                    c.passed &= trend.ratios_in_band;
                    c
                } else {
                    Check::new(name, trend.typical_growth, Comparison::Above, opts.growth_threshold)
                };
                check = check.with_samples(r.seeds).note(note);
                ctx.check(check);
                for (li, level) in rep.levels.iter().enumerate() {
                    let sup_mean =
                        trend.per_level.iter().map(|row| row[li]).sum::<f64>() / trend.per_level.len() as f64;
                    rows.push(vec![
                        f(h),
                        f(lambda),
                        side.into(),
                        f(gamma),
                        level.to_string(),
                        f(trend.typical[li]),
                        f(sup_mean),
                    ]);
                }
            }
        }
        ctx.add_samples(r.seeds);
    }
    if !rows.is_empty() {
        ctx.csv(
            "region_trend.csv",
            &["hurst", "lambda", "side", "gamma", "level", "typical", "sup_mean"],
            rows,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sew-demo

pub const SEW_CASES: [&str; 5] = ["additive", "riemann", "volterra-half", "volterra-quarter", "volterra-ramp"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SewCase {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub error: f64,
    pub tolerance: f64,
    pub level: u32,
    pub max_level: u32,
    pub converged: bool,
    /// Cauchy gaps from level 1.
    pub gaps: Vec<f64>,
}

impl SewCase {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance && self.level <= self.max_level
    }
}

/// Runs one documented sewing example.
pub fn sew_case(name: &str, tol: &Tolerances) -> Result<SewCase> {
    let volterra_opts = SewOptions {
        max_level: 18,
        tol: 1e-6,
        ..SewOptions::default()
    };
    let (res, target, tolerance, max_level) = match name {
        "additive" => {
            let g = |s: f64, t: f64| t * t - s * s;
            let r = sewing::sew(&g, 0.0, 1.0, &SewOptions::default());
            let on_grid = r
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| (v - r.output_time(j).powi(2)).abs());
            let in_sums = r.raw_sums.iter().map(|v| (v - 1.0).abs());
            let err = on_grid.chain(in_sums).fold(0.0, f64::max);
            return Ok(SewCase {
                name: name.into(),
                value: r.total(),
                target: 1.0,
                error: err,
                tolerance: tol.additive,
                level: r.level,
                max_level: SewOptions::default().max_level,
                converged: r.converged,
                gaps: r.gaps,
            });
        }
        "riemann" => {
            let g = |s: f64, t: f64| s * (t - s);
            let opts = SewOptions::default();
            (sewing::sew(&g, 0.0, 1.0, &opts), 0.5, tol.riemann, opts.max_level)
        }
        "volterra-half" => {
            let g = |s: f64, t: f64| t - s;
            (sewing::volterra_sew(&g, 0.5, 0.0, 1.0, &volterra_opts), 2.0, tol.volterra, 18)
        }
        "volterra-quarter" => {
            let g = |s: f64, t: f64| t - s;
            (sewing::volterra_sew(&g, 0.25, 0.0, 1.0, &volterra_opts), 4.0 / 3.0, tol.volterra, 18)
        }
        "volterra-ramp" => {
            let g = |s: f64, t: f64| 0.5 * (t * t - s * s);
            let oracle = quad::integrate(|r| (1.0 - r) / r.sqrt(), 0.0, 1.0, 1e-12).value;
            (sewing::volterra_sew(&g, 0.5, 0.0, 1.0, &volterra_opts), oracle, tol.volterra, 18)
        }
        other => {
            return Err(HarnessError::invalid(
                "case",
                format!("unknown sewing case `{other}`; expected one of {}", SEW_CASES.join(", ")),
            ))
        }
    };
    Ok(SewCase {
        name: name.into(),
        value: res.total(),
        target,
        error: (res.total() - target).abs(),
        tolerance,
        level: res.level,
        max_level,
        converged: res.converged,
        gaps: res.gaps,
    })
}

pub fn sew_demo(ctx: &mut Context<'_>) -> Result<()> {
    let mut cases = Vec::new();
    for name in SEW_CASES {
        let c = sew_case(name, &ctx.cfg.tolerances)?;
        let mut check = Check::new(format!("sew.{name}"), c.error, Comparison::AtMost, c.tolerance)
            .note(format!("value {} at level {}", c.value, c.level));
        check.passed &= c.level <= c.max_level;
        ctx.check(check);
        ctx.csv(
            &format!("sew_{name}.csv"),
            &["level", "gap"],
            c.gaps.iter().enumerate().map(|(l, g)| [(l + 1).to_string(), f(*g)]),
        )?;
        cases.push(c);
    }
    ctx.table("sew", &cases)
}

// ---------------------------------------------------------------------------
// schauder

pub fn schauder(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let s = &cfg.schauder;
    let grid = default_st_grid(s.s_min, s.n_s, s.delta_min, s.n_delta);
    let mut rows = Vec::new();
    for &[rho, theta] in &s.pairs {
        for w in s.k_values.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(HarnessError::invalid("schauder.k_values", "each cutoff must double the previous one"));
            }
            let r = schauder_check(rho, theta, w[0], &grid).in_module("spectral")?;
            ctx.check(
                Check::new(
                    format!("schauder.rho={}.theta={}.K={}", f(rho), f(theta), w[0]),
                    (r.ratio - 1.0).abs(),
                    Comparison::AtMost,
                    cfg.tolerances.schauder_band,
                )
                .note(format!("sup {:.6} -> {:.6}", r.sup_q, r.sup_q_doubled)),
            );
            rows.push(vec![
                f(rho),
                f(theta),
                w[0].to_string(),
                f(r.sup_q),
                f(r.sup_q_doubled),
                f(r.ratio),
                f(r.argmax.0),
                f(r.argmax.1),
            ]);
        }
    }
    ctx.csv(
        "schauder.csv",
        &["rho", "theta", "K", "sup_q", "sup_q_doubled", "ratio", "s_argmax", "t_argmax"],
        rows,
    )
}

// ---------------------------------------------------------------------------
// spde-run

pub fn spde_run(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.discretization;
    let eps = *cfg.epsilons.last().expect("validated non-empty");
    let sigma = mollify(&base_sigma(cfg, cfg.sigma.kind, d.k_noise)?, eps).in_module("spde")?;
    let w = spde_path(cfg, d.n_t)?;
    let inc = CylindricalIncrements::for_sample(d.n_t, d.k_noise, w.dt(), cfg.seed, 0).in_module("spde")?;
    let u0 = initial_field(cfg, d.k);
    let traj = solve_mollified(&u0, &sigma, Some(eps), &w, d.n_t, d.k, &inc).in_module("spde")?;
    ctx.add_samples(1);
    let gamma0 = cfg.physics.gamma0;
    let finite = traj
        .states
        .iter()
        .all(|s| s.coefficients().iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    ctx.check(Check::flag("spde-run.finite", finite));
    ctx.csv(
        "spde_norms.csv",
        &["t", "l2", "sobolev"],
        traj.states
            .iter()
            .enumerate()
            .map(|(n, s)| [f(traj.time(n)), f(s.l2_norm()), f(s.sobolev_norm(gamma0))]),
    )?;
    if cfg.dump_trajectory {
        for name in write_trajectory(ctx.out(), "trajectory", &traj, &cfg.sigma, cfg.physics.gamma, cfg.physics.p)? {
            ctx.artifact(name);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// isometry, identification, volterra

fn relative_se(diff: &Estimate, scale: f64) -> f64 {
    if scale > 0.0 {
        diff.std_error / scale
    } else {
        0.0
    }
}

pub fn isometry(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.discretization;
    let tol = &cfg.tolerances;
    let samples = cfg.samples_or_default(cfg.spde.isometry_samples);
    let w = spde_path(cfg, d.n_t)?;
    let u0 = initial_field(cfg, d.k);
    let spec = EnsembleSpec {
        u0: &u0,
        w: &w,
        k_max: d.k,
        samples,
        seed: cfg.seed,
    };
    let mut rows = Vec::new();
    let mut bdg_rows = Vec::new();

    let c = cfg.spde.isometry_constant;
    let constant = DiffusionCoefficient::new(Sigma2::Constant(c), d.k_noise, cfg.physics.p).in_module("spde")?;
    let r = ito_isometry_check(&spec, ctx.pool, &constant, None, &cfg.physics.m).in_module("spde")?;
    let closed = 2.0 * PI * c * c * w.horizon();
    ctx.check(
        Check::new("isometry.constant", r.relative_gap, Comparison::Below, tol.isometry_relative)
            .with_error(relative_se(&r.difference, r.rhs.mean))
            .with_samples(samples),
    );
    ctx.check(Check::new(
        "isometry.constant.closed_form",
        (r.rhs.mean - closed).abs() / closed,
        Comparison::AtMost,
        1e-9,
    ));
    ctx.add_samples(samples);
    let mut push = |label: &str, eps: Option<f64>, r: &rbnlab_core::spde::IsometryReport| {
        let e = eps.map(f).unwrap_or_default();
        rows.push(vec![
            label.to_owned(),
            e.clone(),
            r.samples.to_string(),
            f(r.lhs.mean),
            f(r.lhs.std_error),
            f(r.rhs.mean),
            f(r.rhs.std_error),
            f(r.relative_gap),
            f(relative_se(&r.difference, r.rhs.mean)),
        ]);
        for b in &r.bdg {
            bdg_rows.push(vec![
                label.to_owned(),
                e.clone(),
                f(b.m),
                f(b.sup_moment.mean),
                f(b.sup_moment.std_error),
                f(b.bracket_moment.mean),
                f(b.bracket_moment.std_error),
                f(b.ratio),
            ]);
        }
    };
    push("constant", None, &r);

    let base = base_sigma(cfg, cfg.sigma.kind, d.k_noise)?;
    if cfg.sigma.kind != SigmaKind::Constant {
        let label = format!("{:?}", cfg.sigma.kind).to_lowercase();
        let r = ito_isometry_check(&spec, ctx.pool, &base, None, &cfg.physics.m).in_module("spde")?;
        ctx.check(
            Check::new(format!("isometry.{label}"), r.relative_gap, Comparison::Below, tol.isometry_relative)
                .with_error(relative_se(&r.difference, r.rhs.mean))
                .with_samples(samples)
                .note(format!("unmollified, cap {}", f(cfg.sigma.cap))),
        );
        push(&label, None, &r);
        ctx.add_samples(samples);
    }
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); cfg.physics.m.len()];
    for sigma in ladder(&base, &cfg.epsilons)? {
        let r = ito_isometry_check(&spec, ctx.pool, &sigma, Some(sigma.epsilon), &cfg.physics.m).in_module("spde")?;
        ctx.check(
            Check::new(
                format!("isometry.eps={}", f(sigma.epsilon)),
                r.relative_gap,
                Comparison::Below,
                tol.isometry_relative,
            )
            .with_error(relative_se(&r.difference, r.rhs.mean))
            .with_samples(samples),
        );
        for (i, b) in r.bdg.iter().enumerate() {
            ratios[i].push(b.ratio);
        }
        push("mollified", Some(sigma.epsilon), &r);
        ctx.add_samples(samples);
    }
    if cfg.epsilons.len() >= 2 {
        for (m, rs) in cfg.physics.m.iter().zip(&ratios) {
            ctx.check(
                Check::new(
                    format!("isometry.bdg.m={}.spread", f(*m)),
                    ladder_spread(rs),
                    Comparison::AtMost,
                    tol.ladder_factor,
                )
                .advisory(),
            );
        }
    }
    ctx.csv(
        "isometry.csv",
        &["sigma", "epsilon", "samples", "lhs", "lhs_se", "rhs", "rhs_se", "relative_gap", "gap_se"],
        rows,
    )?;
    ctx.csv(
        "isometry_bdg.csv",
        &["sigma", "epsilon", "m", "sup_moment", "sup_se", "bracket_moment", "bracket_se", "ratio"],
        bdg_rows,
    )
}

pub fn identification(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.discretization;
    let log_steps = cfg.spde.identification_log_steps;
    let n = 1usize << log_steps;
    let samples = cfg.spde.identification_samples;
    let w = spde_path(cfg, n)?;
    let u0 = initial_field(cfg, d.k);
    let spec = EnsembleSpec {
        u0: &u0,
        w: &w,
        k_max: d.k,
        samples,
        seed: cfg.seed,
    };
    let opts = IdentificationOptions {
        level: log_steps,
        m: 2.0,
        extrapolation: Extrapolation::None,
    };
    let base = base_sigma(cfg, cfg.sigma.kind, d.k_noise)?;
    let mut rows = Vec::new();
    let mut level_rows = Vec::new();
    for sigma in ladder(&base, &cfg.epsilons)? {
        let grid = SpatialGrid::covering_with_spacing(&w, 0.1, sigma.epsilon / 16.0).in_module("occupation")?;
        let r = identification_sewing(&spec, ctx.pool, &sigma, &grid, 0, n, &opts).in_module("spde")?;
        let gaps: Vec<f64> = r.samples.iter().map(|s| s.relative_gap).collect();
        let e = f(sigma.epsilon);
        ctx.check(
            Check::new(
                format!("identification.eps={e}"),
                r.max_relative_gap,
                Comparison::Below,
                cfg.tolerances.identification_relative,
            )
            .with_estimate(&Estimate::of(&gaps))
            .note(format!("level {}, mean gap {:.3e}", r.level, r.mean_relative_gap)),
        );
        for (i, s) in r.samples.iter().enumerate() {
            rows.push(vec![e.clone(), i.to_string(), f(s.sewed), f(s.raw), f(s.direct), f(s.relative_gap)]);
        }
        let levels = r.samples.first().map_or(0, |s| s.level_gaps.len());
        let mut mean_by_level = Vec::with_capacity(levels);
        for l in 0..levels {
            let at: Vec<f64> = r.samples.iter().map(|s| s.level_gaps[l]).collect();
            let mean = at.iter().sum::<f64>() / at.len() as f64;
            let max = at.iter().copied().fold(0.0, f64::max);
            mean_by_level.push(mean);
            level_rows.push(vec![e.clone(), l.to_string(), f(mean), f(max)]);
        }
        if let (Some(first), Some(last)) = (mean_by_level.first(), mean_by_level.last()) {
            ctx.check(
                Check::new(format!("identification.eps={e}.refinement"), *last, Comparison::Below, *first)
                    .advisory()
                    .note("mean gap at the finest level against the coarsest"),
            );
        }
        ctx.add_samples(samples);
    }
    ctx.csv(
        "identification.csv",
        &["epsilon", "sample", "sewed", "raw", "direct", "relative_gap"],
        rows,
    )?;
    ctx.csv("identification_levels.csv", &["epsilon", "level", "mean_gap", "max_gap"], level_rows)
}

pub fn volterra(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.discretization;
    let ph = &cfg.physics;
    let samples = cfg.spde.volterra_samples;
    let n = d.n_t;
    let w = spde_path(cfg, n)?;
    let u0 = initial_field(cfg, d.k);
    let spec = EnsembleSpec {
        u0: &u0,
        w: &w,
        k_max: d.k,
        samples,
        seed: cfg.seed,
    };
    let opts = VolterraOptions {
        eta: ph.eta,
        gamma0: ph.gamma0,
        delta: ph.delta,
        m: ph.m[0],
        pairs: vec![(0, n), (n / 2, n), (3 * n / 4, n), (n / 4, n / 2)],
        holder_level: d.checkpoint_level,
    };
    let base = base_sigma(cfg, cfg.sigma.kind, d.k_noise)?;
    let mut rows = Vec::new();
    let mut constants = Vec::new();
    for sigma in ladder(&base, &cfg.epsilons)? {
        let r = volterra_bound_check(&spec, ctx.pool, &sigma, Some(sigma.epsilon), sigma.lp_norm(), &opts)
            .in_module("spde")?;
        let converged = r.pairs.iter().all(|p| p.converged);
        ctx.check(Check::flag(format!("volterra.eps={}.converged", f(sigma.epsilon)), converged).advisory());
        constants.push(r.fitted_constant);
        for p in &r.pairs {
            rows.push(vec![
                f(sigma.epsilon),
                f(p.s),
                f(p.t),
                f(p.norm),
                f(p.constant),
                p.converged.to_string(),
            ]);
        }
        ctx.add_samples(samples);
    }
    ctx.check(
        Check::new("volterra.constant_spread", ladder_spread(&constants), Comparison::AtMost, cfg.tolerances.ladder_factor)
            .advisory()
            .note(format!("exponent {:.3}", ph.gamma0 - ph.eta - ph.delta)),
    );
    ctx.csv("volterra.csv", &["epsilon", "s", "t", "norm", "constant", "converged"], rows)
}

// ---------------------------------------------------------------------------
// apriori

pub fn apriori(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.discretization;
    let samples = cfg.samples_or_default(cfg.spde.apriori_samples);
    let w = spde_path(cfg, d.n_t)?;
    let u0 = initial_field(cfg, d.k);
    let spec = EnsembleSpec {
        u0: &u0,
        w: &w,
        k_max: d.k,
        samples,
        seed: cfg.seed,
    };
    let opts = AprioriOptions {
        gamma0: cfg.physics.gamma0,
        ms: cfg.physics.m.clone(),
        checkpoint_level: d.checkpoint_level,
        alpha_margin: 0.01,
    };
    let rungs = ladder(&base_sigma(cfg, cfg.sigma.kind, d.k_noise)?, &cfg.epsilons)?;
    let table_rungs = if rungs.len() >= 2 {
        let t = apriori_ladder(&spec, ctx.pool, &rungs, &opts).in_module("spde")?;
        for (kind, spreads) in [("holder", &t.holder_spread), ("sobolev", &t.sobolev_spread)] {
            for &(m, spread) in spreads {
                ctx.check(
                    Check::new(
                        format!("apriori.{kind}.m={}", f(m)),
                        spread,
                        Comparison::AtMost,
                        cfg.tolerances.ladder_factor,
                    )
                    .with_samples(samples)
                    .note("max/min over the ladder"),
                );
            }
        }
        t.rungs
    } else {
        let r = &rungs[0];
        vec![apriori_bounds(&spec, ctx.pool, r, Some(r.epsilon), r.lp_norm(), &opts).in_module("spde")?]
    };
    ctx.add_samples(samples * rungs.len());
    let mut rows = Vec::new();
    let mut fact = Vec::new();
    for rung in &table_rungs {
        let e = rung.epsilon.map(f).unwrap_or_default();
        for &m in &opts.ms {
            let (h, s) = (rung.holder_at(m), rung.sobolev_at(m));
            rows.push(vec![
                e.clone(),
                f(m),
                f(h.map_or(f64::NAN, |h| h.value)),
                f(h.map_or(f64::NAN, |h| h.constant)),
                f(s.map_or(f64::NAN, |s| s.moment.mean)),
                f(s.map_or(f64::NAN, |s| s.moment.std_error)),
                f(s.map_or(f64::NAN, |s| s.root)),
            ]);
        }
        for c in &rung.factorization {
            fact.push(vec![
                e.clone(),
                f(c.m),
                f(c.alpha),
                f(c.exponent),
                c.integrable.to_string(),
                f(c.lhs),
                f(c.rhs),
                f(c.fitted_constant),
            ]);
        }
    }
    ctx.csv(
        "apriori.csv",
        &["epsilon", "m", "holder", "holder_constant", "sobolev_moment", "sobolev_se", "sobolev_root"],
        rows,
    )?;
    ctx.csv(
        "apriori_factorization.csv",
        &["epsilon", "m", "alpha", "exponent", "integrable", "lhs", "rhs", "fitted_constant"],
        fact,
    )
}

// ---------------------------------------------------------------------------
// cauchy

pub fn cauchy(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.discretization;
    let tol = &cfg.tolerances;
    if cfg.epsilons.len() < 2 {
        return Err(HarnessError::invalid("epsilons", "the Cauchy suite needs at least two rungs"));
    }
    let samples = cfg.spde.cauchy_samples;
    let w = spde_path(cfg, d.n_t)?;
    let u0 = initial_field(cfg, d.k);
    let spec = EnsembleSpec {
        u0: &u0,
        w: &w,
        k_max: d.k,
        samples,
        seed: cfg.seed,
    };
    let mut configs = vec![("cauchy", cfg.spde.cauchy_sigma, true)];
    if cfg.spde.cauchy_sigma != SigmaKind::Singular {
        configs.push(("cauchy.singular", SigmaKind::Singular, false));
    }
    let mut rows = Vec::new();
    for (label, kind, enforce) in configs {
        let rungs = ladder(&base_sigma(cfg, kind, d.k_noise)?, &cfg.epsilons)?;
        let coupled: Vec<(&MollifiedDiffusion, u64)> = rungs.iter().map(|m| (m, cfg.seed)).collect();
        let t = cauchy_in_epsilon(&spec, ctx.pool, &coupled).in_module("spde")?;
        let dist: Vec<f64> = t.rows.iter().map(|r| r.distance.mean).collect();
        let sig: Vec<f64> = t.rows.iter().map(|r| r.sigma_distance).collect();
        let monotone = dist.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol.monotone_slack));
        let decreasing = sig.windows(2).all(|w| w[1] < w[0]);
        ctx.check(Check::flag(format!("{label}.distance_monotone"), monotone).with_samples(samples));
        ctx.check(Check::flag(format!("{label}.sigma_decreasing"), decreasing));
        if t.rows.len() >= 2 {
            let c = Check::new(
                format!("{label}.reduction"),
                t.min_reduction,
                Comparison::AtLeast,
                cfg.spde.cauchy_min_reduction,
            )
            .with_samples(samples)
            .note("smallest relative decrease per rung");
            ctx.check(if enforce { c } else { c.advisory() });
        }
        for r in &t.rows {
            rows.push(vec![
                format!("{kind:?}").to_lowercase(),
                f(r.epsilon),
                f(r.epsilon_next),
                f(r.distance.mean),
                f(r.distance.std_error),
                f(r.sigma_distance),
            ]);
        }
        ctx.add_samples(samples);
    }
    ctx.csv(
        "cauchy.csv",
        &["sigma", "epsilon", "epsilon_next", "distance", "distance_se", "sigma_distance"],
        rows,
    )
}

// ---------------------------------------------------------------------------
// martingale

fn functional_name(phi: &Functional) -> String {
    match phi {
        Functional::One => "one".into(),
        Functional::TanhAt { x } => format!("tanh(u({}))", f(*x)),
    }
}

pub fn martingale(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let sp = &cfg.spde;
    let n = sp.martingale_n_t;
    let k = sp.martingale_k;
    let k_noise = cfg.discretization.k_noise.min(k + 1);
    let samples = cfg.samples_or_default(sp.martingale_samples);
    let w = spde_path(cfg, n)?;
    let u0 = initial_field(cfg, k);
    let spec = EnsembleSpec {
        u0: &u0,
        w: &w,
        k_max: k,
        samples,
        seed: cfg.seed,
    };
    let sigma = mollify(&base_sigma(cfg, sp.martingale_sigma, k_noise)?, sp.martingale_epsilon).in_module("spde")?;
    let opts = MartingaleOptions {
        s_index: n / 2,
        t_index: n,
        functionals: vec![Functional::One, Functional::TanhAt { x: sp.martingale_point }],
        modes: vec![(0, 0), (1, 1), (2, 2)],
        z_max: cfg.tolerances.z_max,
    };
    let t = martingale_check(&spec, ctx.pool, &sigma, &opts).in_module("spde")?;
    ctx.add_samples(samples);
    let mut rows = Vec::new();
    for row in &t.rows {
        let phi = functional_name(&row.functional);
        for (which, est) in [("first", &row.first), ("second", &row.second), ("third", &row.third)] {
            let z = est.z_score(0.0);
            ctx.check(
                Check::new(
                    format!("martingale.{phi}.i={}.j={}.{which}", row.noise_mode, row.mode),
                    z,
                    Comparison::AtMost,
                    opts.z_max,
                )
                .with_estimate(est),
            );
            rows.push(vec![
                phi.clone(),
                row.noise_mode.to_string(),
                row.mode.to_string(),
                which.into(),
                f(est.mean),
                f(est.std_error),
                f(z),
            ]);
        }
    }
    ctx.csv(
        "martingale.csv",
        &["functional", "noise_mode", "mode", "defect", "mean", "std_error", "z"],
        rows,
    )?;

    let zero_spec = EnsembleSpec {
        samples: samples.min(64),
        ..spec
    };
    let zero = martingale_check(&zero_spec, ctx.pool, &DiffusionCoefficient::zero(k_noise), &opts).in_module("spde")?;
    ctx.add_samples(zero_spec.samples);
    ctx.check(
        Check::new("martingale.zero_sigma", zero.max_abs_defect(), Comparison::AtMost, 0.0)
            .with_samples(zero_spec.samples)
            .note("largest |defect| with sigma = 0"),
    );
    Ok(())
}
