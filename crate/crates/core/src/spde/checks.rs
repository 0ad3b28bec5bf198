//! Monte Carlo checks on ensembles of mollified solutions.
//!
//! Every check runs its samples through an [`Executor`] and reduces them in
//! index order. Stochastic integrals are accumulated in grid space without
//! the semigroup: `I_n = Σ_{m<n} g^m`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::coefficient::{mollification_distance, Coefficient, MollifiedDiffusion};
use super::solver::{CylindricalIncrements, Solver, StepView};
use crate::ensemble::Executor;
use crate::error::check;
use crate::occupation::{self, SpatialGrid};
use crate::paths::SamplePath;
use crate::sewing::{self, Extrapolation, SewOptions};
use crate::spectral::{SpectralField, TorusGrid, SQRT_2PI};
use crate::stats::Estimate;
use crate::{Error, Result};

/// Shared setup of an ensemble. Sample `i` draws its noise from stream
/// `NOISE_STREAM + i` of `seed`; every sample sees the same path `w`.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec<'a> {
    pub u0: &'a SpectralField,
    pub w: &'a SamplePath,
    pub k_max: usize,
    pub samples: usize,
    pub seed: u64,
}

impl EnsembleSpec<'_> {
    pub fn n_steps(&self) -> usize {
        self.w.n_steps()
    }

    pub fn dt(&self) -> f64 {
        self.w.dt()
    }

    pub fn increments(&self, k_noise: usize, i: usize) -> Result<CylindricalIncrements> {
        CylindricalIncrements::for_sample(self.n_steps(), k_noise, self.dt(), self.seed, i)
    }

    /// Runs sample `i`, returning `û^{n_t}`.
    pub fn run<C, F>(&self, sigma: &C, i: usize, observe: F) -> Result<SpectralField>
    where
        C: Coefficient + ?Sized,
        F: FnMut(&StepView<'_>),
    {
        let inc = self.increments(sigma.k_noise(), i)?;
        let mut solver = Solver::new(self.k_max, self.dt())?;
        solver.run(sigma, self.w, self.u0, &inc, observe)
    }

    fn map<E, T, F>(&self, exec: &E, f: F) -> Result<Vec<T>>
    where
        E: Executor + ?Sized,
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        exec.map(self.samples, f).into_iter().collect()
    }

    fn grid(&self) -> TorusGrid {
        TorusGrid::oversampled(self.k_max)
    }
}

/// `max / min` of positive values; infinite if any is zero.
pub fn ladder_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else if max == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// `(E|x|^q)^{1/q}`.
fn lq_norm(xs: &[f64], q: f64) -> f64 {
    let n = xs.len() as f64;
    libm::pow(xs.iter().map(|x| libm::pow(libm::fabs(*x), q)).sum::<f64>() / n, 1.0 / q)
}

fn weight_sum<C: Coefficient + ?Sized>(sigma: &C) -> f64 {
    sigma.weights().iter().map(|a| a * a).sum()
}

/// `‖σ(u^n - w_n)‖²_{HS}` from the step's profile values.
fn hs_from_view(view: &StepView<'_>, dx: f64, wsum: f64) -> f64 {
    wsum * dx * view.profile.iter().map(|s| s * s).sum::<f64>()
}

/// Step indices of the `2^level + 1` dyadic checkpoints of `[0, n_t]`.
fn checkpoints(n_t: usize, level: u32) -> Result<Vec<usize>> {
    let cells = 1usize << level;
    if !n_t.is_multiple_of(cells) {
        return Err(Error::Mismatch(format!("{n_t} steps are not divisible into {cells} dyadic cells")));
    }
    let stride = n_t / cells;
    Ok((0..=cells).map(|j| j * stride).collect())
}

fn sobolev_weights(k_max: usize, alpha: f64) -> Vec<f64> {
    (0..=k_max).map(|k| libm::pow(1.0 + (k * k) as f64, alpha)).collect()
}

fn sobolev_sq(u: &SpectralField, weights: &[f64]) -> f64 {
    let c = u.coefficients();
    let mut s = weights[0] * c[0].norm_sqr();
    for k in 1..c.len().min(weights.len()) {
        s += 2.0 * weights[k] * c[k].norm_sqr();
    }
    s
}

// ---------------------------------------------------------------------------
// Itô isometry and BDG

#[derive(Debug, Clone, PartialEq)]
pub struct BdgRatio {
    pub m: f64,
    /// `E sup_n ‖I_n‖^m`.
    pub sup_moment: Estimate,
    /// `E (Σ_n Δt ‖σ‖²_{HS})^{m/2}`.
    pub bracket_moment: Estimate,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    pub epsilon: Option<f64>,
    pub horizon: f64,
    pub samples: usize,
    /// `E ‖∫_0^T σ(u - w) dW‖²_{L²}`.
    pub lhs: Estimate,
    /// `E ∫_0^T ‖σ(u_r - w_r)‖²_{HS} dr`.
    pub rhs: Estimate,
    /// Per-sample `lhs - rhs`.
    pub difference: Estimate,
    pub relative_gap: f64,
    pub bdg: Vec<BdgRatio>,
}

impl IsometryReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.relative_gap < tolerance
    }
}

pub fn ito_isometry_check<C, E>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    sigma: &C,
    epsilon: Option<f64>,
    ms: &[f64],
) -> Result<IsometryReport>
where
    C: Coefficient + ?Sized,
    E: Executor + ?Sized,
{
    let grid = spec.grid();
    let dx = grid.dx();
    let wsum = weight_sum(sigma);
    let per_sample = spec.map(exec, |i| {
        let mut integral = vec![0.0; grid.points()];
        let mut bracket = 0.0;
        let mut sup_sq = 0.0f64;
        spec.run(sigma, i, |v| {
            bracket += v.dt * hs_from_view(v, dx, wsum);
            for (acc, s) in integral.iter_mut().zip(v.profile) {
                *acc += s * v.xi;
            }
            sup_sq = sup_sq.max(dx * integral.iter().map(|x| x * x).sum::<f64>());
        })?;
        let final_sq = dx * integral.iter().map(|x| x * x).sum::<f64>();
        Ok((final_sq, bracket, sup_sq))
    })?;
    let lhs: Vec<f64> = per_sample.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = per_sample.iter().map(|r| r.1).collect();
    let diff: Vec<f64> = per_sample.iter().map(|r| r.0 - r.1).collect();
    let lhs = Estimate::of(&lhs);
    let rhs = Estimate::of(&rhs);
    let relative_gap = if rhs.mean > 0.0 {
        libm::fabs(lhs.mean - rhs.mean) / rhs.mean
    } else if lhs.mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let bdg = ms
        .iter()
        .map(|&m| {
            let sup: Vec<f64> = per_sample.iter().map(|r| libm::pow(r.2, m / 2.0)).collect();
            let br: Vec<f64> = per_sample.iter().map(|r| libm::pow(r.1, m / 2.0)).collect();
            let sup_moment = Estimate::of(&sup);
            let bracket_moment = Estimate::of(&br);
            let ratio = if bracket_moment.mean > 0.0 {
                sup_moment.mean / bracket_moment.mean
            } else {
                0.0
            };
            BdgRatio {
                m,
                sup_moment,
                bracket_moment,
                ratio,
            }
        })
        .collect();
    Ok(IsometryReport {
        epsilon,
        horizon: spec.w.horizon(),
        samples: spec.samples,
        lhs,
        rhs,
        difference: Estimate::of(&diff),
        relative_gap,
        bdg,
    })
}

// ---------------------------------------------------------------------------
// Identification

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationOptions {
    pub level: u32,
    /// Moment for the reported `L^{m/2}(Ω)` norms.
    pub m: f64,
    pub extrapolation: Extrapolation,
}

impl Default for IdentificationOptions {
    fn default() -> Self {
        Self {
            level: 12,
            m: 2.0,
            extrapolation: Extrapolation::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationSample {
    pub sewed: f64,
    pub raw: f64,
    /// `Σ_n Δt ∫_T Σ_ε²(u^n - w_n) dx`.
    pub direct: f64,
    pub relative_gap: f64,
    /// `|S_L - direct| / direct` of the raw dyadic sums, `L = 0..=level`.
    pub level_gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationReport {
    pub epsilon: f64,
    pub s: f64,
    pub t: f64,
    pub level: u32,
    pub samples: Vec<IdentificationSample>,
    pub sewed_norm: f64,
    pub direct_norm: f64,
    pub max_relative_gap: f64,
    pub mean_relative_gap: f64,
}

/// Sews `A_{a,b} = ∫_T (Σ_ε² ∗ L_{a,b})(u_a(x)) dx` per sample on
/// `[t_{s_index}, t_{t_index}]` and compares with the direct time integral.
/// `grid` carries the histogram local time of `w` and must cover its range.
pub fn identification_sewing<E: Executor + ?Sized>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    sigma: &MollifiedDiffusion,
    grid: &SpatialGrid,
    s_index: usize,
    t_index: usize,
    opts: &IdentificationOptions,
) -> Result<IdentificationReport> {
    check(s_index < t_index, "s_index", s_index as f64, "s_index < t_index")?;
    check(t_index <= spec.n_steps(), "t_index", t_index as f64, "t_index <= n_t")?;
    let span = t_index - s_index;
    if !span.is_multiple_of(1usize << opts.level) {
        return Err(Error::Mismatch(format!(
            "{span} steps cannot be split into 2^{} dyadic cells",
            opts.level
        )));
    }
    // Fails early if the grid does not cover w.
    occupation::local_time_cells(spec.w, grid, s_index, t_index)?;
    let torus = spec.grid();
    let dx = torus.dx();
    let dt = spec.dt();
    let wsum = weight_sum(sigma);
    let antiderivative = sigma.sigma2_antiderivative();
    let g = |y: f64| antiderivative.eval(y);
    let (s, t) = (spec.w.time(s_index), spec.w.time(t_index));
    let sew_opts = SewOptions {
        max_level: opts.level,
        tol: 0.0,
        min_level: opts.level,
        output_level: 0,
        extrapolation: opts.extrapolation,
    };
    let samples = spec.map(exec, |i| {
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(t_index);
        let mut direct = 0.0;
        spec.run(sigma, i, |v| {
            if v.step < t_index {
                points.push(v.points.to_vec());
                if v.step >= s_index {
                    direct += dt * hs_from_view(v, dx, wsum);
                }
            }
        })?;
        let index = |time: f64| libm::round(time / dt) as usize;
        let germ = |a: f64, b: f64| -> f64 {
            let (ia, ib) = (index(a), index(b));
            if ia >= ib {
                return 0.0;
            }
            let cells = occupation::local_time_cells(spec.w, grid, ia, ib).unwrap_or_default();
            wsum * dx * points[ia].iter().map(|&y| occupation::convolve_cells_at(&cells, grid, &g, y)).sum::<f64>()
        };
        let res = sewing::sew(&germ, s, t, &sew_opts);
        let gap = |v: f64| {
            if direct > 0.0 {
                libm::fabs(v - direct) / direct
            } else {
                libm::fabs(v)
            }
        };
        let sewed = res.total();
        Ok(IdentificationSample {
            sewed,
            raw: res.raw_total(),
            direct,
            relative_gap: gap(sewed),
            level_gaps: res.raw_sums.iter().map(|&v| gap(v)).collect(),
        })
    })?;
    let q = opts.m / 2.0;
    let sewed: Vec<f64> = samples.iter().map(|r| r.sewed).collect();
    let direct: Vec<f64> = samples.iter().map(|r| r.direct).collect();
    let gaps: Vec<f64> = samples.iter().map(|r| r.relative_gap).collect();
    Ok(IdentificationReport {
        epsilon: sigma.epsilon,
        s,
        t,
        level: opts.level,
        sewed_norm: lq_norm(&sewed, q),
        direct_norm: lq_norm(&direct, q),
        max_relative_gap: gaps.iter().copied().fold(0.0, f64::max),
        mean_relative_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
        samples,
    })
}

// ---------------------------------------------------------------------------
// Volterra bound

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraOptions {
    pub eta: f64,
    pub gamma0: f64,
    pub delta: f64,
    pub m: f64,
    /// `(s_index, t_index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Dyadic checkpoints used for the Hölder norm of `u`.
    pub holder_level: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraPair {
    pub s: f64,
    pub t: f64,
    /// `‖∫_s^t (t-r)^{-η} ‖σ(u_r - w_r)‖²_{HS} dr‖_{L^{m/2}(Ω)}`.
    pub norm: f64,
    pub constant: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraReport {
    pub epsilon: Option<f64>,
    pub eta: f64,
    /// `γ0 - η - δ`.
    pub exponent: f64,
    pub lp_norm: f64,
    /// `‖ ‖u‖_{C^{γ0/2} L²} ‖_{L^m(Ω)}`.
    pub holder_moment: f64,
    pub pairs: Vec<VolterraPair>,
    /// Largest per-pair constant.
    pub fitted_constant: f64,
}

fn holder_of(states: &[SpectralField], times: &[f64], alpha: f64) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..states.len() {
        for b in a + 1..states.len() {
            let d = states[b].sub(&states[a]).l2_norm();
            worst = worst.max(d / libm::pow(times[b] - times[a], alpha));
        }
    }
    worst
}

/// Fits `C` in `norm ≤ C (t-s)^{γ0-η-δ} ‖Σ_ε²‖_{L^p} (1 + ‖u‖_{C^{γ0/2}L²})`
/// over the given `(s, t)` pairs.
pub fn volterra_bound_check<C, E>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    sigma: &C,
    epsilon: Option<f64>,
    lp_norm: f64,
    opts: &VolterraOptions,
) -> Result<VolterraReport>
where
    C: Coefficient + ?Sized,
    E: Executor + ?Sized,
{
    check(opts.eta < opts.gamma0 - opts.delta, "eta", opts.eta, "eta < gamma0 - delta")?;
    check(opts.eta >= 0.0, "eta", opts.eta, "eta >= 0")?;
    let n_t = spec.n_steps();
    for &(a, b) in &opts.pairs {
        if !(a < b && b <= n_t) {
            return Err(Error::Mismatch(format!("pair ({a}, {b}) is not an interval of 0..={n_t}")));
        }
    }
    let level = opts.holder_level.min(n_t.trailing_zeros());
    let cps = checkpoints(n_t, level)?;
    let cp_times: Vec<f64> = cps.iter().map(|&j| spec.w.time(j)).collect();
    let grid = spec.grid();
    let dx = grid.dx();
    let dt = spec.dt();
    let wsum = weight_sum(sigma);
    let max_level = usize::BITS - n_t.leading_zeros() + 6;
    let per_sample = spec.map(exec, |i| {
        let mut cumulative = Vec::with_capacity(n_t + 1);
        cumulative.push(0.0);
        let mut states = Vec::with_capacity(cps.len());
        let mut next_cp = 0;
        let last = spec.run(sigma, i, |v| {
            let prev = *cumulative.last().expect("non-empty");
            cumulative.push(prev + dt * hs_from_view(v, dx, wsum));
            if next_cp < cps.len() && cps[next_cp] == v.step {
                states.push(v.state.clone());
                next_cp += 1;
            }
        })?;
        states.push(last);
        let h = holder_of(&states, &cp_times, opts.gamma0 / 2.0);
        let lin = |time: f64| -> f64 {
            let r = (time / dt).clamp(0.0, n_t as f64);
            let j = (r as usize).min(n_t - 1);
            let f = r - j as f64;
            cumulative[j] + f * (cumulative[j + 1] - cumulative[j])
        };
        let germ = |a: f64, b: f64| lin(b) - lin(a);
        let scale = cumulative[n_t].abs() + 1.0;
        let sew_opts = SewOptions {
            max_level,
            tol: 1e-4 * scale,
            min_level: 3,
            output_level: 0,
            extrapolation: Extrapolation::Ratio(libm::pow(2.0, opts.eta - 1.0)),
        };
        let values: Vec<(f64, bool)> = opts
            .pairs
            .iter()
            .map(|&(a, b)| {
                let r = sewing::volterra_sew(&germ, opts.eta, spec.w.time(a), spec.w.time(b), &sew_opts);
                (r.total(), r.converged)
            })
            .collect();
        Ok((h, values))
    })?;
    let holder: Vec<f64> = per_sample.iter().map(|r| r.0).collect();
    let holder_moment = lq_norm(&holder, opts.m);
    let exponent = opts.gamma0 - opts.eta - opts.delta;
    let pairs: Vec<VolterraPair> = opts
        .pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let v: Vec<f64> = per_sample.iter().map(|r| r.1[k].0).collect();
            let norm = lq_norm(&v, opts.m / 2.0);
            let (s, t) = (spec.w.time(a), spec.w.time(b));
            let unit = libm::pow(t - s, exponent) * lp_norm * (1.0 + holder_moment);
            VolterraPair {
                s,
                t,
                norm,
                constant: if unit > 0.0 { norm / unit } else { 0.0 },
                converged: per_sample.iter().all(|r| r.1[k].1),
            }
        })
        .collect();
    Ok(VolterraReport {
        epsilon,
        eta: opts.eta,
        exponent,
        lp_norm,
        holder_moment,
        fitted_constant: pairs.iter().map(|p| p.constant).fold(0.0, f64::max),
        pairs,
    })
}

// ---------------------------------------------------------------------------
// A-priori bounds

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriOptions {
    pub gamma0: f64,
    pub ms: Vec<f64>,
    pub checkpoint_level: u32,
    /// `α = 1/m + margin` in the factorization cross-check.
    pub alpha_margin: f64,
}

impl Default for AprioriOptions {
    fn default() -> Self {
        Self {
            gamma0: 0.8,
            ms: vec![2.0, 8.0],
            checkpoint_level: 6,
            alpha_margin: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub m: f64,
    /// `sup_{s<t} (E‖u_t - u_s‖^m)^{1/m} / (t-s)^{γ0/2}`.
    pub value: f64,
    pub argmax: (f64, f64),
    /// `value / (‖u0‖_{H^{γ0/2}} + ‖Σ²‖_{L^p}^{1/2})`.
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevEstimate {
    pub m: f64,
    /// `E sup_n ‖u^n‖^m_{H^{γ0}}`.
    pub moment: Estimate,
    /// `moment^{1/m}`.
    pub root: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationCheck {
    pub m: f64,
    pub alpha: f64,
    /// `2α + γ0`; the kernel is integrable only below 1.
    pub exponent: f64,
    pub integrable: bool,
    pub lhs: f64,
    /// `∫_0^T E(Σ_{t_n<s} Δt (s-t_n)^{-2α-γ0} ‖σ‖²_{HS})^{m/2} ds` on the checkpoints.
    pub rhs: f64,
    pub fitted_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriRung {
    pub epsilon: Option<f64>,
    pub lp_norm: f64,
    pub initial_norm: f64,
    pub holder: Vec<HolderEstimate>,
    pub sobolev: Vec<SobolevEstimate>,
    pub factorization: Vec<FactorizationCheck>,
}

impl AprioriRung {
    pub fn holder_at(&self, m: f64) -> Option<&HolderEstimate> {
        self.holder.iter().find(|h| h.m == m)
    }

    pub fn sobolev_at(&self, m: f64) -> Option<&SobolevEstimate> {
        self.sobolev.iter().find(|h| h.m == m)
    }
}

/// Both a-priori estimates for one coefficient, from one ensemble.
pub fn apriori_bounds<C, E>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    sigma: &C,
    epsilon: Option<f64>,
    lp_norm: f64,
    opts: &AprioriOptions,
) -> Result<AprioriRung>
where
    C: Coefficient + ?Sized,
    E: Executor + ?Sized,
{
    check(!opts.ms.is_empty(), "m", 0.0, "at least one moment")?;
    for &m in &opts.ms {
        check(m >= 2.0, "m", m, "m >= 2")?;
    }
    let n_t = spec.n_steps();
    let level = opts.checkpoint_level.min(n_t.trailing_zeros());
    let cps = checkpoints(n_t, level)?;
    let cp_times: Vec<f64> = cps.iter().map(|&j| spec.w.time(j)).collect();
    let grid = spec.grid();
    let dx = grid.dx();
    let dt = spec.dt();
    let wsum = weight_sum(sigma);
    let weights = sobolev_weights(spec.k_max, opts.gamma0);
    let n_cp = cps.len();
    let pairs: Vec<(usize, usize)> = (0..n_cp).flat_map(|a| (a + 1..n_cp).map(move |b| (a, b))).collect();
    let alphas: Vec<f64> = opts.ms.iter().map(|m| 1.0 / m + opts.alpha_margin).collect();

    struct Sample {
        increments: Vec<f64>,
        sup: f64,
        factor: Vec<f64>,
    }

    let per_sample = spec.map(exec, |i| {
        let mut states = Vec::with_capacity(n_cp);
        let mut hs = Vec::with_capacity(n_t);
        let mut sup_sq = 0.0f64;
        let mut next_cp = 0;
        let last = spec.run(sigma, i, |v| {
            hs.push(hs_from_view(v, dx, wsum));
            sup_sq = sup_sq.max(sobolev_sq(v.state, &weights));
            if next_cp < n_cp && cps[next_cp] == v.step {
                states.push(v.state.clone());
                next_cp += 1;
            }
        })?;
        sup_sq = sup_sq.max(sobolev_sq(&last, &weights));
        states.push(last);
        let increments = pairs.iter().map(|&(a, b)| states[b].sub(&states[a]).l2_norm()).collect();
        let factor = opts
            .ms
            .iter()
            .zip(&alphas)
            .map(|(&m, &alpha)| {
                let beta = 2.0 * alpha + opts.gamma0;
                let mut total = 0.0;
                for j in 1..n_cp {
                    let s = cp_times[j];
                    let y: f64 = hs[..cps[j]]
                        .iter()
                        .enumerate()
                        .map(|(n, h)| dt * libm::pow(s - n as f64 * dt, -beta) * h)
                        .sum();
                    total += (cp_times[j] - cp_times[j - 1]) * libm::pow(y, m / 2.0);
                }
                total
            })
            .collect();
        Ok(Sample {
            increments,
            sup: libm::sqrt(sup_sq),
            factor,
        })
    })?;

    let initial_norm = spec.u0.sobolev_norm(opts.gamma0 / 2.0);
    let composite = initial_norm + libm::sqrt(lp_norm);
    let holder = opts
        .ms
        .iter()
        .map(|&m| {
            let mut best = (0.0, (0.0, 0.0));
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let mean = per_sample.iter().map(|r| libm::pow(r.increments[k], m)).sum::<f64>() / spec.samples as f64;
                let h = cp_times[b] - cp_times[a];
                let v = libm::pow(mean, 1.0 / m) / libm::pow(h, opts.gamma0 / 2.0);
                if v > best.0 {
                    best = (v, (cp_times[a], cp_times[b]));
                }
            }
            HolderEstimate {
                m,
                value: best.0,
                argmax: best.1,
                constant: if composite > 0.0 { best.0 / composite } else { 0.0 },
            }
        })
        .collect();
    let sobolev: Vec<SobolevEstimate> = opts
        .ms
        .iter()
        .map(|&m| {
            let xs: Vec<f64> = per_sample.iter().map(|r| libm::pow(r.sup, m)).collect();
            let moment = Estimate::of(&xs);
            SobolevEstimate {
                m,
                moment,
                root: libm::pow(moment.mean, 1.0 / m),
            }
        })
        .collect();
    let factorization = opts
        .ms
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let alpha = alphas[k];
            let exponent = 2.0 * alpha + opts.gamma0;
            let rhs = per_sample.iter().map(|r| r.factor[k]).sum::<f64>() / spec.samples as f64;
            let lhs = sobolev[k].moment.mean;
            FactorizationCheck {
                m,
                alpha,
                exponent,
                integrable: exponent < 1.0,
                lhs,
                rhs,
                fitted_constant: if rhs > 0.0 { lhs / rhs } else { 0.0 },
            }
        })
        .collect();
    Ok(AprioriRung {
        epsilon,
        lp_norm,
        initial_norm,
        holder,
        sobolev,
        factorization,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriTable {
    pub rungs: Vec<AprioriRung>,
    /// `(m, max/min over the ladder)` of the Hölder estimates.
    pub holder_spread: Vec<(f64, f64)>,
    /// `(m, max/min over the ladder)` of `(E sup ‖u‖^m)^{1/m}`.
    pub sobolev_spread: Vec<(f64, f64)>,
}

impl AprioriTable {
    pub fn passed(&self, factor: f64) -> bool {
        self.holder_spread.iter().chain(&self.sobolev_spread).all(|&(_, r)| r <= factor)
    }
}

/// [`apriori_bounds`] down an ε-ladder with shared noise seeds.
pub fn apriori_ladder<E: Executor + ?Sized>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    rungs: &[MollifiedDiffusion],
    opts: &AprioriOptions,
) -> Result<AprioriTable> {
    check(rungs.len() >= 2, "ladder", rungs.len() as f64, "at least two rungs")?;
    let rungs: Vec<AprioriRung> = rungs
        .iter()
        .map(|r| apriori_bounds(spec, exec, r, Some(r.epsilon), r.lp_norm(), opts))
        .collect::<Result<_>>()?;
    let holder_spread = opts
        .ms
        .iter()
        .map(|&m| {
            let v: Vec<f64> = rungs.iter().filter_map(|r| r.holder_at(m)).map(|h| h.value).collect();
            (m, ladder_spread(&v))
        })
        .collect();
    let sobolev_spread = opts
        .ms
        .iter()
        .map(|&m| {
            let v: Vec<f64> = rungs.iter().filter_map(|r| r.sobolev_at(m)).map(|h| h.root).collect();
            (m, ladder_spread(&v))
        })
        .collect();
    Ok(AprioriTable {
        rungs,
        holder_spread,
        sobolev_spread,
    })
}

// ---------------------------------------------------------------------------
// Cauchy in ε

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyRow {
    pub epsilon: f64,
    pub epsilon_next: f64,
    /// `E sup_n ‖Σ_{m<n} (σ_ε - σ_ε')(u^m - w_m) ΔW_m‖²_{L²}`.
    pub distance: Estimate,
    /// `‖Σ²_{ε,ε'}‖_{L^p}`.
    pub sigma_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyTable {
    pub rows: Vec<CauchyRow>,
    pub distance_monotone: bool,
    pub sigma_monotone: bool,
    /// Smallest relative decrease `1 - d_{i+1}/d_i` of the distance column.
    pub min_reduction: f64,
}

/// Relative slack allowed when calling a column monotone.
pub const MONOTONE_SLACK: f64 = 0.1;

/// Distances between consecutive rungs along one frozen trajectory `u`,
/// solved with the last rung's coefficient. Each rung carries the noise
/// seed of its ensemble; all must equal `spec.seed`.
pub fn cauchy_in_epsilon<E: Executor + ?Sized>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    rungs: &[(&MollifiedDiffusion, u64)],
) -> Result<CauchyTable> {
    check(rungs.len() >= 2, "ladder", rungs.len() as f64, "at least two rungs")?;
    if rungs.iter().any(|&(_, seed)| seed != spec.seed) {
        return Err(Error::Uncoupled);
    }
    let driver = rungs.last().expect("non-empty").0;
    if rungs.iter().any(|(r, _)| r.weights() != driver.weights()) {
        return Err(Error::Mismatch("rungs use different mode weights".into()));
    }
    let grid = spec.grid();
    let dx = grid.dx();
    let m_pts = grid.points();
    let n_pairs = rungs.len() - 1;
    let per_sample = spec.map(exec, |i| {
        let mut integrals = vec![vec![0.0; m_pts]; n_pairs];
        let mut sup = vec![0.0f64; n_pairs];
        spec.run(driver, i, |v| {
            for (k, acc) in integrals.iter_mut().enumerate() {
                let (a, b) = (rungs[k].0, rungs[k + 1].0);
                let mut norm = 0.0;
                for (x, &u) in acc.iter_mut().zip(v.points) {
                    let y = u - v.shift;
                    *x += (a.profile(y) - b.profile(y)) * v.xi;
                    norm += *x * *x;
                }
                sup[k] = sup[k].max(dx * norm);
            }
        })?;
        Ok(sup)
    })?;
    let rows: Vec<CauchyRow> = (0..n_pairs)
        .map(|k| {
            let xs: Vec<f64> = per_sample.iter().map(|r| r[k]).collect();
            CauchyRow {
                epsilon: rungs[k].0.epsilon,
                epsilon_next: rungs[k + 1].0.epsilon,
                distance: Estimate::of(&xs),
                sigma_distance: mollification_distance(rungs[k].0, rungs[k + 1].0),
            }
        })
        .collect();
    let monotone = |col: Vec<f64>| col.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK));
    let min_reduction = rows
        .windows(2)
        .map(|w| 1.0 - w[1].distance.mean / w[0].distance.mean)
        .fold(f64::INFINITY, f64::min);
    Ok(CauchyTable {
        distance_monotone: monotone(rows.iter().map(|r| r.distance.mean).collect()),
        sigma_monotone: monotone(rows.iter().map(|r| r.sigma_distance).collect()),
        min_reduction,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Martingale defects

/// Bounded functionals of the solution up to time `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    One,
    /// `tanh(u_s(x))`.
    TanhAt { x: f64 },
}

/// `u(x)` of a spectral field.
pub fn eval_at(u: &SpectralField, x: f64) -> f64 {
    let c = u.coefficients();
    let mut acc = c[0].re;
    for (k, ck) in c.iter().enumerate().skip(1) {
        let (sn, cs) = libm::sincos(k as f64 * x);
        acc += 2.0 * (ck.re * cs - ck.im * sn);
    }
    acc / SQRT_2PI
}

impl Functional {
    pub fn eval(&self, u: &SpectralField) -> f64 {
        match *self {
            Functional::One => 1.0,
            Functional::TanhAt { x } => libm::tanh(eval_at(u, x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleOptions {
    pub s_index: usize,
    pub t_index: usize,
    pub functionals: Vec<Functional>,
    /// `(i, j)`: noise mode `i`, solution coordinate `j`.
    pub modes: Vec<(usize, usize)>,
    /// Pass threshold in standard errors.
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectRow {
    pub functional: Functional,
    pub noise_mode: usize,
    pub mode: usize,
    /// `E[Φ (M_t - M_s)]`.
    pub first: Estimate,
    /// `E[Φ (M_t² - M_s² - ⟨M⟩_{s,t})]`.
    pub second: Estimate,
    /// `E[Φ (M_t β_t - M_s β_s - ⟨M, β⟩_{s,t})]`.
    pub third: Estimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTable {
    pub s: f64,
    pub t: f64,
    pub rows: Vec<DefectRow>,
}

impl MartingaleTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn max_abs_defect(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.first.mean, r.second.mean, r.third.mean])
            .map(libm::fabs)
            .fold(0.0, f64::max)
    }
}

/// `M^j_n = ⟨u^n - u^0 - Σ_{m<n} (e^{Δ Δt} - 1)(u^m + g^m), c_j⟩` in the real
/// cosine basis, which for the exponential Euler scheme is `Σ_{m<n} ⟨g^m, c_j⟩`.
pub fn martingale_check<C, E>(
    spec: &EnsembleSpec<'_>,
    exec: &E,
    sigma: &C,
    opts: &MartingaleOptions,
) -> Result<MartingaleTable>
where
    C: Coefficient + ?Sized,
    E: Executor + ?Sized,
{
    let (si, ti) = (opts.s_index, opts.t_index);
    check(si < ti, "s_index", si as f64, "s_index < t_index")?;
    check(ti <= spec.n_steps(), "t_index", ti as f64, "t_index <= n_t")?;
    for &(i, j) in &opts.modes {
        if i >= sigma.k_noise() || j > spec.k_max {
            return Err(Error::Mismatch(format!("mode pair ({i}, {j}) is out of range")));
        }
    }
    let grid = spec.grid();
    let dt = spec.dt();
    let weights = sigma.weights();
    let wsum = weight_sum(sigma);
    let n_modes = opts.modes.len();
    let n_phi = opts.functionals.len();

    // Per sample: functionals, then per mode pair the three raw defects.
    let per_sample = spec.map(exec, |i| {
        let mut m = vec![0.0; n_modes];
        let mut beta = vec![0.0; n_modes];
        let mut m_s = vec![0.0; n_modes];
        let mut beta_s = vec![0.0; n_modes];
        let mut qv = vec![0.0; n_modes];
        let mut cross = vec![0.0; n_modes];
        let mut phi = vec![0.0; n_phi];
        let mut buf = vec![num_complex::Complex64::new(0.0, 0.0); grid.points()];
        let mut s_hat = SpectralField::zeros(spec.k_max);
        let capture = |phi: &mut [f64], u: &SpectralField| {
            for (p, f) in phi.iter_mut().zip(&opts.functionals) {
                *p = f.eval(u);
            }
        };
        let last = spec.run(sigma, i, |v| {
            if v.step == si {
                capture(&mut phi, v.state);
                m_s.copy_from_slice(&m);
                beta_s.copy_from_slice(&beta);
            }
            if v.step >= ti {
                return;
            }
            grid.from_points_with(v.profile, &mut buf, &mut s_hat);
            for (k, &(ni, j)) in opts.modes.iter().enumerate() {
                let c = s_hat.cosine_coordinate(j);
                m[k] += v.noise.cosine_coordinate(j);
                beta[k] += v.increments[ni];
                if v.step >= si {
                    qv[k] += wsum * c * c * dt;
                    cross[k] += weights[ni] * c * dt;
                }
            }
        })?;
        if si == spec.n_steps() {
            capture(&mut phi, &last);
        }
        let raw: Vec<[f64; 3]> = (0..n_modes)
            .map(|k| {
                [
                    m[k] - m_s[k],
                    m[k] * m[k] - m_s[k] * m_s[k] - qv[k],
                    m[k] * beta[k] - m_s[k] * beta_s[k] - cross[k],
                ]
            })
            .collect();
        Ok((phi, raw))
    })?;

    let mut rows = Vec::with_capacity(n_phi * n_modes);
    for (p, &functional) in opts.functionals.iter().enumerate() {
        for (k, &(noise_mode, mode)) in opts.modes.iter().enumerate() {
            let est = |d: usize| {
                let xs: Vec<f64> = per_sample.iter().map(|(phi, raw)| phi[p] * raw[k][d]).collect();
                Estimate::of(&xs)
            };
            let (first, second, third) = (est(0), est(1), est(2));
            let passed = [first, second, third].iter().all(|e| e.z_score(0.0) <= opts.z_max);
            rows.push(DefectRow {
                functional,
                noise_mode,
                mode,
                first,
                second,
                third,
                passed,
            });
        }
    }
    Ok(MartingaleTable {
        s: spec.w.time(si),
        t: spec.w.time(ti),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Sequential;
    use crate::spde::coefficient::{mollify, DiffusionCoefficient, Sigma2};
    use num_complex::Complex64;

    fn zero_path(n: usize) -> SamplePath {
        SamplePath::from_values(1.0, vec![0.0; n + 1]).unwrap()
    }

    fn mode_one(k_max: usize, amp: f64) -> SpectralField {
        let mut u = SpectralField::zeros(k_max);
        u.set(1, Complex64::new(amp, 0.0));
        u
    }

    #[test]
    fn eval_matches_grid() {
        let mut u = mode_one(6, 0.4);
        u.set(3, Complex64::new(-0.2, 0.7));
        u.set(0, Complex64::new(1.1, 0.0));
        let grid = TorusGrid::oversampled(6);
        let pts = grid.to_points(&u);
        for m in [0, 5, 17] {
            assert!((eval_at(&u, grid.x(m)) - pts[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn isometry_constant_sigma() {
        let w = zero_path(64);
        let u0 = SpectralField::zeros(4);
        let spec = EnsembleSpec { u0: &u0, w: &w, k_max: 4, samples: 2000, seed: 3 };
        let c = 0.5;
        let sigma = DiffusionCoefficient::new(Sigma2::Constant(c), 4, 2.0).unwrap();
        let r = ito_isometry_check(&spec, &Sequential, &sigma, None, &[2.0, 4.0]).unwrap();
        let exact = 2.0 * core::f64::consts::PI * c * c;
        assert!((r.rhs.mean - exact).abs() < 1e-9 * exact);
        assert!(r.lhs.z_score(exact) < 3.5, "{:?}", r.lhs);
        assert!(r.bdg.iter().all(|b| b.ratio.is_finite() && b.ratio >= 1.0));
    }

    #[test]
    fn zero_sigma_gives_zero_everything() {
        let w = crate::paths::generate_fbm(32, 1.0, 0.3, 1).unwrap();
        let u0 = mode_one(4, 1.0);
        let spec = EnsembleSpec { u0: &u0, w: &w, k_max: 4, samples: 8, seed: 1 };
        let sigma = DiffusionCoefficient::zero(3);
        let iso = ito_isometry_check(&spec, &Sequential, &sigma, None, &[2.0]).unwrap();
        assert_eq!((iso.lhs.mean, iso.rhs.mean, iso.relative_gap), (0.0, 0.0, 0.0));
        let opts = MartingaleOptions {
            s_index: 16,
            t_index: 32,
            functionals: vec![Functional::One, Functional::TanhAt { x: 0.3 }],
            modes: vec![(0, 0), (1, 1), (2, 2)],
            z_max: 3.0,
        };
        let mt = martingale_check(&spec, &Sequential, &sigma, &opts).unwrap();
        assert_eq!(mt.max_abs_defect(), 0.0);
        assert!(mt.passed());
    }

    #[test]
    fn heat_flow_holder_closed_form() {
        let w = zero_path(64);
        let u0 = mode_one(4, 1.0);
        let spec = EnsembleSpec { u0: &u0, w: &w, k_max: 4, samples: 2, seed: 1 };
        let sigma = DiffusionCoefficient::zero(2);
        let opts = AprioriOptions { gamma0: 0.8, ms: vec![2.0], checkpoint_level: 3, alpha_margin: 0.01 };
        let r = apriori_bounds(&spec, &Sequential, &sigma, None, 0.0, &opts).unwrap();
        let norm = u0.l2_norm();
        let mut best = 0.0f64;
        for a in 0..=8 {
            for b in a + 1..=8 {
                let (s, t) = (a as f64 / 8.0, b as f64 / 8.0);
                best = best.max((libm::exp(-s) - libm::exp(-t)) * norm / libm::pow(t - s, 0.4));
            }
        }
        assert!((r.holder[0].value - best).abs() < 1e-12, "{} {best}", r.holder[0].value);
        assert!((r.sobolev[0].root - u0.sobolev_norm(0.8)).abs() < 1e-12);
    }

    #[test]
    fn cauchy_requires_coupling() {
        let w = zero_path(16);
        let u0 = SpectralField::zeros(4);
        let spec = EnsembleSpec { u0: &u0, w: &w, k_max: 4, samples: 4, seed: 7 };
        let base = DiffusionCoefficient::new(Sigma2::Gaussian { amplitude: 1.0, length: 1.0 }, 3, 2.0).unwrap();
        let a = mollify(&base, 0.4).unwrap();
        let b = mollify(&base, 0.2).unwrap();
        assert_eq!(cauchy_in_epsilon(&spec, &Sequential, &[(&a, 7), (&b, 8)]), Err(Error::Uncoupled));
        let same = cauchy_in_epsilon(&spec, &Sequential, &[(&a, 7), (&a, 7)]).unwrap();
        assert_eq!(same.rows[0].distance.mean, 0.0);
        assert_eq!(same.rows[0].sigma_distance, 0.0);
        let t = cauchy_in_epsilon(&spec, &Sequential, &[(&a, 7), (&b, 7)]).unwrap();
        assert!(t.rows[0].distance.mean > 0.0);
    }

    #[test]
    fn identification_constant_sigma_is_exact() {
        let w = crate::paths::generate_fbm(64, 1.0, 0.3, 2).unwrap();
        let u0 = mode_one(4, 0.3);
        let spec = EnsembleSpec { u0: &u0, w: &w, k_max: 4, samples: 3, seed: 2 };
        // Constant inside the cutoff: the germ is additive.
        let sigma = mollify(&DiffusionCoefficient::new(Sigma2::Constant(0.5), 2, 2.0).unwrap(), 0.05).unwrap();
        let grid = SpatialGrid::covering_with_spacing(&w, 0.1, 0.01).unwrap();
        let opts = IdentificationOptions { level: 6, ..Default::default() };
        let r = identification_sewing(&spec, &Sequential, &sigma, &grid, 0, 64, &opts).unwrap();
        let exact = 2.0 * core::f64::consts::PI * 0.25;
        for s in &r.samples {
            assert!((s.direct - exact).abs() < 1e-9, "{s:?}");
            assert!(s.relative_gap < 1e-9, "{s:?}");
        }
    }

    #[test]
    fn volterra_constant_sigma() {
        let w = zero_path(64);
        let u0 = SpectralField::zeros(4);
        let spec = EnsembleSpec { u0: &u0, w: &w, k_max: 4, samples: 2, seed: 2 };
        let sigma = DiffusionCoefficient::new(Sigma2::Constant(1.0), 2, 2.0).unwrap();
        let opts = VolterraOptions {
            eta: 0.5,
            gamma0: 0.8,
            delta: 0.05,
            m: 2.0,
            pairs: vec![(0, 64), (32, 64)],
            holder_level: 4,
        };
        let r = volterra_bound_check(&spec, &Sequential, &sigma, None, 1.0, &opts).unwrap();
        let two_pi = 2.0 * core::f64::consts::PI;
        assert!((r.pairs[0].norm - two_pi * 2.0).abs() < 1e-3 * two_pi, "{:?}", r.pairs[0]);
        assert!((r.pairs[1].norm - two_pi * 2.0 * libm::sqrt(0.5)).abs() < 1e-3 * two_pi, "{:?}", r.pairs[1]);
    }
}
