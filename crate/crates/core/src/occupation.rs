//! Occupation measures, local times and averaging operators of a sampled path.
//!
//! The averaged field `(T^{-w}_{s,t} f)(x) = ∫_s^t f(x - w_r) dr` is computed
//! two ways: directly by left-endpoint time quadrature, and as the
//! convolution `f ∗ L_{s,t}` with the histogram local time. The convolution
//! integrates `f` exactly over each bin, so the two agree up to the
//! histogram's spatial resolution even for spiky `f`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::check;
use crate::fft::Fft;
use crate::paths::SamplePath;
use crate::profile::Profile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_bins: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_bins: usize) -> Result<Self> {
        check(x_min < x_max, "x_max", x_max, "x_min < x_max")?;
        check(x_min.is_finite() && x_max.is_finite(), "x_min", x_min, "finite")?;
        check(n_bins >= 2, "n_bins", n_bins as f64, "n_bins >= 2")?;
        Ok(Self { x_min, x_max, n_bins })
    }

    /// Grid over `[min w - pad, max w + pad]` for the whole path.
    pub fn covering(path: &SamplePath, pad: f64, n_bins: usize) -> Result<Self> {
        let (lo, hi) = path.range(0, path.n_steps());
        Self::new(lo - pad, hi + pad, n_bins)
    }

    /// Grid of approximately `dx` spacing covering the path with padding.
    pub fn covering_with_spacing(path: &SamplePath, pad: f64, dx: f64) -> Result<Self> {
        check(dx > 0.0, "dx", dx, "dx > 0")?;
        let (lo, hi) = path.range(0, path.n_steps());
        let n = libm::ceil((hi - lo + 2.0 * pad) / dx) as usize;
        Self::new(lo - pad, lo - pad + n.max(2) as f64 * dx, n.max(2))
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|i| self.center(i)).collect()
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        let b = libm::floor((x - self.x_min) * self.n_bins as f64 / (self.x_max - self.x_min)) as usize;
        Some(b.min(self.n_bins - 1))
    }
}

fn check_index(path: &SamplePath, t_index: usize) -> Result<()> {
    check(
        t_index <= path.n_steps(),
        "t_index",
        t_index as f64,
        "t_index <= n_steps",
    )
}

fn accumulate(path: &SamplePath, grid: &SpatialGrid, from: usize, to: usize, mass: &mut [f64]) -> Result<()> {
    let dt = path.dt();
    let values = path.values();
    for (j, &w) in values.iter().enumerate().take(to).skip(from) {
        let b = grid.bin_of(w).ok_or(Error::OutsideGrid {
            index: j,
            value: w,
            lo: grid.x_min,
            hi: grid.x_max,
        })?;
        mass[b] += dt;
    }
    Ok(())
}

/// `μ_t(bin) = Δt · #{j < t_index : w_{t_j} ∈ bin}`.
pub fn occupation_measure(path: &SamplePath, grid: &SpatialGrid, t_index: usize) -> Result<Vec<f64>> {
    check_index(path, t_index)?;
    let mut mass = vec![0.0; grid.n_bins];
    accumulate(path, grid, 0, t_index, &mut mass)?;
    Ok(mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    Histogram,
    /// Gaussian kernel with the given standard deviation in space units.
    Kernel { bandwidth: f64 },
}

impl Smoothing {
    pub fn default_kernel(grid: &SpatialGrid) -> Self {
        Smoothing::Kernel {
            bandwidth: 2.0 * grid.dx(),
        }
    }
}

/// Discrete Gaussian weights summing to one, half-width `6·bandwidth`.
fn gaussian_weights(bandwidth: f64, dx: f64) -> Vec<f64> {
    let sd = bandwidth / dx;
    let half = libm::ceil(6.0 * sd).max(1.0) as usize;
    let mut w: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let z = (i as f64 - half as f64) / sd;
            libm::exp(-0.5 * z * z)
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Convolves grid values with the Gaussian kernel (zero outside the grid).
pub fn smooth(values: &[f64], bandwidth: f64, dx: f64) -> Vec<f64> {
    let w = gaussian_weights(bandwidth, dx);
    let half = w.len() / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let j = i as isize + k as isize - half as isize;
                if j >= 0 && (j as usize) < n {
                    acc += wk * values[j as usize];
                }
            }
            acc
        })
        .collect()
}

fn density(mass: Vec<f64>, grid: &SpatialGrid, smoothing: Smoothing) -> Vec<f64> {
    let dx = grid.dx();
    let hist: Vec<f64> = mass.into_iter().map(|m| m / dx).collect();
    match smoothing {
        Smoothing::Histogram => hist,
        Smoothing::Kernel { bandwidth } => smooth(&hist, bandwidth, dx),
    }
}

/// `L_t(x_i)` at the bin centres.
pub fn local_time(path: &SamplePath, grid: &SpatialGrid, t_index: usize, smoothing: Smoothing) -> Result<Vec<f64>> {
    Ok(density(occupation_measure(path, grid, t_index)?, grid, smoothing))
}

/// `L_{s,t}(x_i)` at the bin centres.
pub fn local_time_increment(
    path: &SamplePath,
    grid: &SpatialGrid,
    s_index: usize,
    t_index: usize,
    smoothing: Smoothing,
) -> Result<Vec<f64>> {
    check_index(path, t_index)?;
    check(s_index <= t_index, "s_index", s_index as f64, "s_index <= t_index")?;
    let mut mass = vec![0.0; grid.n_bins];
    accumulate(path, grid, s_index, t_index, &mut mass)?;
    Ok(density(mass, grid, smoothing))
}

/// Local time at a list of time indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    pub grid: SpatialGrid,
    pub dt: f64,
    pub t_indices: Vec<usize>,
    /// `values[j][i] = L_{t_{t_indices[j]}}(x_i)`.
    pub values: Vec<Vec<f64>>,
}

impl LocalTimeField {
    pub fn build(path: &SamplePath, grid: &SpatialGrid, t_indices: &[usize], smoothing: Smoothing) -> Result<Self> {
        let mut sorted = t_indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&last) = sorted.last() {
            check_index(path, last)?;
        }
        let mut mass = vec![0.0; grid.n_bins];
        let mut values = Vec::with_capacity(sorted.len());
        let mut done = 0;
        for &t in &sorted {
            accumulate(path, grid, done, t, &mut mass)?;
            done = t;
            values.push(density(mass.clone(), grid, smoothing));
        }
        Ok(Self {
            grid: *grid,
            dt: path.dt(),
            t_indices: sorted,
            values,
        })
    }

    /// `Σ_i L[j][i]·Δx`.
    pub fn mass(&self, j: usize) -> f64 {
        self.values[j].iter().sum::<f64>() * self.grid.dx()
    }

    /// `L_{s,t}` between two stored slices.
    pub fn increment(&self, a: usize, b: usize) -> Vec<f64> {
        self.values[b].iter().zip(&self.values[a]).map(|(x, y)| x - y).collect()
    }
}

/// `(‖g‖^{p}_{L^p} + ‖g'‖^{p}_{L^p})^{1/p}` of grid values, with `g'` by
/// centred differences. Used for `W^{1,p'}` norms of kernel-smoothed local
/// times; `p = ∞` gives the sum of the two sup norms.
pub fn w1p_norm(values: &[f64], dx: f64, p: f64) -> f64 {
    let n = values.len();
    let deriv: Vec<f64> = (0..n)
        .map(|i| {
            let l = if i == 0 { 0.0 } else { values[i - 1] };
            let r = if i + 1 == n { 0.0 } else { values[i + 1] };
            (r - l) / (2.0 * dx)
        })
        .collect();
    let a = crate::stats::lp_norm(values, dx, p);
    let b = crate::stats::lp_norm(&deriv, dx, p);
    if p.is_infinite() {
        a + b
    } else {
        libm::pow(libm::pow(a, p) + libm::pow(b, p), 1.0 / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMethod {
    Quadrature,
    Convolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedField {
    pub grid: SpatialGrid,
    pub s_index: usize,
    pub t_index: usize,
    pub s: f64,
    pub t: f64,
    /// `(T^{-w}_{s,t} f)(x_i)` at the bin centres.
    pub values: Vec<f64>,
}

fn finite(v: f64, argument: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { argument })
    }
}

/// `∫ f` over each offset cell `[(d-½)Δx, (d+½)Δx]`, `d = -(n-1)..=(n-1)`.
pub fn cell_integrals<P: Profile + ?Sized>(f: &P, dx: f64, n: usize, tol: f64) -> Result<Vec<f64>> {
    let bp = f.breakpoints();
    let mut out = Vec::with_capacity(2 * n - 1);
    for d in -(n as isize - 1)..=(n as isize - 1) {
        let lo = (d as f64 - 0.5) * dx;
        let hi = (d as f64 + 0.5) * dx;
        let v = crate::quad::integrate_pieces(|x| f.eval(x), lo, hi, &bp, tol).value;
        out.push(finite(v, 0.5 * (lo + hi))?);
    }
    Ok(out)
}

/// Linear convolution `c[k] = Σ_j a[j] b[k - j]` via FFT.
pub fn linear_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let fft = Fft::new(size);
    let mut fa: Vec<Complex64> = (0..size).map(|i| Complex64::new(*a.get(i).unwrap_or(&0.0), 0.0)).collect();
    let mut fb: Vec<Complex64> = (0..size).map(|i| Complex64::new(*b.get(i).unwrap_or(&0.0), 0.0)).collect();
    fft.forward(&mut fa);
    fft.forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft.inverse(&mut fa);
    fa[..len].iter().map(|z| z.re / size as f64).collect()
}

/// Precomputed cell integrals of `f` for repeated convolutions on one grid.
#[derive(Debug, Clone)]
pub struct CellConvolver {
    n: usize,
    fft: Fft,
    kernel_hat: Vec<Complex64>,
}

impl CellConvolver {
    pub fn new<P: Profile + ?Sized>(f: &P, grid: &SpatialGrid, tol: f64) -> Result<Self> {
        let n = grid.n_bins;
        let cells = cell_integrals(f, grid.dx(), n, tol)?;
        let size = (3 * n - 2).next_power_of_two();
        let fft = Fft::new(size);
        let mut kernel_hat: Vec<Complex64> = (0..size).map(|i| Complex64::new(*cells.get(i).unwrap_or(&0.0), 0.0)).collect();
        fft.forward(&mut kernel_hat);
        Ok(Self { n, fft, kernel_hat })
    }

    /// `Σ_b L_b F_{i-b}`: exact `(f ∗ L)(x_i)` for the piecewise-constant `L`.
    pub fn apply(&self, local_time: &[f64]) -> Vec<f64> {
        let size = self.kernel_hat.len();
        let mut buf: Vec<Complex64> = (0..size)
            .map(|i| Complex64::new(*local_time.get(i).unwrap_or(&0.0), 0.0))
            .collect();
        self.fft.forward(&mut buf);
        for (x, y) in buf.iter_mut().zip(&self.kernel_hat) {
            *x *= y;
        }
        self.fft.inverse(&mut buf);
        (0..self.n).map(|i| buf[i + self.n - 1].re / size as f64).collect()
    }
}

/// `(T^{-w}_{s,t} f)(x_i)` on the grid.
pub fn averaged_field<P: Profile + ?Sized>(
    path: &SamplePath,
    f: &P,
    s_index: usize,
    t_index: usize,
    grid: &SpatialGrid,
    method: AveragingMethod,
) -> Result<AveragedField> {
    check_index(path, t_index)?;
    check(s_index <= t_index, "s_index", s_index as f64, "s_index <= t_index")?;
    let values = match method {
        AveragingMethod::Quadrature => {
            let dt = path.dt();
            let w = &path.values()[s_index..t_index];
            let mut out = Vec::with_capacity(grid.n_bins);
            for i in 0..grid.n_bins {
                let x = grid.center(i);
                let mut acc = 0.0;
                for &wj in w {
                    acc += finite(f.eval(x - wj), x - wj)?;
                }
                out.push(acc * dt);
            }
            out
        }
        AveragingMethod::Convolution => {
            let l = local_time_increment(path, grid, s_index, t_index, Smoothing::Histogram)?;
            CellConvolver::new(f, grid, 1e-13)?.apply(&l)
        }
    };
    Ok(AveragedField {
        grid: *grid,
        s_index,
        t_index,
        s: path.time(s_index),
        t: path.time(t_index),
        values,
    })
}

/// `(f ∗ L)(y) = Σ_b L_b (G(y - lo_b) - G(y - hi_b))` at an arbitrary point,
/// given an antiderivative `G` of `f` and a histogram local time.
pub fn convolve_at<G: Fn(f64) -> f64>(local_time: &[f64], grid: &SpatialGrid, antiderivative: &G, y: f64) -> f64 {
    let dx = grid.dx();
    let mut acc = 0.0;
    for (b, &l) in local_time.iter().enumerate() {
        if l != 0.0 {
            let lo = grid.edge(b);
            acc += l * (antiderivative(y - lo) - antiderivative(y - lo - dx));
        }
    }
    acc
}

/// Non-empty bins of the histogram `L_{s,t}` as `(bin, density)` pairs,
/// sorted by bin.
pub fn local_time_cells(path: &SamplePath, grid: &SpatialGrid, s_index: usize, t_index: usize) -> Result<Vec<(usize, f64)>> {
    check_index(path, t_index)?;
    check(s_index <= t_index, "s_index", s_index as f64, "s_index <= t_index")?;
    let values = path.values();
    let mut bins = Vec::with_capacity(t_index - s_index);
    for (j, &w) in values.iter().enumerate().take(t_index).skip(s_index) {
        bins.push(grid.bin_of(w).ok_or(Error::OutsideGrid {
            index: j,
            value: w,
            lo: grid.x_min,
            hi: grid.x_max,
        })?);
    }
    bins.sort_unstable();
    let density = path.dt() / grid.dx();
    let mut cells: Vec<(usize, f64)> = Vec::new();
    for b in bins {
        match cells.last_mut() {
            Some((last, d)) if *last == b => *d += density,
            _ => cells.push((b, density)),
        }
    }
    Ok(cells)
}

/// [`convolve_at`] for a histogram given as non-empty cells.
pub fn convolve_cells_at<G: Fn(f64) -> f64>(cells: &[(usize, f64)], grid: &SpatialGrid, antiderivative: &G, y: f64) -> f64 {
    let dx = grid.dx();
    cells
        .iter()
        .map(|&(b, l)| {
            let lo = grid.edge(b);
            l * (antiderivative(y - lo) - antiderivative(y - lo - dx))
        })
        .sum()
}

/// Exponent bounds for the regularity of averaged fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityExponents {
    pub hurst: f64,
    pub p: f64,
    /// `1/(2H) - 1/(p ∧ 2)`
    pub lambda_max: f64,
}

impl RegularityExponents {
    /// `1 - (λ + ½)H` (an open bound).
    pub fn gamma_max(&self, lambda: f64) -> f64 {
        1.0 - (lambda + 0.5) * self.hurst
    }

    /// Strictly inside the region: `λ < λ_max` and `γ < γ_max(λ)`.
    pub fn contains(&self, lambda: f64, gamma: f64) -> bool {
        lambda < self.lambda_max && gamma < self.gamma_max(lambda)
    }
}

pub fn regularity_exponents(hurst: f64, p: f64) -> Result<RegularityExponents> {
    check(hurst > 0.0 && hurst < 1.0, "H", hurst, "0 < H < 1")?;
    check(p >= 1.0, "p", p, "p >= 1")?;
    Ok(RegularityExponents {
        hurst,
        p,
        lambda_max: 1.0 / (2.0 * hurst) - 1.0 / p.min(2.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    pub h_bound: f64,
    pub gamma0_bound: f64,
    pub hurst: f64,
    pub p: f64,
    pub gamma0: f64,
}

/// `H_bound = ½(1 + 1/(p∧4/3))^{-1}`, `γ0_bound = 1 - (4 + 1/(p/4 ∧ 1/3))^{-1}`.
pub fn assumption_check(hurst: f64, p: f64, gamma0: f64) -> Result<Admissibility> {
    check(hurst > 0.0 && hurst < 1.0, "H", hurst, "0 < H < 1")?;
    check(p >= 1.0, "p", p, "p >= 1")?;
    // Reciprocals taken branchwise so rational inputs give correctly rounded bounds.
    let inv_a = if 3.0 * p >= 4.0 { 0.75 } else { 1.0 / p };
    let inv_b = if 3.0 * p >= 4.0 { 3.0 } else { 4.0 / p };
    let h_bound = 0.5 / (1.0 + inv_a);
    let gamma0_bound = (3.0 + inv_b) / (4.0 + inv_b);
    Ok(Admissibility {
        admissible: hurst < h_bound && gamma0 > 0.5 && gamma0 < gamma0_bound,
        h_bound,
        gamma0_bound,
        hurst,
        p,
        gamma0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityOptions {
    /// Spatial resolution of the averaged field.
    pub dx: f64,
    /// Padding around the path range.
    pub pad: f64,
    pub min_level: u32,
    pub max_level: u32,
    /// Kernel bandwidth for the C¹ seminorm, in units of `dx`.
    pub bandwidth: f64,
    /// Accepted band for the ratio of successive refinement estimates.
    pub ratio_band: (f64, f64),
    /// Growth exponent (in `log C / log(1/h)`) separating stable from divergent.
    pub growth_threshold: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        Self {
            dx: 2e-3,
            pad: 4.0,
            min_level: 2,
            max_level: 10,
            bandwidth: 2.0,
            ratio_band: (0.5, 2.0),
            growth_threshold: 0.0,
        }
    }
}

/// Refinement behaviour of one Hölder-in-time constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantTrend {
    pub exponent: f64,
    /// Per path, sup over intervals of each level.
    pub per_level: Vec<Vec<f64>>,
    /// Per path, sup over all levels up to each level.
    pub cumulative: Vec<Vec<f64>>,
    /// Every successive cumulative ratio is inside the band, for every path.
    pub ratios_in_band: bool,
    /// Mean over paths of the fitted slope of `log C_level` against `log(1/h)`.
    pub growth: f64,
    /// Median over all intervals and paths of each level's scaled norm.
    pub typical: Vec<f64>,
    /// Fitted slope of `log typical` against `log(1/h)`.
    pub typical_growth: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub levels: Vec<u32>,
    pub lp_norm: f64,
    pub p: f64,
    pub c0: ConstantTrend,
    pub c1: ConstantTrend,
}

fn trend(
    exponent: f64,
    per_level: Vec<Vec<f64>>,
    mut samples: Vec<Vec<f64>>,
    levels: &[u32],
    opts: &RegularityOptions,
) -> ConstantTrend {
    let typical: Vec<f64> = samples
        .iter_mut()
        .map(|v| {
            v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            v.get(v.len() / 2).copied().unwrap_or(0.0)
        })
        .collect();
    let cumulative: Vec<Vec<f64>> = per_level
        .iter()
        .map(|row| {
            let mut m = 0.0f64;
            row.iter()
                .map(|&v| {
                    m = m.max(v);
                    m
                })
                .collect()
        })
        .collect();
    let ratios_in_band = cumulative.iter().all(|row| {
        row.windows(2).all(|w| {
            if w[0] == 0.0 {
                w[1] == 0.0
            } else {
                let r = w[1] / w[0];
                r >= opts.ratio_band.0 && r <= opts.ratio_band.1
            }
        })
    });
    let xs: Vec<f64> = levels.iter().map(|&l| l as f64 * core::f64::consts::LN_2).collect();
    let mut growth = 0.0;
    let mut counted = 0;
    for row in &per_level {
        if row.iter().all(|&v| v > 0.0) {
            let ys: Vec<f64> = row.iter().map(|&v| libm::log(v)).collect();
            growth += crate::stats::slope(&xs, &ys);
            counted += 1;
        }
    }
    let growth = if counted > 0 { growth / counted as f64 } else { 0.0 };
    let typical_growth = if typical.iter().all(|&v| v > 0.0) {
        let ys: Vec<f64> = typical.iter().map(|&v| libm::log(v)).collect();
        crate::stats::slope(&xs, &ys)
    } else {
        0.0
    };
    ConstantTrend {
        exponent,
        per_level,
        cumulative,
        ratios_in_band,
        growth,
        typical,
        typical_growth,
        stable: ratios_in_band && typical_growth <= opts.growth_threshold,
    }
}

/// Estimates `sup ‖T^{-w}_{s,t} f‖_{C⁰}/|t-s|^{γ0}` and the `C¹` analogue with
/// exponent `γ1` over dyadic intervals of each level, for every path.
///
/// The field is the exact-cell convolution of `f` with histogram local times
/// sampled at the finest dyadic times; `C¹` adds the sup of centred
/// differences of the Gaussian-smoothed field.
pub fn averaged_field_regularity_check<P: Profile + ?Sized>(
    paths: &[SamplePath],
    f: &P,
    p: f64,
    gamma0: f64,
    gamma1: f64,
    opts: &RegularityOptions,
) -> Result<RegularityReport> {
    check(opts.min_level < opts.max_level, "max_level", opts.max_level as f64, "min_level < max_level")?;
    let levels: Vec<u32> = (opts.min_level..=opts.max_level).collect();
    let mut c0_rows = Vec::with_capacity(paths.len());
    let mut c1_rows = Vec::with_capacity(paths.len());
    let mut c0_all = vec![Vec::new(); levels.len()];
    let mut c1_all = vec![Vec::new(); levels.len()];
    for path in paths {
        let cells = 1usize << opts.max_level;
        check(
            path.n_steps() % cells == 0,
            "max_level",
            opts.max_level as f64,
            "2^max_level divides n_steps",
        )?;
        let grid = SpatialGrid::covering_with_spacing(path, opts.pad, opts.dx)?;
        let conv = CellConvolver::new(f, &grid, 1e-12)?;
        let stride = path.n_steps() / cells;
        let idx: Vec<usize> = (0..=cells).map(|k| k * stride).collect();
        let lt = LocalTimeField::build(path, &grid, &idx, Smoothing::Histogram)?;
        let fields: Vec<Vec<f64>> = lt.values.iter().map(|l| conv.apply(l)).collect();
        let dx = grid.dx();
        let horizon = path.horizon();
        let mut row0 = Vec::with_capacity(levels.len());
        let mut row1 = Vec::with_capacity(levels.len());
        for (li, &level) in levels.iter().enumerate() {
            let n = 1usize << level;
            let step = cells / n;
            let h = horizon / n as f64;
            let mut s0 = 0.0f64;
            let mut s1 = 0.0f64;
            for i in 0..n {
                let d: Vec<f64> = fields[(i + 1) * step]
                    .iter()
                    .zip(&fields[i * step])
                    .map(|(a, b)| a - b)
                    .collect();
                let sup = d.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
                let sm = smooth(&d, opts.bandwidth * dx, dx);
                let dsup = (1..sm.len() - 1)
                    .map(|k| libm::fabs(sm[k + 1] - sm[k - 1]) / (2.0 * dx))
                    .fold(0.0f64, f64::max);
                let q0 = sup / libm::pow(h, gamma0);
                let q1 = (sup + dsup) / libm::pow(h, gamma1);
                c0_all[li].push(q0);
                c1_all[li].push(q1);
                s0 = s0.max(q0);
                s1 = s1.max(q1);
            }
            row0.push(s0);
            row1.push(s1);
        }
        c0_rows.push(row0);
        c1_rows.push(row1);
    }
    Ok(RegularityReport {
        lp_norm: crate::profile::lp_norm(f, p, 1e-10),
        p,
        c0: trend(gamma0, c0_rows, c0_all, &levels, opts),
        c1: trend(gamma1, c1_rows, c1_all, &levels, opts),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::generate_fbm;
    use crate::profile::{Envelope, TruncatedPower};

    fn linear(n: usize) -> SamplePath {
        SamplePath::from_values(1.0, (0..=n).map(|j| j as f64 / n as f64).collect()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(1.0, 0.0, 4).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 1).is_err());
        let g = SpatialGrid::new(0.0, 1.0, 10).unwrap();
        assert_eq!(g.bin_of(1.0), Some(9));
        assert_eq!(g.bin_of(0.05), Some(0));
        assert_eq!(g.bin_of(1.1), None);
    }

    #[test]
    fn sparse_cells_match_dense_histogram() {
        let path = generate_fbm(512, 1.0, 0.3, 4).unwrap();
        let grid = SpatialGrid::covering(&path, 0.1, 300).unwrap();
        let dense = local_time_increment(&path, &grid, 100, 400, Smoothing::Histogram).unwrap();
        let cells = local_time_cells(&path, &grid, 100, 400).unwrap();
        let g = |y: f64| libm::atan(y);
        for y in [-0.3, 0.0, 0.7] {
            let a = convolve_at(&dense, &grid, &g, y);
            let b = convolve_cells_at(&cells, &grid, &g, y);
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn constant_path_is_dirac() {
        let path = SamplePath::from_values(1.0, vec![0.0; 101]).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 8).unwrap();
        let mu = occupation_measure(&path, &grid, 100).unwrap();
        assert!((mu[4] - 1.0).abs() < 1e-12);
        assert_eq!(mu.iter().filter(|&&m| m != 0.0).count(), 1);
        let l = local_time(&path, &grid, 100, Smoothing::Histogram).unwrap();
        assert!((l[4] - 1.0 / grid.dx()).abs() < 1e-9);
    }

    #[test]
    fn linear_path_is_uniform() {
        let path = linear(1000);
        let grid = SpatialGrid::new(0.0, 1.0, 10).unwrap();
        let mu = occupation_measure(&path, &grid, 1000).unwrap();
        for m in mu {
            assert!((m - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_grid_is_an_error() {
        let path = linear(10);
        let grid = SpatialGrid::new(0.0, 0.5, 10).unwrap();
        assert!(matches!(occupation_measure(&path, &grid, 10), Err(Error::OutsideGrid { .. })));
    }

    #[test]
    fn mass_and_monotonicity() {
        let path = generate_fbm(4096, 1.0, 0.3, 7).unwrap();
        let grid = SpatialGrid::covering(&path, 0.5, 128).unwrap();
        let idx = [1024, 2048, 4096];
        let f = LocalTimeField::build(&path, &grid, &idx, Smoothing::Histogram).unwrap();
        for (j, &t) in idx.iter().enumerate() {
            assert!((f.mass(j) - path.time(t)).abs() < 1e-12);
        }
        for j in 1..idx.len() {
            assert!(f.values[j].iter().zip(&f.values[j - 1]).all(|(a, b)| a >= b));
        }
        // Kernel smoothing keeps the mass when the padding absorbs the tails.
        let k = LocalTimeField::build(&path, &grid, &idx, Smoothing::default_kernel(&grid)).unwrap();
        assert!((k.mass(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_path_averaged_field() {
        let path = SamplePath::from_values(1.0, vec![0.0; 65]).unwrap();
        let grid = SpatialGrid::new(-2.0, 2.0, 16).unwrap();
        let f = |x: f64| libm::cos(x);
        let q = averaged_field(&path, &f, 16, 48, &grid, AveragingMethod::Quadrature).unwrap();
        for (i, v) in q.values.iter().enumerate() {
            assert!((v - 0.5 * libm::cos(grid.center(i))).abs() < 1e-12);
        }
        let one = |_: f64| 1.0;
        let c = averaged_field(&path, &one, 16, 48, &grid, AveragingMethod::Convolution).unwrap();
        for v in c.values {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn linearity() {
        let path = generate_fbm(1024, 1.0, 0.25, 3).unwrap();
        let grid = SpatialGrid::covering(&path, 1.0, 64).unwrap();
        let f1 = |x: f64| libm::exp(-x * x);
        let f2 = |x: f64| libm::sin(3.0 * x);
        let c = -2.5;
        let sum = |x: f64| f1(x) + c * f2(x);
        for method in [AveragingMethod::Quadrature, AveragingMethod::Convolution] {
            let a = averaged_field(&path, &f1, 0, 1024, &grid, method).unwrap();
            let b = averaged_field(&path, &f2, 0, 1024, &grid, method).unwrap();
            let s = averaged_field(&path, &sum, 0, 1024, &grid, method).unwrap();
            for i in 0..64 {
                assert!((s.values[i] - a.values[i] - c * b.values[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_profile_is_reported() {
        let path = SamplePath::from_values(1.0, vec![0.0; 5]).unwrap();
        let grid = SpatialGrid::new(-0.5, 0.5, 2).unwrap();
        let bad = |x: f64| libm::pow(libm::fabs(x), -0.4);
        let r = averaged_field(&path, &bad, 0, 4, &grid, AveragingMethod::Quadrature);
        assert!(r.is_ok());
        let grid = SpatialGrid::new(-0.5, 0.5, 3).unwrap();
        let r = averaged_field(&path, &bad, 0, 4, &grid, AveragingMethod::Quadrature);
        assert!(matches!(r, Err(Error::NonFinite { argument }) if argument == 0.0));
    }

    #[test]
    fn exponent_arithmetic() {
        let r = regularity_exponents(0.25, 2.0).unwrap();
        assert_eq!(r.lambda_max, 1.5);
        assert_eq!(r.gamma_max(1.0), 0.625);
        assert_eq!(regularity_exponents(0.1, 1.0).unwrap().lambda_max, 4.0);
        assert!(regularity_exponents(0.999999, 2.0).unwrap().lambda_max < 1e-5);
    }

    #[test]
    fn admissibility_arithmetic() {
        let a = assumption_check(0.2, 1.0, 0.8).unwrap();
        assert_eq!(a.h_bound, 0.25);
        assert_eq!(a.gamma0_bound, 0.875);
        let a = assumption_check(0.2, 4.0, 0.8).unwrap();
        assert_eq!(a.h_bound, 2.0 / 7.0);
        assert_eq!(a.gamma0_bound, 6.0 / 7.0);
        assert!(a.admissible);
        assert!(!assumption_check(0.3, 4.0, 0.8).unwrap().admissible);
        assert!(!assumption_check(0.2, 4.0, 0.5).unwrap().admissible);
    }

    #[test]
    fn w1p_of_smooth_bump() {
        let dx = 1e-3;
        let xs: Vec<f64> = (0..12000).map(|i| -6.0 + i as f64 * dx).collect();
        let g: Vec<f64> = xs.iter().map(|x| libm::exp(-x * x)).collect();
        // ‖g‖₂² = sqrt(π/2), ‖g'‖₂² = sqrt(π/2)
        let n = w1p_norm(&g, dx, 2.0);
        let expect = libm::sqrt(2.0 * libm::sqrt(core::f64::consts::FRAC_PI_2));
        assert!((n - expect).abs() < 1e-5);
    }

    #[test]
    fn stability_in_lp() {
        // Raising the cap of |x|^{-0.4}: ‖T(f - f_M)‖_{C⁰} ≲ ‖f - f_M‖_{L²}.
        let path = generate_fbm(2048, 1.0, 0.25, 11).unwrap();
        let grid = SpatialGrid::covering(&path, 2.0, 512).unwrap();
        let top = TruncatedPower::new(0.4, 1e3, Envelope::Gaussian).unwrap();
        let mut ratios = Vec::new();
        for cap in [2.0, 4.0, 8.0, 16.0] {
            let low = TruncatedPower::new(0.4, cap, Envelope::Gaussian).unwrap();
            let diff = move |x: f64| top.eval(x) - low.eval(x);
            let t = averaged_field(&path, &diff, 0, 2048, &grid, AveragingMethod::Quadrature).unwrap();
            let sup = t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let norm = libm::sqrt(
                crate::quad::integrate_pieces(|x| diff(x) * diff(x), -6.0, 6.0, &[-low.cap_radius(), 0.0, low.cap_radius()], 1e-12)
                    .value,
            );
            ratios.push(sup / norm);
        }
        assert!(ratios.iter().all(|r| r.is_finite()));
        for w in ratios.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{ratios:?}");
        }
    }
}
