//! Dyadic sewing of two-parameter germs.
//!
//! A germ `A_{s,t}` is summed over dyadic partitions of `[s, t]`,
//! `S_L = Σ_{i<2^L} A_{u_i, u_{i+1}}`, level by level. The engine stops at
//! the first level whose Cauchy gap falls below the tolerance and reports
//! the whole gap history as a convergence certificate. Volterra sewing weights
//! each term by `(τ - u)^{-η}` at the left endpoint `u`.
//!
//! Raw dyadic sums converge only at the rate of the germ's defect (linearly
//! in the mesh for smooth germs, like `h^{1-η}` for Volterra kernels). The
//! gap sequence is close to geometric, so the engine also reports the
//! geometric-tail limit `S_L + g_L·r/(1-r)`, with `g_L = S_L - S_{L-1}` and
//! `r` the observed gap ratio. The raw sums are always kept alongside.

use alloc::vec::Vec;

/// Values a germ may take: scalars or fixed-length real vectors.
pub trait SewValue: Copy + Send + Sync + core::fmt::Debug {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, a: f64) -> Self;
    fn norm(&self) -> f64;
}

impl SewValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, a: f64) -> Self {
        self * a
    }
    fn norm(&self) -> f64 {
        libm::fabs(*self)
    }
}

impl<const N: usize> SewValue for [f64; N] {
    fn zero() -> Self {
        [0.0; N]
    }
    fn add(self, other: Self) -> Self {
        core::array::from_fn(|i| self[i] + other[i])
    }
    fn sub(self, other: Self) -> Self {
        core::array::from_fn(|i| self[i] - other[i])
    }
    fn scale(self, a: f64) -> Self {
        core::array::from_fn(|i| self[i] * a)
    }
    fn norm(&self) -> f64 {
        libm::sqrt(self.iter().map(|x| x * x).sum())
    }
}

/// Optional regularity exponents a germ declares about itself.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hints {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

pub trait Germ: Sync {
    type Value: SewValue;

    fn eval(&self, s: f64, t: f64) -> Self::Value;

    fn hints(&self) -> Hints {
        Hints::default()
    }
}

impl<F, V> Germ for F
where
    F: Fn(f64, f64) -> V + Sync,
    V: SewValue,
{
    type Value = V;

    fn eval(&self, s: f64, t: f64) -> V {
        self(s, t)
    }
}

/// Attaches exponent hints to another germ.
#[derive(Debug, Clone, Copy)]
pub struct Hinted<G> {
    pub germ: G,
    pub hints: Hints,
}

impl<G: Germ> Germ for Hinted<G> {
    type Value = G::Value;

    fn eval(&self, s: f64, t: f64) -> G::Value {
        self.germ.eval(s, t)
    }

    fn hints(&self) -> Hints {
        self.hints
    }
}

/// `A - c·B` as a germ.
#[derive(Debug, Clone, Copy)]
pub struct Difference<'a, A, B> {
    pub a: &'a A,
    pub b: &'a B,
    pub c: f64,
}

impl<A, B> Germ for Difference<'_, A, B>
where
    A: Germ,
    B: Germ<Value = A::Value>,
{
    type Value = A::Value;

    fn eval(&self, s: f64, t: f64) -> A::Value {
        self.a.eval(s, t).sub(self.b.eval(s, t).scale(self.c))
    }
}

/// `(δA)_{s,u,t} = A_{s,t} - A_{s,u} - A_{u,t}`.
pub fn delta<G: Germ>(germ: &G, s: f64, u: f64, t: f64) -> G::Value {
    germ.eval(s, t).sub(germ.eval(s, u)).sub(germ.eval(u, t))
}

/// Largest `‖A_{t,t}‖` over the dyadic points of `[s, t]` at `level`.
pub fn diagonal_defect<G: Germ>(germ: &G, s: f64, t: f64, level: u32) -> f64 {
    let n = 1usize << level;
    let h = (t - s) / n as f64;
    (0..=n)
        .map(|i| {
            let x = s + i as f64 * h;
            germ.eval(x, x).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GermNorms {
    pub norm_alpha: f64,
    pub norm_beta: f64,
    /// `(level, ‖A‖_α, ‖δA‖_β)` restricted to intervals of that level.
    pub per_level: Vec<(u32, f64, f64)>,
}

/// Interior split points used for `δA` on each dyadic interval: the
/// midpoint and the two quarter points.
const SPLITS: [f64; 3] = [0.25, 0.5, 0.75];

/// `‖A‖_α` and `‖δA‖_β` over the dyadic intervals of `[s, t]` up to `depth`.
/// Growth of the per-level values under refinement signals a germ outside
/// `C^{α,β}`; it is reported, not raised.
pub fn germ_norms<G: Germ>(germ: &G, alpha: f64, beta: f64, s: f64, t: f64, depth: u32) -> GermNorms {
    let mut per_level = Vec::with_capacity(depth as usize + 1);
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for level in 0..=depth {
        let n = 1usize << level;
        let h = (t - s) / n as f64;
        let ha = libm::pow(h, alpha);
        let hb = libm::pow(h, beta);
        let mut la = 0.0f64;
        let mut lb = 0.0f64;
        for i in 0..n {
            let a = s + i as f64 * h;
            let b = if i + 1 == n { t } else { a + h };
            la = la.max(germ.eval(a, b).norm() / ha);
            for f in SPLITS {
                lb = lb.max(delta(germ, a, a + f * h, b).norm() / hb);
            }
        }
        na = na.max(la);
        nb = nb.max(lb);
        per_level.push((level, la, lb));
    }
    GermNorms {
        norm_alpha: na,
        norm_beta: nb,
        per_level,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extrapolation {
    None,
    /// Richardson step with the gap ratio observed over the last levels.
    Geometric,
    /// Richardson step with a known gap ratio in `(0, 1)`, e.g. `2^{η-1}`
    /// for a Volterra kernel `(t - r)^{-η}`, followed by a step removing the
    /// `O(h)` term.
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SewOptions {
    pub max_level: u32,
    pub tol: f64,
    /// Levels below this are always computed before testing convergence.
    pub min_level: u32,
    /// Resolution of the returned cumulative values (capped at the level reached).
    pub output_level: u32,
    pub extrapolation: Extrapolation,
}

impl Default for SewOptions {
    fn default() -> Self {
        Self {
            max_level: 16,
            tol: 1e-10,
            min_level: 3,
            output_level: 8,
            extrapolation: Extrapolation::Geometric,
        }
    }
}

/// Defect of the sewing against the germ on intervals of one dyadic scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleDefect {
    pub length: f64,
    pub max_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectCertificate {
    pub beta: f64,
    pub norm_beta: f64,
    /// `max defect / (‖δA‖_β |t-s|^β)` over all tested scales.
    pub fitted_constant: f64,
    /// `1/(1 - 2^{1-β})`, the dyadic sewing constant.
    pub dyadic_constant: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SewingResult<V> {
    pub s: f64,
    pub t: f64,
    /// `(I A)_{s, t_j}` at the `2^output_level + 1` dyadic points; `values[0] = 0`.
    pub values: Vec<V>,
    pub output_level: u32,
    /// Level at which the engine stopped.
    pub level: u32,
    /// `S_L` for `L = 0..=level`.
    pub raw_sums: Vec<V>,
    /// Cauchy gaps of the reported sequence, one per level from 1.
    pub gaps: Vec<f64>,
    pub gap_ratio: Option<f64>,
    pub converged: bool,
    pub achieved_gap: f64,
    pub defects: Vec<ScaleDefect>,
    pub certificate: Option<DefectCertificate>,
}

impl<V: SewValue> SewingResult<V> {
    /// `(I A)_{s,t}`.
    pub fn total(&self) -> V {
        *self.values.last().expect("values are never empty")
    }

    pub fn raw_total(&self) -> V {
        *self.raw_sums.last().expect("raw sums are never empty")
    }

    /// `(I A)_{t_a, t_b}` on the output grid.
    pub fn increment(&self, a: usize, b: usize) -> V {
        self.values[b].sub(self.values[a])
    }

    pub fn output_time(&self, j: usize) -> f64 {
        self.s + (self.t - self.s) * j as f64 / (1usize << self.output_level) as f64
    }
}

fn observed_ratio(norms: &[f64]) -> Option<f64> {
    // Median of the last (up to) three successive gap ratios.
    let n = norms.len();
    if n < 2 {
        return None;
    }
    let mut ratios: Vec<f64> = (n.saturating_sub(3).max(1)..n)
        .filter(|&i| norms[i - 1] > 0.0)
        .map(|i| norms[i] / norms[i - 1])
        .collect();
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let r = ratios[ratios.len() / 2];
    (r.is_finite() && r > 0.0 && r < 0.95).then_some(r)
}

/// Weighted cumulative sums over the `2^level` dyadic cells of `[s, t]`,
/// sampled at the `2^out + 1` output points.
fn cumulative<G, W>(germ: &G, s: f64, t: f64, level: u32, out: u32, weight: &W) -> Vec<G::Value>
where
    G: Germ,
    W: Fn(f64) -> f64,
{
    let n = 1usize << level;
    let h = (t - s) / n as f64;
    let stride = n >> out;
    let mut values = Vec::with_capacity((1 << out) + 1);
    values.push(G::Value::zero());
    let mut acc = G::Value::zero();
    for i in 0..n {
        let a = s + i as f64 * h;
        let b = if i + 1 == n { t } else { s + (i + 1) as f64 * h };
        acc = acc.add(germ.eval(a, b).scale(weight(a)));
        if (i + 1) % stride == 0 {
            values.push(acc);
        }
    }
    values
}

fn richardson<V: SewValue>(fine: V, coarse: V, r: f64) -> V {
    fine.add(fine.sub(coarse).scale(r / (1.0 - r)))
}

/// Known-ratio step on three consecutive sums, then a ratio-1/2 step for the
/// `O(h)` term left by a germ that is only piecewise smooth.
fn second_stage<V: SewValue>(sums: &[V], r: f64) -> V {
    let a = richardson(sums[1], sums[0], r);
    let b = richardson(sums[2], sums[1], r);
    richardson(b, a, 0.5)
}

fn run<G, W>(germ: &G, s: f64, t: f64, opts: &SewOptions, weight: W) -> SewingResult<G::Value>
where
    G: Germ,
    W: Fn(f64) -> f64,
{
    let mut raw: Vec<G::Value> = Vec::new();
    let mut raw_gap_norms: Vec<f64> = Vec::new();
    let mut reported: Vec<G::Value> = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut level = 0;
    let mut ratio = None;
    for l in 0..=opts.max_level {
        level = l;
        let sum = cumulative(germ, s, t, l, 0, &weight)[1];
        if let Some(prev) = raw.last() {
            raw_gap_norms.push(sum.sub(*prev).norm());
        }
        raw.push(sum);
        let est = match opts.extrapolation {
            Extrapolation::Ratio(r) if l >= 3 => {
                ratio = Some(r);
                let n = raw.len();
                second_stage(&raw[n - 3..], r)
            }
            Extrapolation::Geometric if l >= 2 => {
                ratio = observed_ratio(&raw_gap_norms);
                match ratio {
                    Some(r) => richardson(sum, raw[l as usize - 1], r),
                    None => sum,
                }
            }
            _ => sum,
        };
        if let Some(prev) = reported.last() {
            gaps.push(est.sub(*prev).norm());
        }
        reported.push(est);
        if l >= opts.min_level.max(1) && gaps.last().is_some_and(|&g| g < opts.tol) {
            converged = true;
            break;
        }
    }

    let values_and_level = match (opts.extrapolation, ratio) {
        (Extrapolation::Ratio(r), Some(_)) if level >= 3 => {
            let vl = level.max(opts.output_level + 2);
            let out = opts.output_level.min(vl - 2);
            let sums: Vec<Vec<G::Value>> = (vl - 2..=vl).map(|l| cumulative(germ, s, t, l, out, &weight)).collect();
            let values = (0..sums[0].len())
                .map(|i| second_stage(&[sums[0][i], sums[1][i], sums[2][i]], r))
                .collect();
            (values, out)
        }
        (Extrapolation::Geometric, Some(r)) if level >= 2 => {
            let vl = level.max(opts.output_level + 1);
            let out = opts.output_level.min(vl - 1);
            let fine = cumulative(germ, s, t, vl, out, &weight);
            let coarse = cumulative(germ, s, t, vl - 1, out, &weight);
            let values = fine.iter().zip(&coarse).map(|(f, c)| richardson(*f, *c, r)).collect();
            (values, out)
        }
        _ => {
            let out = opts.output_level.min(level);
            (cumulative(germ, s, t, level, out, &weight), out)
        }
    };
    let (values, out) = values_and_level;
    let achieved_gap = gaps.last().copied().unwrap_or(f64::INFINITY);
    SewingResult {
        s,
        t,
        values,
        output_level: out,
        level,
        raw_sums: raw,
        gaps,
        gap_ratio: ratio,
        converged,
        achieved_gap,
        defects: Vec::new(),
        certificate: None,
    }
}

fn defects<G: Germ>(germ: &G, res: &SewingResult<G::Value>) -> Vec<ScaleDefect> {
    let out = res.output_level;
    (0..=out)
        .map(|l| {
            let step = 1usize << (out - l);
            let cells = 1usize << l;
            let mut worst = 0.0f64;
            for i in 0..cells {
                let (a, b) = (i * step, (i + 1) * step);
                let d = res.increment(a, b).sub(germ.eval(res.output_time(a), res.output_time(b)));
                worst = worst.max(d.norm());
            }
            ScaleDefect {
                length: (res.t - res.s) / cells as f64,
                max_defect: worst,
            }
        })
        .collect()
}

/// Sews `germ` on `[s, t]`.
///
/// When the germ declares `beta > 1`, the result carries a certificate
/// comparing the observed defects with the dyadic sewing bound
/// `‖(IA)_{s,t} - A_{s,t}‖ ≤ ‖δA‖_β |t-s|^β / (1 - 2^{1-β})`.
pub fn sew<G: Germ>(germ: &G, s: f64, t: f64, opts: &SewOptions) -> SewingResult<G::Value> {
    let mut res = run(germ, s, t, opts, |_| 1.0);
    res.defects = defects(germ, &res);
    if let Some(beta) = germ.hints().beta.filter(|&b| b > 1.0) {
        let depth = (res.output_level + 4).min(res.level.max(res.output_level));
        let nb = germ_norms(germ, 1.0, beta, s, t, depth).norm_beta;
        let fitted = res
            .defects
            .iter()
            .map(|d| {
                let bound = nb * libm::pow(d.length, beta);
                if bound > 0.0 {
                    d.max_defect / bound
                } else if d.max_defect <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        let dyadic = 1.0 / (1.0 - libm::pow(2.0, 1.0 - beta));
        res.certificate = Some(DefectCertificate {
            beta,
            norm_beta: nb,
            fitted_constant: fitted,
            dyadic_constant: dyadic,
            holds: fitted <= dyadic * (1.0 + 1e-9),
        });
    }
    res
}

/// Volterra sewing `∫_s^t (t - r)^{-η} A_{dr}`, the dyadic limit of
/// `Σ (t - u)^{-η} A_{u,v}`. Every left endpoint `u` is strictly below `t`,
/// so all weights are finite.
pub fn volterra_sew<G: Germ>(germ: &G, eta: f64, s: f64, t: f64, opts: &SewOptions) -> SewingResult<G::Value> {
    let mut res = run(germ, s, t, opts, |u| libm::pow(t - u, -eta));
    res.defects.clear();
    res
}

/// Volterra sewing evaluated along `taus`, each from `s`, together with a
/// Hölder exponent estimate of `τ ↦ ∫_s^τ (τ-r)^{-η} A_{dr}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub all_converged: bool,
    /// Slope of `log max|V(τ+h) - V(τ)|` against `log h` over dyadic lags.
    pub holder_exponent: f64,
}

pub fn volterra_curve<G>(germ: &G, eta: f64, s: f64, t: f64, points_level: u32, opts: &SewOptions) -> VolterraCurve
where
    G: Germ<Value = f64>,
{
    let n = 1usize << points_level;
    let taus: Vec<f64> = (0..=n).map(|i| s + (t - s) * i as f64 / n as f64).collect();
    let mut all = true;
    let values: Vec<f64> = taus
        .iter()
        .map(|&tau| {
            if tau <= s {
                return 0.0;
            }
            let r = volterra_sew(germ, eta, s, tau, opts);
            all &= r.converged;
            r.total()
        })
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in 0..points_level {
        let lag = 1usize << l;
        let m = (0..=n - lag)
            .map(|i| libm::fabs(values[i + lag] - values[i]))
            .fold(0.0, f64::max);
        if m > 0.0 {
            xs.push(libm::log(lag as f64 * (t - s) / n as f64));
            ys.push(libm::log(m));
        }
    }
    let holder_exponent = if xs.len() >= 2 {
        crate::stats::slope(&xs, &ys)
    } else {
        f64::NAN
    };
    VolterraCurve {
        taus,
        values,
        all_converged: all,
        holder_exponent,
    }
}

/// `sup |X_b - X_a| / |t_b - t_a|^α` over dyadic pairs of a path sampled at
/// `2^level + 1` points of `[s, t]`.
pub fn dyadic_holder<V: SewValue>(values: &[V], s: f64, t: f64, alpha: f64) -> f64 {
    let n = values.len() - 1;
    let mut best = 0.0f64;
    let mut cells = 1usize;
    while cells <= n {
        let step = n / cells;
        let len = (t - s) / cells as f64;
        let denom = libm::pow(len, alpha);
        for i in 0..cells {
            best = best.max(values[(i + 1) * step].sub(values[i * step]).norm() / denom);
        }
        cells *= 2;
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `‖I(A - A^n)‖_α` along the family.
    pub distances: Vec<f64>,
    /// `‖A^n - A‖_α` along the family.
    pub germ_distances: Vec<f64>,
    /// `‖δA^n‖_β` along the family.
    pub delta_norms: Vec<f64>,
    /// Each distance is at most 1.1 times its predecessor.
    pub monotone: bool,
    pub passed: bool,
}

/// Checks that sewing commutes with the limit `A^n → A`.
pub fn sewing_stability_check<G, L>(
    family: &[G],
    limit: &L,
    alpha: f64,
    beta: f64,
    s: f64,
    t: f64,
    level: u32,
) -> StabilityReport
where
    G: Germ,
    L: Germ<Value = G::Value>,
{
    let opts = SewOptions {
        max_level: level,
        tol: 0.0,
        min_level: level,
        output_level: level.min(10),
        extrapolation: Extrapolation::None,
    };
    let depth = level.min(8);
    let mut distances = Vec::with_capacity(family.len());
    let mut germ_distances = Vec::with_capacity(family.len());
    let mut delta_norms = Vec::with_capacity(family.len());
    for a_n in family {
        let diff = Difference { a: limit, b: a_n, c: 1.0 };
        let sewn = sew(&diff, s, t, &opts);
        distances.push(dyadic_holder(&sewn.values, s, t, alpha));
        let n = germ_norms(&diff, alpha, beta, s, t, depth);
        germ_distances.push(n.norm_alpha);
        delta_norms.push(germ_norms(a_n, alpha, beta, s, t, depth).norm_beta);
    }
    let monotone = distances.windows(2).all(|w| w[1] <= 1.1 * w[0] + 1e-15);
    let shrinking = match (distances.first(), distances.last()) {
        (Some(&f), Some(&l)) => l <= f,
        _ => true,
    };
    StabilityReport {
        distances,
        germ_distances,
        delta_norms,
        monotone,
        passed: monotone && shrinking,
    }
}

/// Cumulative sewing over a scalar germ at a fixed level without
/// extrapolation; convenient for germs defined on a time grid.
pub fn riemann_path<G: Germ>(germ: &G, s: f64, t: f64, level: u32) -> Vec<G::Value> {
    cumulative(germ, s, t, level, level, &|_| 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        let additive = |s: f64, t: f64| t * t - s * s;
        assert_eq!(delta(&additive, 0.1, 0.4, 0.9), 0.0);
        let young = |s: f64, t: f64| s * (t - s);
        assert!((delta(&young, 0.0, 0.5, 1.0) + 0.25).abs() < 1e-15);
        let sq = |s: f64, t: f64| (t - s) * (t - s);
        assert!((delta(&sq, 0.0, 0.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn norms_examples() {
        let additive = |s: f64, t: f64| libm::exp(t) - libm::exp(s);
        let n = germ_norms(&additive, 0.5, 2.0, 0.0, 1.0, 6);
        assert!(n.norm_beta < 1e-13);
        let lin = |s: f64, t: f64| t - s;
        let n = germ_norms(&lin, 0.5, 2.0, 0.0, 2.0, 6);
        assert!((n.norm_alpha - libm::pow(2.0, 0.5)).abs() < 1e-12);
        let sq = |s: f64, t: f64| (t - s) * (t - s);
        let n = germ_norms(&sq, 1.0, 2.0, 0.0, 1.0, 6);
        assert!((n.norm_beta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn additive_germ_sews_to_itself() {
        let f = |x: f64| x * x;
        let g = |s: f64, t: f64| f(t) - f(s);
        let r = sew(&g, 0.0, 1.0, &SewOptions::default());
        assert!(r.converged);
        for (j, v) in r.values.iter().enumerate() {
            assert!((v - f(r.output_time(j))).abs() < 1e-12);
        }
        for l in 0..r.raw_sums.len() {
            assert!((r.raw_sums[l] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_valued_germs() {
        let g = |s: f64, t: f64| [t - s, s * (t - s)];
        let r = sew(&g, 0.0, 1.0, &SewOptions::default());
        assert!(r.converged, "{:?}", r.gaps);
        let v = r.total();
        assert!((v[0] - 1.0).abs() < 1e-10 && (v[1] - 0.5).abs() < 1e-8, "{v:?}");
    }

    #[test]
    fn additivity_of_output() {
        let g = |s: f64, t: f64| libm::sin(s) * (t - s);
        let r = sew(&g, 0.0, 2.0, &SewOptions::default());
        let n = r.values.len() - 1;
        let whole = r.increment(0, n);
        let split = r.increment(0, n / 3).add(r.increment(n / 3, n));
        assert_eq!(whole, split);
        assert_eq!(r.values[0], 0.0);
    }

    #[test]
    fn non_convergence_is_reported() {
        // A germ that is not a small perturbation of an additive one.
        let g = |s: f64, t: f64| libm::sqrt(t - s);
        let r = sew(&g, 0.0, 1.0, &SewOptions {
            max_level: 8,
            tol: 1e-6,
            ..SewOptions::default()
        });
        assert!(!r.converged);
        assert_eq!(r.gaps.len(), 8);
        assert!(r.achieved_gap > 1e-6);
    }

    #[test]
    fn smooth_germ_limit() {
        let g = |s: f64, t: f64| s * (t - s);
        let r = sew(&g, 0.0, 1.0, &SewOptions::default());
        assert!(r.converged && r.level <= 16);
        assert!((r.total() - 0.5).abs() < 1e-8, "{}", r.total());
        assert!((r.gap_ratio.unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn volterra_examples() {
        let lin = |s: f64, t: f64| t - s;
        let opts = SewOptions {
            max_level: 18,
            tol: 1e-6,
            ..SewOptions::default()
        };
        let r = volterra_sew(&lin, 0.5, 0.0, 1.0, &opts);
        assert!((r.total() - 2.0).abs() < 1e-4, "{} {:?}", r.total(), r.gaps);
        let r = volterra_sew(&lin, 0.25, 0.0, 1.0, &opts);
        assert!((r.total() - 4.0 / 3.0).abs() < 1e-4, "{}", r.total());
        let sq = |s: f64, t: f64| 0.5 * (t * t - s * s);
        let oracle = crate::quad::integrate(|r| (1.0 - r) * libm::pow(r, -0.5), 0.0, 1.0, 1e-12).value;
        let r = volterra_sew(&sq, 0.5, 0.0, 1.0, &opts);
        assert!((r.total() - oracle).abs() < 1e-4, "{} vs {}", r.total(), oracle);
    }

    #[test]
    fn known_ratio_handles_piecewise_linear_germs() {
        let nodes = [0.0, 0.3, 0.35, 0.9, 1.6];
        let a = |t: f64| {
            let r = (t * 4.0).clamp(0.0, 4.0);
            let j = (r as usize).min(3);
            nodes[j] + (r - j as f64) * (nodes[j + 1] - nodes[j])
        };
        let germ = |s: f64, t: f64| a(t) - a(s);
        let eta = 0.7;
        let exact: f64 = (0..4)
            .map(|j| {
                let (u, v) = (j as f64 / 4.0, (j + 1) as f64 / 4.0);
                4.0 * (nodes[j + 1] - nodes[j]) * (libm::pow(1.0 - u, 0.3) - libm::pow(1.0 - v, 0.3)) / 0.3
            })
            .sum();
        let opts = SewOptions {
            max_level: 16,
            tol: 1e-6,
            extrapolation: Extrapolation::Ratio(libm::pow(2.0, eta - 1.0)),
            ..SewOptions::default()
        };
        let r = volterra_sew(&germ, eta, 0.0, 1.0, &opts);
        assert!(r.converged, "{:?}", r.gaps);
        assert!((r.total() - exact).abs() < 1e-6, "{} {exact}", r.total());
    }

    #[test]
    fn stability_of_scaled_family() {
        let f = |s: f64, t: f64| libm::sin(t) - libm::sin(s);
        let family: Vec<_> = (1..6)
            .map(|n| {
                let c = 1.0 + 1.0 / n as f64;
                move |s: f64, t: f64| c * (libm::sin(t) - libm::sin(s))
            })
            .collect();
        let rep = sewing_stability_check(&family, &f, 0.5, 2.0, 0.0, 1.0, 8);
        assert!(rep.passed, "{:?}", rep.distances);
        for (n, d) in rep.distances.iter().enumerate() {
            let expect = libm::sin(1.0) / (n + 1) as f64;
            assert!(d >= &(expect * (1.0 - 1e-12)));
        }
        let same = [f, f];
        let rep = sewing_stability_check(&same, &f, 0.5, 2.0, 0.0, 1.0, 6);
        assert!(rep.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn defect_certificate() {
        let g = Hinted {
            germ: |s: f64, t: f64| libm::cos(s) * (t - s),
            hints: Hints {
                alpha: Some(1.0),
                beta: Some(2.0),
            },
        };
        let r = sew(&g, 0.0, 1.0, &SewOptions::default());
        let c = r.certificate.unwrap();
        assert!(c.holds, "{c:?}");
    }
}
