//! Diffusion coefficients `σ_k = a_k·s` with `s² = Σ²`, and their cut-off
//! mollifications.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::check;
use crate::profile::{Profile, TruncatedPower};
use crate::quad;
use crate::spectral::{SpectralField, TorusGrid};
use crate::{Error, Result};

/// Anything that acts as `σ_k(y) = a_k·s(y)`.
pub trait Coefficient: Sync {
    /// Mode weights `a_k`, `Σ a_k² = 1` (empty for the zero coefficient).
    fn weights(&self) -> &[f64];

    /// The common profile `s(y)`.
    fn profile(&self, y: f64) -> f64;

    fn sigma_k(&self, k: usize, y: f64) -> f64 {
        self.weights().get(k).map_or(0.0, |a| a * self.profile(y))
    }

    /// `Σ²(y) = Σ_k σ_k(y)²`.
    fn sigma2(&self, y: f64) -> f64 {
        let s = self.profile(y);
        let w: f64 = self.weights().iter().map(|a| a * a).sum();
        w * s * s
    }

    fn k_noise(&self) -> usize {
        self.weights().len()
    }
}

/// Piecewise-linear table on a uniform grid, zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl Table {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        check(h > 0.0, "h", h, "table spacing must be positive")?;
        check(values.len() >= 2, "values", values.len() as f64, "need at least two nodes")?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                argument: x0 + i as f64 * h,
            });
        }
        Ok(Self { x0, h, values })
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.values.len() - 1) as f64 * self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let r = (x - self.x0) / self.h;
        let n = self.values.len();
        if !(r >= 0.0 && r <= (n - 1) as f64) {
            return 0.0;
        }
        let i = (r as usize).min(n - 2);
        let f = r - i as f64;
        self.values[i] + f * (self.values[i + 1] - self.values[i])
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)))
    }

    /// Largest slope between nodes.
    pub fn lipschitz(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| libm::fabs(w[1] - w[0]) / self.h)
            .fold(0.0, f64::max)
    }

    /// `(∫ |g(x)|^p dx)^{1/p}` for `g` the interpolant, by the trapezoid rule
    /// on a 4x refinement of the nodes.
    pub fn lp_norm_of<F: Fn(f64) -> f64>(&self, g: F, p: f64) -> f64 {
        let sub = 4;
        let n = (self.values.len() - 1) * sub;
        let h = self.h / sub as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = self.x0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * libm::pow(libm::fabs(g(x)), p);
        }
        libm::pow(acc * h, 1.0 / p)
    }
}

/// Exact antiderivative of the square of a [`Table`] interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareAntiderivative {
    table: Table,
    cumulative: Vec<f64>,
}

impl SquareAntiderivative {
    pub fn new(table: &Table) -> Self {
        let mut cumulative = Vec::with_capacity(table.values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in table.values.windows(2) {
            acc += table.h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0;
            cumulative.push(acc);
        }
        Self {
            table: table.clone(),
            cumulative,
        }
    }

    /// `G(y) = ∫_{-∞}^y g(x)² dx`.
    pub fn eval(&self, y: f64) -> f64 {
        let t = &self.table;
        let r = (y - t.x0) / t.h;
        if !(r > 0.0) {
            return 0.0;
        }
        let n = t.values.len();
        let i = r as usize;
        if i + 1 >= n {
            return self.cumulative[n - 1];
        }
        let f = r - i as f64;
        let a = t.values[i];
        let d = t.values[i + 1] - a;
        // ∫_0^f (a + dτ)² dτ · h
        self.cumulative[i] + t.h * (a * a * f + a * d * f * f + d * d * f * f * f / 3.0)
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }
}

/// Specification of `Σ²`.
#[derive(Clone)]
pub enum Sigma2 {
    /// `Σ² ≡ c²`; holds `c`.
    Constant(f64),
    /// `min(|x|^{-γ}, M)·envelope(x)`.
    Singular(TruncatedPower),
    /// `A·e^{-x²/ℓ²}`: smooth and bounded.
    Gaussian { amplitude: f64, length: f64 },
    /// User-supplied tabulated `Σ²` (linear interpolation, zero outside).
    Table(Table),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl core::fmt::Debug for Sigma2 {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Sigma2::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Sigma2::Singular(p) => f.debug_tuple("Singular").field(p).finish(),
            Sigma2::Gaussian { amplitude, length } => f
                .debug_struct("Gaussian")
                .field("amplitude", amplitude)
                .field("length", length)
                .finish(),
            Sigma2::Table(t) => f.debug_struct("Table").field("nodes", &t.values.len()).finish(),
            Sigma2::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Sigma2 {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Sigma2::Constant(c) => c * c,
            Sigma2::Singular(p) => p.eval(x),
            Sigma2::Gaussian { amplitude, length } => amplitude * libm::exp(-(x * x) / (length * length)),
            Sigma2::Table(t) => t.eval(x),
            Sigma2::Custom(f) => f(x),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Sigma2::Singular(p) => p.breakpoints(),
            _ => Vec::new(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Sigma2::Custom(_))
    }
}

/// `a_k ∝ (1 + k²)^{-1}`, `k = 0..K_noise-1`, normalised so `Σ a_k² = 1`.
pub fn canonical_weights(k_noise: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k_noise).map(|k| 1.0 / (1.0 + (k * k) as f64)).collect();
    let n = libm::sqrt(raw.iter().map(|a| a * a).sum::<f64>());
    raw.into_iter().map(|a| a / n).collect()
}

#[derive(Debug, Clone)]
pub struct DiffusionCoefficient {
    pub sigma2: Sigma2,
    weights: Vec<f64>,
    /// Declared integrability exponent of `Σ²`.
    pub p: f64,
}

impl DiffusionCoefficient {
    pub fn new(sigma2: Sigma2, k_noise: usize, p: f64) -> Result<Self> {
        check(k_noise >= 1, "K_noise", k_noise as f64, "K_noise >= 1")?;
        Self::with_weights(sigma2, canonical_weights(k_noise), p)
    }

    pub fn with_weights(sigma2: Sigma2, weights: Vec<f64>, p: f64) -> Result<Self> {
        check(p >= 1.0, "p", p, "p >= 1")?;
        check(!weights.is_empty(), "K_noise", 0.0, "K_noise >= 1")?;
        let total: f64 = weights.iter().map(|a| a * a).sum();
        check(libm::fabs(total - 1.0) < 1e-12, "weights", total, "Σ a_k² must equal 1")?;
        Ok(Self { sigma2, weights, p })
    }

    /// `σ ≡ 0`.
    pub fn zero(k_noise: usize) -> Self {
        Self {
            sigma2: Sigma2::Constant(0.0),
            weights: canonical_weights(k_noise.max(1)),
            p: 1.0,
        }
    }

    /// `‖Σ²‖_{L^p(ℝ)}` by quadrature; infinite for non-zero constants.
    pub fn lp_norm(&self) -> f64 {
        match &self.sigma2 {
            Sigma2::Constant(c) if *c == 0.0 => 0.0,
            Sigma2::Constant(_) => f64::INFINITY,
            Sigma2::Table(t) => t.lp_norm_of(|x| t.eval(x), self.p),
            s => {
                let bp = s.breakpoints();
                let q = quad::integrate_real_line(|x| libm::pow(libm::fabs(s.eval(x)), self.p), &bp, 1e-12);
                libm::pow(q.value, 1.0 / self.p)
            }
        }
    }
}

impl Coefficient for DiffusionCoefficient {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn profile(&self, y: f64) -> f64 {
        libm::sqrt(self.sigma2.eval(y).max(0.0))
    }

    fn sigma2(&self, y: f64) -> f64 {
        self.sigma2.eval(y)
    }
}

/// `exp(-1/(1-z²))` on `(-1, 1)`.
fn bump(z: f64) -> f64 {
    let q = 1.0 - z * z;
    if q <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / q)
    }
}

fn bump_mass() -> f64 {
    quad::integrate(bump, -1.0, 1.0, 1e-15).value
}

/// Smooth step: 0 for `τ ≤ 0`, 1 for `τ ≥ 1`.
fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    let a = libm::exp(-1.0 / tau);
    let b = libm::exp(-1.0 / (1.0 - tau));
    a / (a + b)
}

/// `φ_ε`: 1 on `[-1/ε, 1/ε]`, 0 outside `[-1/ε-1, 1/ε+1]`.
pub fn cutoff(epsilon: f64, x: f64) -> f64 {
    smooth_step(1.0 / epsilon + 1.0 - libm::fabs(x))
}

/// `σ_{k,ε} = a_k·s_ε` with `s_ε = (s ∗ ρ^ε)·φ_ε`, tabulated.
#[derive(Debug, Clone)]
pub struct MollifiedDiffusion {
    pub epsilon: f64,
    pub p: f64,
    weights: Vec<f64>,
    table: Table,
    /// `sup |s_ε|`, so `Σ_ε² ≤ c_ε²`.
    pub c_eps: f64,
    /// Lipschitz constant of `s_ε` (equal to that of `σ_ε` in Hilbert–Schmidt norm).
    pub lip_eps: f64,
}

/// Table spacing as a fraction of `ε`.
pub const TABLE_REFINEMENT: f64 = 8.0;

pub fn mollify(sigma: &DiffusionCoefficient, epsilon: f64) -> Result<MollifiedDiffusion> {
    check(epsilon > 0.0 && epsilon.is_finite(), "epsilon", epsilon, "epsilon > 0")?;
    let reach = 1.0 / epsilon + 1.0;
    let half_nodes = libm::ceil(reach * TABLE_REFINEMENT / epsilon) as usize;
    let h = reach / half_nodes as f64;
    let mass = bump_mass();
    let bp = sigma.sigma2.breakpoints();
    let mut values = Vec::with_capacity(2 * half_nodes + 1);
    for i in 0..=2 * half_nodes {
        let x = -reach + i as f64 * h;
        let phi = cutoff(epsilon, x);
        if phi == 0.0 {
            values.push(0.0);
            continue;
        }
        // (s ∗ ρ^ε)(x) = ∫ s(x - εz) ρ(z) dz over z ∈ (-1, 1)
        let zbp: Vec<f64> = bp.iter().map(|b| (x - b) / epsilon).collect();
        let conv = quad::integrate_pieces(
            |z| sigma.profile(x - epsilon * z) * bump(z),
            -1.0,
            1.0,
            &zbp,
            1e-13,
        )
        .value
            / mass;
        if !conv.is_finite() {
            return Err(Error::NonFinite { argument: x });
        }
        values.push(conv * phi);
    }
    let table = Table::new(-reach, h, values)?;
    Ok(MollifiedDiffusion {
        epsilon,
        p: sigma.p,
        weights: sigma.weights.clone(),
        c_eps: table.sup(),
        lip_eps: table.lipschitz(),
        table,
    })
}

impl MollifiedDiffusion {
    pub fn table(&self) -> &Table {
        &self.table
    }

    /// `‖Σ_ε²‖_{L^p}` from the table.
    pub fn lp_norm(&self) -> f64 {
        let t = &self.table;
        t.lp_norm_of(|x| {
            let s = t.eval(x);
            s * s
        }, self.p)
    }

    /// Antiderivative of `Σ_ε²` (exact for the tabulated interpolant).
    pub fn sigma2_antiderivative(&self) -> SquareAntiderivative {
        SquareAntiderivative::new(&self.table)
    }
}

impl Coefficient for MollifiedDiffusion {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    fn profile(&self, y: f64) -> f64 {
        self.table.eval(y)
    }
}

/// `‖Σ²_{ε,ε'}‖_{L^p}` with `Σ²_{ε,ε'} = Σ_k (σ_{k,ε} - σ_{k,ε'})²`, on the
/// finer of the two tables.
pub fn mollification_distance(a: &MollifiedDiffusion, b: &MollifiedDiffusion) -> f64 {
    let (fine, other) = if a.table.h <= b.table.h { (a, b) } else { (b, a) };
    let reach = fine.table.x_max().max(other.table.x_max());
    let t = Table {
        x0: -reach,
        h: fine.table.h,
        values: alloc::vec![0.0; libm::ceil(2.0 * reach / fine.table.h) as usize + 1],
    };
    t.lp_norm_of(
        |x| {
            let d = fine.profile(x) - other.profile(x);
            d * d
        },
        fine.p,
    )
}

/// `‖σ(u)‖²_{HS} = ∫_T Σ²(u(x)) dx` at the `M = 4K` points.
pub fn hs_norm_sq<C: Coefficient + ?Sized>(sigma: &C, u: &SpectralField) -> Result<f64> {
    let grid = TorusGrid::oversampled(u.k_max());
    let values = grid.to_points(u);
    let mut s = Vec::with_capacity(values.len());
    for &y in &values {
        let v = sigma.sigma2(y);
        if !v.is_finite() {
            return Err(Error::NonFinite { argument: y });
        }
        s.push(v);
    }
    Ok(grid.integrate(&s))
}

/// `Σ_k ‖σ_k(u)‖²_{L²}`, the mode-sum form of the same norm.
pub fn hs_norm_sq_modes<C: Coefficient + ?Sized>(sigma: &C, u: &SpectralField) -> Result<f64> {
    let grid = TorusGrid::oversampled(u.k_max());
    let values = grid.to_points(u);
    let mut total = 0.0;
    for k in 0..sigma.k_noise() {
        let mut sq = Vec::with_capacity(values.len());
        for &y in &values {
            let v = sigma.sigma_k(k, y);
            if !v.is_finite() {
                return Err(Error::NonFinite { argument: y });
            }
            sq.push(v * v);
        }
        total += grid.integrate(&sq);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Envelope;
    use num_complex::Complex64;

    fn cosine(k_max: usize) -> SpectralField {
        let mut u = SpectralField::zeros(k_max);
        // cos x = (e^{ix} + e^{-ix})/2, and e^{ix} = √(2π) e_1
        u.set(1, Complex64::new(0.5 * crate::spectral::SQRT_2PI, 0.0));
        u
    }

    #[test]
    fn canonical_split() {
        let a = canonical_weights(32);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(a.windows(2).all(|w| w[1] < w[0]));
        let s = TruncatedPower::new(0.4, 1e3, Envelope::Gaussian).unwrap();
        let d = DiffusionCoefficient::new(Sigma2::Singular(s), 8, 2.0).unwrap();
        for x in [-1.3, 0.01, 0.7] {
            let sum: f64 = (0..8).map(|k| d.sigma_k(k, x).powi(2)).sum();
            assert!((sum - s.eval(x)).abs() < 1e-12 * s.eval(x));
        }
        assert!(DiffusionCoefficient::with_weights(Sigma2::Constant(1.0), alloc::vec![0.5, 0.5], 2.0).is_err());
    }

    #[test]
    fn hs_examples() {
        let c = DiffusionCoefficient::new(Sigma2::Constant(0.7), 4, 2.0).unwrap();
        let u = cosine(8);
        let v = hs_norm_sq(&c, &u).unwrap();
        assert!((v - 2.0 * core::f64::consts::PI * 0.49).abs() < 1e-12);
        let s = TruncatedPower::new(0.4, 1e3, Envelope::Gaussian).unwrap();
        let d = DiffusionCoefficient::new(Sigma2::Singular(s), 4, 2.0).unwrap();
        let v = hs_norm_sq(&d, &SpectralField::zeros(8)).unwrap();
        assert!((v - 2.0 * core::f64::consts::PI * 1e3).abs() < 1e-9);
        let q = DiffusionCoefficient::new(Sigma2::Custom(Arc::new(|x| x * x)), 4, 2.0).unwrap();
        let v = hs_norm_sq(&q, &u).unwrap();
        assert!((v - core::f64::consts::PI).abs() < 1e-12);
        let m = hs_norm_sq_modes(&q, &u).unwrap();
        assert!((m - v).abs() < 1e-12);
        let bad = DiffusionCoefficient::new(Sigma2::Custom(Arc::new(|x| 1.0 / x)), 4, 2.0).unwrap();
        assert!(matches!(hs_norm_sq(&bad, &u), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn table_interpolation() {
        let t = Table::new(0.0, 0.5, alloc::vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.eval(0.25), 0.5);
        assert_eq!(t.eval(1.0), 0.0);
        assert_eq!(t.eval(-0.1), 0.0);
        assert_eq!(t.eval(1.1), 0.0);
        assert_eq!(t.lipschitz(), 2.0);
        let g = SquareAntiderivative::new(&t);
        // ∫ of the squared hat = 2·0.5/3
        assert!((g.total() - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.eval(0.5) - 1.0 / 6.0).abs() < 1e-15);
        assert!((g.eval(0.25) - 0.5 * 0.125 / 3.0 * 4.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.5, 2.0), 1.0);
        assert_eq!(cutoff(0.5, -2.0), 1.0);
        assert_eq!(cutoff(0.5, 3.0), 0.0);
        let mid = cutoff(0.5, 2.5);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mollified_constant() {
        let c = DiffusionCoefficient::new(Sigma2::Constant(1.5), 4, 2.0).unwrap();
        let m = mollify(&c, 0.25).unwrap();
        let t = m.table();
        for i in 0..t.values.len() {
            let x = t.node(i);
            if libm::fabs(x) <= 4.0 - 0.25 {
                assert!((m.sigma2(x) - 2.25).abs() < 1e-10, "{x}");
            }
        }
        assert_eq!(m.profile(6.0), 0.0);
        assert!(t.h <= 0.25 / 8.0);
    }

    #[test]
    fn mollified_singular_bounds() {
        let s = TruncatedPower::new(0.5, 1e3, Envelope::None).unwrap();
        let d = DiffusionCoefficient::new(Sigma2::Singular(s), 4, 1.5).unwrap();
        let m = mollify(&d, 0.2).unwrap();
        assert!(m.c_eps * m.c_eps <= 1e3 * 1.05);
        let s = TruncatedPower::new(0.4, 1e3, Envelope::Gaussian).unwrap();
        let d = DiffusionCoefficient::new(Sigma2::Singular(s), 4, 2.0).unwrap();
        let base = d.lp_norm();
        let mut last = (0.0, 0.0);
        for eps in [0.2, 0.1, 0.05] {
            let m = mollify(&d, eps).unwrap();
            assert!(m.lp_norm() <= 1.05 * base, "{} {}", m.lp_norm(), base);
            assert!(m.c_eps >= last.0 && m.lip_eps >= last.1);
            last = (m.c_eps, m.lip_eps);
        }
    }

    #[test]
    fn smooth_mollification_converges() {
        let d = DiffusionCoefficient::new(Sigma2::Gaussian { amplitude: 1.0, length: 1.0 }, 4, 2.0).unwrap();
        let ms: Vec<_> = [0.4, 0.2, 0.1].iter().map(|&e| mollify(&d, e).unwrap()).collect();
        let d1 = mollification_distance(&ms[0], &ms[1]);
        let d2 = mollification_distance(&ms[1], &ms[2]);
        assert!(d2 < 0.5 * d1, "{d1} {d2}");
        assert_eq!(mollification_distance(&ms[1], &ms[1]), 0.0);
    }
}
