//! Real fields on the torus `[0, 2π)` in a truncated Fourier basis.
//!
//! Basis: `e_k(x) = e^{ikx}/√(2π)`, orthonormal in `L²(T)`, so the Laplacian
//! acts as `-k²` and `‖u‖²_{L²} = Σ_k |û_k|²`. Only `k = 0..=K` is stored;
//! negative modes are the conjugates, which keeps every field real.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check, Error, Result};
use crate::fft::Fft;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(k_max: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); k_max + 1],
        }
    }

    /// Builds a field from `û_0..=û_K`. The imaginary part of `û_0` must vanish.
    pub fn from_coefficients(coeffs: Vec<Complex64>) -> Result<Self> {
        check(!coeffs.is_empty(), "K", -1.0, "need at least the zero mode")?;
        check(
            libm::fabs(coeffs[0].im) <= 1e-12 * (1.0 + libm::fabs(coeffs[0].re)),
            "Im û_0",
            coeffs[0].im,
            "must be zero for a real field",
        )?;
        let mut coeffs = coeffs;
        coeffs[0].im = 0.0;
        Ok(Self { coeffs })
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `û_k` for `-K ≤ k ≤ K`; zero outside the band.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        let a = k.unsigned_abs() as usize;
        match self.coeffs.get(a) {
            Some(&c) if k >= 0 => c,
            Some(&c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Sets `û_k` for `k ≥ 0` (and implicitly `û_{-k}`).
    pub fn set(&mut self, k: usize, value: Complex64) {
        self.coeffs[k] = if k == 0 { Complex64::new(value.re, 0.0) } else { value };
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Applies the heat semigroup `P_t`: `û_k ← e^{-k²t} û_k`.
    pub fn heat_apply(&self, t: f64) -> SpectralField {
        let mut out = self.clone();
        out.heat_apply_in_place(t);
        out
    }

    pub fn heat_apply_in_place(&mut self, t: f64) {
        debug_assert!(t >= 0.0);
        for (k, c) in self.coeffs.iter_mut().enumerate().skip(1) {
            *c *= libm::exp(-((k * k) as f64) * t);
        }
    }

    /// `(Σ_k (1+k²)^α |û_k|²)^{1/2}`.
    pub fn sobolev_norm(&self, alpha: f64) -> f64 {
        libm::sqrt(self.sobolev_norm_sq(alpha))
    }

    pub fn sobolev_norm_sq(&self, alpha: f64) -> f64 {
        let mut s = self.coeffs[0].norm_sqr();
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let w = if alpha == 0.0 {
                1.0
            } else {
                libm::pow(1.0 + (k * k) as f64, alpha)
            };
            s += 2.0 * w * c.norm_sqr();
        }
        s
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// `⟨u, c_j⟩` in the real orthonormal basis `c_0 = 1/√(2π)`,
    /// `c_j = cos(jx)/√π` for `j ≥ 1`.
    pub fn cosine_coordinate(&self, j: usize) -> f64 {
        if j == 0 {
            self.coeffs[0].re
        } else {
            core::f64::consts::SQRT_2 * self.coeffs.get(j).map_or(0.0, |c| c.re)
        }
    }

    /// Interleaved `(re, im)` little-endian doubles for `k = 0..=K`, then
    /// `k = -1..=-K`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let k_max = self.k_max();
        let mut out = Vec::with_capacity((2 * k_max + 1) * 16);
        let mut push = |c: Complex64| {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        };
        for c in &self.coeffs {
            push(*c);
        }
        for c in &self.coeffs[1..] {
            push(c.conj());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8], k_max: usize) -> Result<Self> {
        let expected = (2 * k_max + 1) * 16;
        if bytes.len() != expected {
            return Err(Error::Malformed(alloc::format!(
                "expected {expected} bytes for K={k_max}, found {}",
                bytes.len()
            )));
        }
        let read = |i: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[i * 8..i * 8 + 8]);
            f64::from_le_bytes(b)
        };
        let coeffs = (0..=k_max)
            .map(|k| Complex64::new(read(2 * k), read(2 * k + 1)))
            .collect();
        Self::from_coefficients(coeffs)
    }
}

/// Point values on `x_m = 2πm/M` and the matching coefficient transforms.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    points: usize,
    k_max: usize,
    fft: Fft,
}

impl TorusGrid {
    pub fn new(points: usize, k_max: usize) -> Result<Self> {
        if points < 2 * k_max + 1 {
            return Err(Error::Aliasing {
                points,
                modes: k_max,
            });
        }
        Ok(Self {
            points,
            k_max,
            fft: Fft::new(points),
        })
    }

    /// The default oversampled grid, `M = 4K` (at least 4 points).
    pub fn oversampled(k_max: usize) -> Self {
        Self::new((4 * k_max).max(4), k_max).expect("4K ≥ 2K+1")
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    pub fn x(&self, m: usize) -> f64 {
        m as f64 * self.dx()
    }

    pub fn to_points(&self, field: &SpectralField) -> Vec<f64> {
        let mut out = vec![0.0; self.points];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.points];
        self.to_points_with(field, &mut buf, &mut out);
        out
    }

    /// Allocation-free variant; `buf` and `out` must have length `M`.
    pub fn to_points_with(&self, field: &SpectralField, buf: &mut [Complex64], out: &mut [f64]) {
        let m = self.points;
        for b in buf.iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        let kk = field.k_max().min(self.k_max);
        buf[0] = field.coeffs[0];
        for k in 1..=kk {
            buf[k] = field.coeffs[k];
            buf[m - k] = field.coeffs[k].conj();
        }
        self.fft.inverse(buf);
        let s = 1.0 / SQRT_2PI;
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re * s;
        }
    }

    pub fn from_points(&self, values: &[f64]) -> SpectralField {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.points];
        let mut field = SpectralField::zeros(self.k_max);
        self.from_points_with(values, &mut buf, &mut field);
        field
    }

    /// Allocation-free variant writing the projection onto `|k| ≤ K` into `out`.
    pub fn from_points_with(&self, values: &[f64], buf: &mut [Complex64], out: &mut SpectralField) {
        for (b, &v) in buf.iter_mut().zip(values) {
            *b = Complex64::new(v, 0.0);
        }
        self.fft.forward(buf);
        let s = SQRT_2PI / self.points as f64;
        let kk = out.k_max().min(self.k_max);
        out.coeffs[0] = Complex64::new(buf[0].re * s, 0.0);
        for k in 1..=kk {
            out.coeffs[k] = buf[k] * s;
        }
        for c in out.coeffs.iter_mut().skip(kk + 1) {
            *c = Complex64::new(0.0, 0.0);
        }
    }

    /// `∫_T g dx` by the rectangle rule (exact for trigonometric polynomials
    /// of degree < M).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.dx()
    }
}

/// Result of comparing the Schauder ratio at cutoffs `K` and `2K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchauderReport {
    pub rho: f64,
    pub theta: f64,
    pub k_max: usize,
    pub sup_q: f64,
    pub sup_q_doubled: f64,
    pub ratio: f64,
    pub stable: bool,
    pub argmax: (f64, f64),
}

/// `max_{1≤k≤K} k^ρ |e^{-k²t} - e^{-k²s}| / ((t-s)^θ s^{-(ρ/2+θ)})`.
pub fn schauder_quotient(rho: f64, theta: f64, k_max: usize, s: f64, t: f64) -> f64 {
    let denom = libm::pow(t - s, theta) * libm::pow(s, -(rho / 2.0 + theta));
    let mut best = 0.0f64;
    for k in 1..=k_max {
        let k2 = (k * k) as f64;
        let es = libm::exp(-k2 * s);
        if es == 0.0 {
            break;
        }
        let diff = libm::fabs(libm::exp(-k2 * t) - es);
        let kr = if rho == 0.0 { 1.0 } else { libm::pow(k as f64, rho) };
        best = best.max(kr * diff);
    }
    best / denom
}

pub fn schauder_check(rho: f64, theta: f64, k_max: usize, st_grid: &[(f64, f64)]) -> Result<SchauderReport> {
    check((0.0..=1.0).contains(&theta), "theta", theta, "must lie in [0, 1]")?;
    check(rho / 2.0 + theta >= 0.0, "rho", rho, "need rho/2 + theta >= 0")?;
    check(k_max >= 1, "K", k_max as f64, "must be positive")?;
    let mut sup_q = 0.0f64;
    let mut sup_q_doubled = 0.0f64;
    let mut argmax = (f64::NAN, f64::NAN);
    for &(s, t) in st_grid {
        check(s > 0.0 && t > s, "s", s, "need 0 < s < t")?;
        let q = schauder_quotient(rho, theta, k_max, s, t);
        if q > sup_q {
            sup_q = q;
            argmax = (s, t);
        }
        sup_q_doubled = sup_q_doubled.max(schauder_quotient(rho, theta, 2 * k_max, s, t));
    }
    let ratio = sup_q_doubled / sup_q;
    Ok(SchauderReport {
        rho,
        theta,
        k_max,
        sup_q,
        sup_q_doubled,
        ratio,
        stable: (0.9..=1.1).contains(&ratio),
        argmax,
    })
}

/// Log-spaced `s` values in `[s_min, 1]` with offsets `δ` log-spaced in `[δ_min, 1]`.
pub fn default_st_grid(s_min: f64, n_s: usize, delta_min: f64, n_delta: usize) -> Vec<(f64, f64)> {
    let logspace = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                libm::exp(libm::log(lo) + f * (libm::log(hi) - libm::log(lo)))
            })
            .collect()
    };
    let ss = logspace(s_min, 1.0, n_s);
    let ds = logspace(delta_min, 1.0, n_delta);
    let mut out = Vec::with_capacity(n_s * n_delta);
    for &s in &ss {
        for &d in &ds {
            out.push((s, s + d));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn heat_identity_and_single_mode() {
        let mut u = SpectralField::zeros(4);
        u.set(2, c(1.0, 0.0));
        assert_eq!(u.heat_apply(0.0), u);
        let v = u.heat_apply(0.1);
        assert!((v.coefficient(2).re - libm::exp(-0.4)).abs() < 1e-15);
        assert!((v.coefficient(2).re - 0.670_32).abs() < 1e-5);
    }

    #[test]
    fn sobolev_examples() {
        assert_eq!(SpectralField::zeros(3).sobolev_norm(1.0), 0.0);
        let mut u = SpectralField::zeros(3);
        u.set(0, c(1.0, 0.0));
        for a in [-1.0, 0.0, 0.5, 2.0] {
            assert!((u.sobolev_norm(a) - 1.0).abs() < 1e-15);
        }
        let mut v = SpectralField::zeros(3);
        v.set(1, c(core::f64::consts::FRAC_1_SQRT_2, 0.0));
        assert!((v.sobolev_norm(1.0) - core::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn constant_and_cosine_transforms() {
        let g = TorusGrid::new(16, 5).unwrap();
        let f = g.from_points(&vec![3.0; 16]);
        assert!((f.coefficient(0).re - 3.0 * SQRT_2PI).abs() < 1e-13);
        for k in 1..=5 {
            assert!(f.coefficient(k).norm() < 1e-13);
        }
        let cosine: Vec<f64> = (0..16).map(|m| libm::cos(g.x(m))).collect();
        let f = g.from_points(&cosine);
        let nonzero: Vec<usize> = (0..=5).filter(|&k| f.coefficients()[k].norm() > 1e-12).collect();
        assert_eq!(nonzero, vec![1]);
        assert!(f.coefficient(-1).norm() > 0.0);
    }

    #[test]
    fn aliasing_is_rejected() {
        assert!(matches!(TorusGrid::new(8, 4), Err(Error::Aliasing { .. })));
        assert!(TorusGrid::new(9, 4).is_ok());
    }

    #[test]
    fn schauder_examples() {
        let q = schauder_quotient(0.0, 0.0, 64, 0.3, 0.7);
        assert!(q <= 1.0);
        let k1 = libm::fabs(libm::exp(-1.0) - libm::exp(-0.5));
        assert!((k1 - 0.238_65).abs() < 1e-5);
    }

    #[test]
    fn raw_bytes_round_trip_and_order() {
        let u = SpectralField::from_coefficients(vec![c(1.0, 0.0), c(2.0, 3.0)]).unwrap();
        let b = u.to_le_bytes();
        assert_eq!(b.len(), 3 * 16);
        let im_neg = f64::from_le_bytes(b[40..48].try_into().unwrap());
        assert_eq!(im_neg, -3.0);
        assert_eq!(SpectralField::from_le_bytes(&b, 1).unwrap(), u);
        assert!(SpectralField::from_le_bytes(&b[..40], 1).is_err());
    }
}
