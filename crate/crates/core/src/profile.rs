//! Scalar test functions on the real line.
//!
//! A profile is a function together with the points where it is singular
//! or not smooth. Quadrature routines split at those points.

use alloc::vec;
use alloc::vec::Vec;

pub trait Profile: Sync {
    fn eval(&self, x: f64) -> f64;

    /// Points where the profile has a kink or a singularity.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64 + Sync> Profile for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Decay weight multiplying a truncated power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    None,
    /// `e^{-x²}`
    Gaussian,
    /// `e^{-r|x|}`
    Exponential(f64),
}

impl Envelope {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Envelope::None => 1.0,
            Envelope::Gaussian => libm::exp(-x * x),
            Envelope::Exponential(r) => libm::exp(-r * libm::fabs(x)),
        }
    }
}

/// `min(|x|^{-γ}, cap)·envelope(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPower {
    pub gamma: f64,
    pub cap: f64,
    pub envelope: Envelope,
}

impl TruncatedPower {
    pub fn new(gamma: f64, cap: f64, envelope: Envelope) -> crate::Result<Self> {
        crate::error::check((0.0..1.0).contains(&gamma), "gamma", gamma, "0 <= gamma < 1")?;
        crate::error::check(cap > 0.0 && cap.is_finite(), "cap", cap, "0 < cap < inf")?;
        Ok(Self { gamma, cap, envelope })
    }

    /// `|x|` below which the cap is active.
    pub fn cap_radius(&self) -> f64 {
        if self.gamma == 0.0 {
            0.0
        } else {
            libm::pow(self.cap, -1.0 / self.gamma)
        }
    }
}

impl Profile for TruncatedPower {
    fn eval(&self, x: f64) -> f64 {
        let a = libm::fabs(x);
        let core = if a == 0.0 {
            self.cap
        } else {
            libm::pow(a, -self.gamma).min(self.cap)
        };
        core * self.envelope.eval(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let r = self.cap_radius();
        if r > 0.0 {
            vec![-r, 0.0, r]
        } else {
            vec![0.0]
        }
    }
}

/// `∫ |f|^p` over the real line, splitting at the profile's breakpoints.
pub fn lp_norm<P: Profile + ?Sized>(f: &P, p: f64, tol: f64) -> f64 {
    let bp = f.breakpoints();
    let q = crate::quad::integrate_real_line(|x| libm::pow(libm::fabs(f.eval(x)), p), &bp, tol);
    libm::pow(q.value, 1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_power_values() {
        let f = TruncatedPower::new(0.5, 1e3, Envelope::None).unwrap();
        assert_eq!(f.eval(0.0), 1e3);
        assert!((f.eval(0.25) - 2.0).abs() < 1e-15);
        assert!((f.cap_radius() - 1e-6).abs() < 1e-18);
        assert!(TruncatedPower::new(1.0, 1.0, Envelope::None).is_err());
    }

    #[test]
    fn gaussian_l2_norm() {
        // ∫ e^{-2x²} = sqrt(π/2)
        let f = |x: f64| libm::exp(-x * x);
        let n = lp_norm(&f, 2.0, 1e-12);
        assert!((n * n - libm::sqrt(core::f64::consts::FRAC_PI_2)).abs() < 1e-10);
    }

    #[test]
    fn singular_lp_norm() {
        // ∫ |x|^{-0.8} e^{-2x²} = Γ(0.1)·2^{-0.1}, cap far below the scale that matters
        let f = TruncatedPower::new(0.4, 1e12, Envelope::Gaussian).unwrap();
        let n = lp_norm(&f, 2.0, 1e-12);
        let expect = libm::tgamma(0.1) * libm::pow(2.0, -0.1);
        assert!((n * n - expect).abs() / expect < 1e-6, "{} {}", n * n, expect);
    }
}
