//! Summary statistics with standard errors.
//!
//! Reductions run in index order so results do not depend on how samples
//! were scheduled.

use alloc::vec::Vec;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: libm::sqrt(var / n as f64),
            n,
        }
    }

    /// |mean - target| measured in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = libm::fabs(self.mean - target);
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Unbiased sample variance with the standard error of that estimator,
/// `sqrt((m4 - s⁴(n-3)/(n-1)) / n)`.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let s2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    let m4 = xs.iter().map(|x| libm::pow(x - mean, 4.0)).sum::<f64>() / nf;
    let var_of_var = (m4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf;
    Estimate {
        mean: s2,
        std_error: libm::sqrt(var_of_var.max(0.0)),
        n,
    }
}

/// Second moment `E[x²]` about zero (for centred quantities) with standard error.
pub fn second_moment(xs: &[f64]) -> Estimate {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    Estimate::of(&sq)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Pearson chi-square statistic of `samples / scale` against N(0,1) over the
/// bins delimited by `edges` (two open tail bins are added).
/// Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square_normal(samples: &[f64], scale: f64, edges: &[f64]) -> (f64, usize) {
    let bins = edges.len() + 1;
    let mut counts = alloc::vec![0usize; bins];
    for &x in samples {
        let z = x / scale;
        let b = edges.partition_point(|&e| e <= z);
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    let mut stat = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let lo = if b == 0 { 0.0 } else { normal_cdf(edges[b - 1]) };
        let hi = if b == edges.len() { 1.0 } else { normal_cdf(edges[b]) };
        let expected = n * (hi - lo);
        let d = c as f64 - expected;
        stat += d * d / expected;
    }
    (stat, bins - 1)
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `(Σ|x|^p·w)^{1/p}` for a uniform weight `w`.
pub fn lp_norm(values: &[f64], weight: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    }
    let s: f64 = values.iter().map(|v| libm::pow(libm::fabs(*v), p)).sum();
    libm::pow(s * weight, 1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let e = Estimate::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - libm::sqrt(5.0 / 3.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn slope_of_line() {
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.5) + normal_cdf(-1.5) - 1.0).abs() < 1e-15);
    }
}
