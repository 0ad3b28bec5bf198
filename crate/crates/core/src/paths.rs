//! Fractional Brownian motion on a uniform time grid.
//!
//! Paths are generated exactly: fractional Gaussian noise is drawn by
//! circulant embedding (Davies-Harte) and summed. If the embedding ever has
//! eigenvalues below `-1e-10` the generator falls back to a dense Cholesky
//! factor of the increment covariance.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check, Error, Result};
use crate::fft::Fft;
use crate::rng;

/// Eigenvalues in `[-EIGEN_CLIP, 0)` are clipped to zero.
pub const EIGEN_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Circulant,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Fbm { hurst: f64, seed: u64, method: Method },
    Custom,
}

/// A scalar path sampled at `t_j = j·T/n` for `j = 0..=n`, starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    horizon: f64,
    values: Vec<f64>,
    origin: Origin,
}

impl SamplePath {
    /// Wraps externally produced grid values. The first value must be 0.
    pub fn from_values(horizon: f64, values: Vec<f64>) -> Result<Self> {
        check(horizon > 0.0 && horizon.is_finite(), "T", horizon, "must be positive")?;
        check(values.len() >= 2, "n_steps", values.len() as f64 - 1.0, "need at least one step")?;
        check(values[0] == 0.0, "values[0]", values[0], "paths start at the origin")?;
        Ok(Self {
            horizon,
            values,
            origin: Origin::Custom,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn hurst(&self) -> Option<f64> {
        match self.origin {
            Origin::Fbm { hurst, .. } => Some(hurst),
            Origin::Custom => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.origin {
            Origin::Fbm { seed, .. } => Some(seed),
            Origin::Custom => None,
        }
    }

    /// `(min, max)` over the grid values with indices `[from, to]`.
    pub fn range(&self, from: usize, to: usize) -> (f64, f64) {
        self.values[from..=to]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Keeps every `factor`-th grid value.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        check(
            factor >= 1 && self.n_steps().is_multiple_of(factor),
            "factor",
            factor as f64,
            "must divide the number of steps",
        )?;
        Ok(Self {
            horizon: self.horizon,
            values: self.values.iter().step_by(factor).copied().collect(),
            origin: self.origin,
        })
    }
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * (libm::pow(k + 1.0, h2) + libm::pow(libm::fabs(k - 1.0), h2) - 2.0 * libm::pow(k, h2))
}

/// Covariance `E[w_s w_t]` of fBm.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (libm::pow(s, h2) + libm::pow(t, h2) - libm::pow(libm::fabs(t - s), h2))
}

/// Reusable fBm sampler for fixed `(n_steps, T, H)`.
#[derive(Debug, Clone)]
pub struct FbmGenerator {
    n_steps: usize,
    horizon: f64,
    hurst: f64,
    inner: Sampler,
}

#[derive(Debug, Clone)]
enum Sampler {
    Circulant { fft: Fft, sqrt_eigen: Vec<f64> },
    Cholesky { factor: Vec<f64> },
}

impl FbmGenerator {
    pub fn new(n_steps: usize, horizon: f64, hurst: f64) -> Result<Self> {
        check(hurst > 0.0 && hurst < 1.0, "H", hurst, "must lie in (0, 1)")?;
        check(n_steps >= 2, "n_steps", n_steps as f64, "must be at least 2")?;
        check(horizon > 0.0 && horizon.is_finite(), "T", horizon, "must be positive")?;
        let inner = match circulant(n_steps, hurst) {
            Ok(s) => s,
            Err(Error::NegativeEigenvalue { .. }) => cholesky(n_steps, hurst)?,
            Err(e) => return Err(e),
        };
        Ok(Self {
            n_steps,
            horizon,
            hurst,
            inner,
        })
    }

    /// Forces the dense Cholesky sampler (O(n²) per path).
    pub fn new_cholesky(n_steps: usize, horizon: f64, hurst: f64) -> Result<Self> {
        check(hurst > 0.0 && hurst < 1.0, "H", hurst, "must lie in (0, 1)")?;
        check(n_steps >= 2, "n_steps", n_steps as f64, "must be at least 2")?;
        check(horizon > 0.0 && horizon.is_finite(), "T", horizon, "must be positive")?;
        Ok(Self {
            n_steps,
            horizon,
            hurst,
            inner: cholesky(n_steps, hurst)?,
        })
    }

    pub fn method(&self) -> Method {
        match self.inner {
            Sampler::Circulant { .. } => Method::Circulant,
            Sampler::Cholesky { .. } => Method::Cholesky,
        }
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        self.sample_stream(seed, rng::PATH_STREAM)
    }

    pub fn sample_stream(&self, seed: u64, stream: u64) -> SamplePath {
        let n = self.n_steps;
        let mut r = rng::stream(seed, stream);
        let scale = libm::pow(self.horizon / n as f64, self.hurst);
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        match &self.inner {
            Sampler::Circulant { fft, sqrt_eigen } => {
                let m = sqrt_eigen.len();
                let mut buf: Vec<Complex64> = sqrt_eigen
                    .iter()
                    .map(|&s| {
                        let re = rng::normal(&mut r);
                        let im = rng::normal(&mut r);
                        Complex64::new(re * s, im * s)
                    })
                    .collect();
                debug_assert_eq!(buf.len(), m);
                fft.forward(&mut buf);
                let mut acc = 0.0;
                for z in &buf[..n] {
                    acc += z.re * scale;
                    values.push(acc);
                }
            }
            Sampler::Cholesky { factor } => {
                let mut z = vec![0.0; n];
                rng::fill_normal(&mut r, &mut z);
                let mut acc = 0.0;
                for i in 0..n {
                    let row = &factor[i * n..i * n + i + 1];
                    let x: f64 = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                    acc += x * scale;
                    values.push(acc);
                }
            }
        }
        SamplePath {
            horizon: self.horizon,
            values,
            origin: Origin::Fbm {
                hurst: self.hurst,
                seed,
                method: self.method(),
            },
        }
    }
}

fn circulant(n: usize, hurst: f64) -> Result<Sampler> {
    let m = 2 * n;
    let mut row: Vec<Complex64> = (0..m)
        .map(|k| {
            let lag = if k <= n { k } else { m - k };
            Complex64::new(fgn_autocovariance(lag, hurst), 0.0)
        })
        .collect();
    let fft = Fft::new(m);
    fft.forward(&mut row);
    let mut sqrt_eigen = Vec::with_capacity(m);
    for (index, z) in row.iter().enumerate() {
        let value = z.re;
        if value < -EIGEN_CLIP {
            return Err(Error::NegativeEigenvalue { index, value });
        }
        sqrt_eigen.push(libm::sqrt(value.max(0.0) / m as f64));
    }
    Ok(Sampler::Circulant { fft, sqrt_eigen })
}

fn cholesky(n: usize, hurst: f64) -> Result<Sampler> {
    let acf: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst)).collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = acf[i - j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(Sampler::Cholesky { factor: l })
}

/// Exact fBm path with `n_steps` increments on `[0, T]`.
pub fn generate_fbm(n_steps: usize, horizon: f64, hurst: f64, seed: u64) -> Result<SamplePath> {
    Ok(FbmGenerator::new(n_steps, horizon, hurst)?.sample(seed))
}

/// `max |w_{t_i} - w_{t_j}| / |t_i - t_j|^α` over grid pairs with `|i - j| ≤ max_lag`.
pub fn holder_norm_estimate(path: &SamplePath, alpha: f64, max_lag: usize) -> Result<f64> {
    check(alpha > 0.0 && alpha <= 1.0, "alpha", alpha, "must lie in (0, 1]")?;
    check(
        max_lag >= 1 && max_lag <= path.n_steps(),
        "max_lag",
        max_lag as f64,
        "must lie in [1, n_steps]",
    )?;
    let w = path.values();
    let dt = path.dt();
    let mut best = 0.0f64;
    for lag in 1..=max_lag {
        let denom = libm::pow(lag as f64 * dt, alpha);
        let m = w.windows(lag + 1).fold(0.0f64, |m, win| m.max(libm::fabs(win[lag] - win[0])));
        best = best.max(m / denom);
    }
    Ok(best)
}
