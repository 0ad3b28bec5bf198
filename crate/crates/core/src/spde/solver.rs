//! Exponential Euler scheme for `du = Δu dt + σ(u - w) dW` on the torus.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::coefficient::Coefficient;
use crate::error::check;
use crate::paths::SamplePath;
use crate::rng;
use crate::spectral::{SpectralField, TorusGrid};
use crate::{Error, Result};

/// `Δβ^k_n ~ N(0, Δt)`, independent over `(n, k)`, stored row-major by step.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalIncrements {
    pub n_t: usize,
    pub k_noise: usize,
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
    values: Vec<f64>,
}

impl CylindricalIncrements {
    pub fn generate(n_t: usize, k_noise: usize, dt: f64, seed: u64, stream: u64) -> Result<Self> {
        check(n_t >= 1, "n_t", n_t as f64, "n_t >= 1")?;
        check(k_noise >= 1, "K_noise", k_noise as f64, "K_noise >= 1")?;
        check(dt > 0.0, "dt", dt, "dt > 0")?;
        let mut r = rng::stream(seed, stream);
        let mut values = vec![0.0; n_t * k_noise];
        rng::fill_normal(&mut r, &mut values);
        let sd = libm::sqrt(dt);
        values.iter_mut().for_each(|v| *v *= sd);
        Ok(Self {
            n_t,
            k_noise,
            dt,
            seed,
            stream,
            values,
        })
    }

    /// Increments of sample `i` of an ensemble keyed by `seed`.
    pub fn for_sample(n_t: usize, k_noise: usize, dt: f64, seed: u64, sample: usize) -> Result<Self> {
        Self::generate(n_t, k_noise, dt, seed, rng::NOISE_STREAM + sample as u64)
    }

    /// `(Δβ^0_n, …, Δβ^{K-1}_n)`.
    pub fn step(&self, n: usize) -> &[f64] {
        &self.values[n * self.k_noise..(n + 1) * self.k_noise]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// What the scheme exposes at step `n`, before advancing to `n + 1`.
#[derive(Debug)]
pub struct StepView<'a> {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    /// `w_{t_n}`.
    pub shift: f64,
    /// `û^n`.
    pub state: &'a SpectralField,
    /// `u^n(x_m)`.
    pub points: &'a [f64],
    /// `s(u^n(x_m) - w_{t_n})`.
    pub profile: &'a [f64],
    /// `Δβ^k_n`.
    pub increments: &'a [f64],
    /// `Σ_k a_k Δβ^k_n`, so `g^n = s(u^n - w_n)·ξ_n`.
    pub xi: f64,
    /// `ĝ^n`.
    pub noise: &'a SpectralField,
}

/// `û ← e^{-k²Δt}(û + ĝ)` given the decay factors.
pub fn exponential_euler_step(state: &mut SpectralField, noise: &SpectralField, decay: &[f64]) {
    let mut next = state.clone();
    next.axpy(1.0, noise);
    let coeffs: Vec<Complex64> = next
        .coefficients()
        .iter()
        .zip(decay)
        .map(|(c, d)| c * d)
        .collect();
    for (k, c) in coeffs.into_iter().enumerate() {
        state.set(k, c);
    }
}

/// Reusable scheme workspace for one `(K, Δt)`.
#[derive(Debug, Clone)]
pub struct Solver {
    grid: TorusGrid,
    dt: f64,
    decay: Vec<f64>,
    buf: Vec<Complex64>,
    points: Vec<f64>,
    profile: Vec<f64>,
    g: Vec<f64>,
    noise: SpectralField,
    next: SpectralField,
}

impl Solver {
    pub fn new(k_max: usize, dt: f64) -> Result<Self> {
        check(k_max >= 1, "K", k_max as f64, "K >= 1")?;
        check(dt > 0.0, "dt", dt, "dt > 0")?;
        let grid = TorusGrid::oversampled(k_max);
        let m = grid.points();
        Ok(Self {
            decay: (0..=k_max).map(|k| libm::exp(-((k * k) as f64) * dt)).collect(),
            buf: vec![Complex64::new(0.0, 0.0); m],
            points: vec![0.0; m],
            profile: vec![0.0; m],
            g: vec![0.0; m],
            noise: SpectralField::zeros(k_max),
            next: SpectralField::zeros(k_max),
            grid,
            dt,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn k_max(&self) -> usize {
        self.grid.k_max()
    }

    /// Runs the scheme over all steps of `w`, calling `observe` at every
    /// step `n < n_t`, and returns `û^{n_t}`.
    pub fn run<C, F>(
        &mut self,
        sigma: &C,
        w: &SamplePath,
        u0: &SpectralField,
        increments: &CylindricalIncrements,
        mut observe: F,
    ) -> Result<SpectralField>
    where
        C: Coefficient + ?Sized,
        F: FnMut(&StepView<'_>),
    {
        let n_t = w.n_steps();
        if increments.n_t != n_t {
            return Err(Error::Mismatch(format!(
                "{} noise steps for a path with {} steps",
                increments.n_t, n_t
            )));
        }
        if increments.k_noise != sigma.k_noise() {
            return Err(Error::Mismatch(format!(
                "{} noise modes for a coefficient with {}",
                increments.k_noise,
                sigma.k_noise()
            )));
        }
        if sigma.k_noise() > self.k_max() + 1 {
            return Err(Error::Mismatch(format!(
                "K_noise = {} exceeds the resolved modes (K = {})",
                sigma.k_noise(),
                self.k_max()
            )));
        }
        if libm::fabs(w.dt() - self.dt) > 1e-12 * self.dt {
            return Err(Error::Mismatch(format!("path step {} differs from scheme step {}", w.dt(), self.dt)));
        }
        let weights = sigma.weights();
        let mut state = SpectralField::zeros(self.k_max());
        for k in 0..=self.k_max().min(u0.k_max()) {
            state.set(k, u0.coefficients()[k]);
        }
        let path = w.values();
        for n in 0..n_t {
            self.grid.to_points_with(&state, &mut self.buf, &mut self.points);
            let shift = path[n];
            for (s, &u) in self.profile.iter_mut().zip(&self.points) {
                let y = u - shift;
                let v = sigma.profile(y);
                if !v.is_finite() {
                    return Err(Error::NonFinite { argument: y });
                }
                *s = v;
            }
            let inc = increments.step(n);
            let xi: f64 = weights.iter().zip(inc).map(|(a, b)| a * b).sum();
            for (g, s) in self.g.iter_mut().zip(&self.profile) {
                *g = s * xi;
            }
            self.grid.from_points_with(&self.g, &mut self.buf, &mut self.noise);
            observe(&StepView {
                step: n,
                time: w.time(n),
                dt: self.dt,
                shift,
                state: &state,
                points: &self.points,
                profile: &self.profile,
                increments: inc,
                xi,
                noise: &self.noise,
            });
            self.next.clone_from(&state);
            self.next.axpy(1.0, &self.noise);
            let mut finite = true;
            for (k, d) in self.decay.iter().enumerate() {
                let c = self.next.coefficients()[k] * d;
                finite &= c.re.is_finite() && c.im.is_finite();
                state.set(k, c);
            }
            if !finite {
                return Err(Error::Unstable { step: n + 1 });
            }
        }
        Ok(state)
    }
}

/// Every state of one run with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdeTrajectory {
    pub dt: f64,
    pub k_max: usize,
    pub k_noise: usize,
    pub epsilon: Option<f64>,
    pub noise_seed: u64,
    pub noise_stream: u64,
    pub path: SamplePath,
    /// `û^n` for `n = 0..=n_t`.
    pub states: Vec<SpectralField>,
}

impl SpdeTrajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Solves the mollified equation with the exponential Euler scheme.
pub fn solve_mollified<C: Coefficient + ?Sized>(
    u0: &SpectralField,
    sigma: &C,
    epsilon: Option<f64>,
    w: &SamplePath,
    n_t: usize,
    k_max: usize,
    increments: &CylindricalIncrements,
) -> Result<SpdeTrajectory> {
    if w.n_steps() != n_t {
        return Err(Error::Mismatch(format!("path has {} steps, scheme {}", w.n_steps(), n_t)));
    }
    let mut solver = Solver::new(k_max, w.dt())?;
    let mut states = Vec::with_capacity(n_t + 1);
    let last = solver.run(sigma, w, u0, increments, |v| states.push(v.state.clone()))?;
    states.push(last);
    Ok(SpdeTrajectory {
        dt: w.dt(),
        k_max,
        k_noise: sigma.k_noise(),
        epsilon,
        noise_seed: increments.seed,
        noise_stream: increments.stream,
        path: w.clone(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spde::coefficient::{DiffusionCoefficient, Sigma2};
    use crate::stats::{variance_estimate, Estimate};

    fn zero_path(n: usize, horizon: f64) -> SamplePath {
        SamplePath::from_values(horizon, vec![0.0; n + 1]).unwrap()
    }

    fn u0(k_max: usize) -> SpectralField {
        let mut u = SpectralField::zeros(k_max);
        u.set(0, Complex64::new(0.3, 0.0));
        u.set(1, Complex64::new(0.8, -0.2));
        u.set(3, Complex64::new(0.0, 0.5));
        u
    }

    #[test]
    fn noiseless_reduction() {
        let n = 256;
        let w = zero_path(n, 1.0);
        let sigma = DiffusionCoefficient::zero(4);
        let inc = CylindricalIncrements::generate(n, 4, w.dt(), 1, 0).unwrap();
        let traj = solve_mollified(&u0(8), &sigma, None, &w, n, 8, &inc).unwrap();
        for (j, s) in traj.states.iter().enumerate() {
            let exact = u0(8).heat_apply(traj.time(j));
            let err = s.sub(&exact).l2_norm();
            assert!(err <= 1e-12 * (1.0 + j as f64), "{j} {err}");
        }
    }

    #[test]
    fn coupling_determinism() {
        let n = 64;
        let w = crate::paths::generate_fbm(n, 1.0, 0.3, 5).unwrap();
        let sigma = DiffusionCoefficient::new(Sigma2::Gaussian { amplitude: 1.0, length: 1.0 }, 4, 2.0).unwrap();
        let inc = CylindricalIncrements::for_sample(n, 4, w.dt(), 9, 3).unwrap();
        let a = solve_mollified(&u0(8), &sigma, None, &w, n, 8, &inc).unwrap();
        let b = solve_mollified(&u0(8), &sigma, None, &w, n, 8, &inc).unwrap();
        assert_eq!(a, b);
        let other = CylindricalIncrements::for_sample(n, 4, w.dt(), 9, 4).unwrap();
        let c = solve_mollified(&u0(8), &sigma, None, &w, n, 8, &other).unwrap();
        assert_ne!(a.states.last(), c.states.last());
    }

    #[test]
    fn mismatches_are_rejected() {
        let w = zero_path(16, 1.0);
        let sigma = DiffusionCoefficient::zero(4);
        let inc = CylindricalIncrements::generate(8, 4, w.dt(), 1, 0).unwrap();
        assert!(solve_mollified(&u0(4), &sigma, None, &w, 16, 4, &inc).is_err());
        let inc = CylindricalIncrements::generate(16, 3, w.dt(), 1, 0).unwrap();
        assert!(solve_mollified(&u0(4), &sigma, None, &w, 16, 4, &inc).is_err());
    }

    #[test]
    fn increments_have_the_right_variance() {
        let inc = CylindricalIncrements::generate(4000, 8, 0.01, 2, 0).unwrap();
        let v = variance_estimate(inc.values());
        assert!(v.z_score(0.01) < 3.0, "{v:?}");
    }

    #[test]
    fn mean_mode_is_brownian() {
        // Constant σ on mode 0 only: the spatial mean is c·β^0, variance c²t.
        let n = 64;
        let w = zero_path(n, 1.0);
        let c = 0.7;
        let sigma = DiffusionCoefficient::with_weights(Sigma2::Constant(c), vec![1.0, 0.0], 2.0).unwrap();
        let mut solver = Solver::new(4, w.dt()).unwrap();
        let grid = solver.grid().clone();
        let finals: Vec<f64> = (0..4000)
            .map(|i| {
                let inc = CylindricalIncrements::for_sample(n, 2, w.dt(), 17, i).unwrap();
                let u = solver.run(&sigma, &w, &SpectralField::zeros(4), &inc, |_| {}).unwrap();
                grid.to_points(&u)[5]
            })
            .collect();
        let v = variance_estimate(&finals);
        assert!(v.z_score(c * c) < 3.0, "{v:?}");
        assert!(Estimate::of(&finals).z_score(0.0) < 3.0);
    }

    #[test]
    fn single_mode_ou() {
        // û_1 forced by c·Δβ: Var Re û_1 → c²(1 - e^{-2t})/2 per real coordinate pair.
        let dt = 1.0 / 1024.0;
        let n = 1024;
        let c = 0.9;
        let decay: Vec<f64> = (0..=2).map(|k| libm::exp(-((k * k) as f64) * dt)).collect();
        let mut r = rng::stream(23, 0);
        let finals: Vec<f64> = (0..4000)
            .map(|_| {
                let mut u = SpectralField::zeros(2);
                let mut g = SpectralField::zeros(2);
                for _ in 0..n {
                    g.set(1, Complex64::new(c * libm::sqrt(dt) * rng::normal(&mut r), 0.0));
                    exponential_euler_step(&mut u, &g, &decay);
                }
                u.coefficients()[1].re
            })
            .collect();
        let v = variance_estimate(&finals);
        let t = n as f64 * dt;
        assert!(v.z_score(c * c * (1.0 - libm::exp(-2.0 * t)) / 2.0) < 3.0, "{v:?}");
    }
}
