//! Experiment configuration.
//!
//! A config is one TOML file. Every field has a default, so a file only
//! needs the keys it changes; `rbnlab <kind> --print-config` shows the
//! resolved values.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rbnlab_core::profile::Envelope;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Paths,
    Localtime,
    Region,
    SewDemo,
    Schauder,
    SpdeRun,
    Isometry,
    Apriori,
    Cauchy,
    Martingale,
    FullSuite,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::Paths,
        Kind::Localtime,
        Kind::Region,
        Kind::SewDemo,
        Kind::Schauder,
        Kind::SpdeRun,
        Kind::Isometry,
        Kind::Apriori,
        Kind::Cauchy,
        Kind::Martingale,
        Kind::FullSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Paths => "paths",
            Kind::Localtime => "localtime",
            Kind::Region => "region",
            Kind::SewDemo => "sew-demo",
            Kind::Schauder => "schauder",
            Kind::SpdeRun => "spde-run",
            Kind::Isometry => "isometry",
            Kind::Apriori => "apriori",
            Kind::Cauchy => "cauchy",
            Kind::Martingale => "martingale",
            Kind::FullSuite => "full-suite",
        }
    }

    /// Kinds that solve the SPDE and therefore require an admissible config.
    pub fn runs_spde(self) -> bool {
        matches!(
            self,
            Kind::SpdeRun | Kind::Isometry | Kind::Apriori | Kind::Cauchy | Kind::Martingale | Kind::FullSuite
        )
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::invalid("kind", format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeSpec {
    None,
    Gaussian,
    Exponential,
}

/// Shape of `Σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaKind {
    /// `min(|x|^{-gamma}, cap)·envelope(x)`.
    Singular,
    /// `amplitude·exp(-x²/length²)`.
    Gaussian,
    /// `value²`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub hurst: f64,
    pub p: f64,
    /// Singularity exponent of `Σ²`.
    pub gamma: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub eta: f64,
    /// Slack `δ` in the Volterra bound exponent `γ0 - η - δ`.
    pub delta: f64,
    /// Moments reported by the ensemble checks.
    pub m: Vec<f64>,
    pub horizon: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            hurst: 0.2,
            p: 2.0,
            gamma: 0.4,
            gamma0: 0.8,
            gamma1: 0.7,
            eta: 0.7,
            delta: 0.05,
            m: vec![2.0, 8.0],
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sigma {
    pub kind: SigmaKind,
    pub cap: f64,
    pub envelope: EnvelopeSpec,
    /// Rate of the exponential envelope.
    pub envelope_rate: f64,
    pub amplitude: f64,
    pub length: f64,
    pub value: f64,
}

impl Default for Sigma {
    fn default() -> Self {
        Self {
            kind: SigmaKind::Singular,
            cap: 1e3,
            envelope: EnvelopeSpec::Gaussian,
            envelope_rate: 1.0,
            amplitude: 1.0,
            length: 1.0,
            value: 0.5,
        }
    }
}

impl Sigma {
    pub fn envelope(&self) -> Envelope {
        match self.envelope {
            EnvelopeSpec::None => Envelope::None,
            EnvelopeSpec::Gaussian => Envelope::Gaussian,
            EnvelopeSpec::Exponential => Envelope::Exponential(self.envelope_rate),
        }
    }
}

/// Space-time resolution of the SPDE suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    /// Time steps; a power of two.
    pub n_t: usize,
    /// Fourier cutoff `K`.
    pub k: usize,
    pub k_noise: usize,
    pub n_bins: usize,
    /// Dyadic checkpoints for Hölder-in-time estimates.
    pub checkpoint_level: u32,
    /// Initial condition `û_k` for `k = 0, 1, …` as `[re, im]` pairs.
    pub u0: Vec<[f64; 2]>,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            n_t: 1024,
            k: 32,
            k_noise: 32,
            n_bins: 512,
            checkpoint_level: 6,
            u0: vec![[0.0, 0.0], [0.5, 0.0], [0.0, 0.2]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSuite {
    pub hursts: Vec<f64>,
    pub n: usize,
    pub samples: usize,
    pub chi_square_seeds: usize,
    pub chi_square_bins: usize,
}

impl Default for PathsSuite {
    fn default() -> Self {
        Self {
            hursts: vec![0.25, 0.5, 0.75],
            n: 4096,
            samples: 10_000,
            chi_square_seeds: 4,
            chi_square_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocaltimeSuite {
    pub hursts: Vec<f64>,
    pub n: usize,
    pub n_bins: usize,
    pub pad: f64,
    pub duality_hurst: f64,
    pub duality_seeds: usize,
    pub duality_n: usize,
    pub duality_gamma: f64,
    pub duality_cap: f64,
    pub duality_bins: usize,
}

impl Default for LocaltimeSuite {
    fn default() -> Self {
        Self {
            hursts: vec![0.2, 0.5],
            n: 1 << 16,
            n_bins: 512,
            pad: 0.05,
            duality_hurst: 0.25,
            duality_seeds: 16,
            duality_n: 1 << 14,
            duality_gamma: 0.4,
            duality_cap: 1e3,
            duality_bins: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSuite {
    /// Paths for the refinement-stability checks; empty skips them.
    pub hursts: Vec<f64>,
    pub n: usize,
    pub seeds: usize,
    pub dx: f64,
    pub min_level: u32,
    pub max_level: u32,
    /// Singularity exponent of the test function `min(|x|^{-g}, cap) e^{-x²}`.
    pub test_gamma: f64,
    pub test_cap: f64,
    pub margin_inside: f64,
    pub margin_outside: f64,
}

impl Default for RegionSuite {
    fn default() -> Self {
        Self {
            hursts: vec![0.2, 0.45],
            n: 1 << 21,
            seeds: 16,
            dx: 2e-3,
            min_level: 2,
            max_level: 8,
            test_gamma: 0.49,
            test_cap: 1e3,
            margin_inside: 0.02,
            margin_outside: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchauderSuite {
    /// `(ρ, θ)` pairs.
    pub pairs: Vec<[f64; 2]>,
    /// Cutoffs compared pairwise (each against the next).
    pub k_values: Vec<usize>,
    pub s_min: f64,
    pub n_s: usize,
    pub delta_min: f64,
    pub n_delta: usize,
}

impl Default for SchauderSuite {
    fn default() -> Self {
        Self {
            pairs: vec![[0.0, 0.5], [1.0, 0.25], [1.0, 0.5]],
            k_values: vec![1024, 2048, 4096],
            s_min: 0.01,
            n_s: 25,
            delta_min: 1e-4,
            n_delta: 25,
        }
    }
}

/// Sample counts and knobs of the SPDE suites; `samples` at the top level
/// is the default for any count left at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdeSuite {
    pub isometry_samples: usize,
    pub isometry_constant: f64,
    pub identification_samples: usize,
    /// `log2` of the identification time grid; the sewing runs to this level.
    pub identification_log_steps: u32,
    pub volterra_samples: usize,
    pub apriori_samples: usize,
    pub cauchy_samples: usize,
    /// `Σ²` used for the Cauchy threshold check.
    pub cauchy_sigma: SigmaKind,
    pub cauchy_min_reduction: f64,
    pub martingale_samples: usize,
    pub martingale_sigma: SigmaKind,
    pub martingale_epsilon: f64,
    pub martingale_k: usize,
    pub martingale_n_t: usize,
    pub martingale_point: f64,
}

impl Default for SpdeSuite {
    fn default() -> Self {
        Self {
            isometry_samples: 0,
            isometry_constant: 0.5,
            identification_samples: 16,
            identification_log_steps: 12,
            volterra_samples: 200,
            apriori_samples: 1000,
            cauchy_samples: 500,
            cauchy_sigma: SigmaKind::Gaussian,
            cauchy_min_reduction: 0.3,
            martingale_samples: 0,
            martingale_sigma: SigmaKind::Gaussian,
            martingale_epsilon: 0.1,
            martingale_k: 16,
            martingale_n_t: 256,
            martingale_point: 1.0,
        }
    }
}

/// Pass thresholds. Defaults are the documented acceptance values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub z_max: f64,
    pub chi_square_level: f64,
    pub occupation_relative: f64,
    pub duality_factor: f64,
    pub additive: f64,
    pub riemann: f64,
    pub volterra: f64,
    pub schauder_band: f64,
    pub isometry_relative: f64,
    pub identification_relative: f64,
    pub ladder_factor: f64,
    pub monotone_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z_max: 3.0,
            chi_square_level: 0.01,
            occupation_relative: 1e-3,
            duality_factor: 5.0,
            additive: 1e-12,
            riemann: 1e-8,
            volterra: 1e-4,
            schauder_band: 0.1,
            isometry_relative: 0.05,
            identification_relative: 0.02,
            ladder_factor: 2.0,
            monotone_slack: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Seed base: paths use stream 0 of `seed`, noise sample `i` its own stream.
    pub seed: u64,
    /// Default ensemble size.
    pub samples: usize,
    /// Output directory; the CLI flag and `RBNLAB_OUT` take precedence.
    pub out: Option<PathBuf>,
    pub override_inadmissible: bool,
    /// Treat advisory (constant-fitting) checks as mandatory.
    pub strict: bool,
    /// Write per-step trajectories in `spde-run`.
    pub dump_trajectory: bool,
    /// ε-ladder, sorted descending.
    pub epsilons: Vec<f64>,
    pub physics: Physics,
    pub sigma: Sigma,
    pub discretization: Discretization,
    pub paths: PathsSuite,
    pub localtime: LocaltimeSuite,
    pub region: RegionSuite,
    pub schauder: SchauderSuite,
    pub spde: SpdeSuite,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: Kind::FullSuite,
            seed: 20_240_601,
            samples: 10_000,
            out: None,
            override_inadmissible: false,
            strict: false,
            dump_trajectory: true,
            epsilons: vec![0.2, 0.1, 0.05],
            physics: Physics::default(),
            sigma: Sigma::default(),
            discretization: Discretization::default(),
            paths: PathsSuite::default(),
            localtime: LocaltimeSuite::default(),
            region: RegionSuite::default(),
            schauder: SchauderSuite::default(),
            spde: SpdeSuite::default(),
            tolerances: Tolerances::default(),
        }
    }
}

fn ensure(cond: bool, field: &'static str, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(HarnessError::invalid(field, msg))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `count` unless it is 0, else the top-level `samples`.
    pub fn samples_or_default(&self, count: usize) -> usize {
        if count == 0 {
            self.samples
        } else {
            count
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        ensure(p.hurst > 0.0 && p.hurst < 1.0, "physics.hurst", "must lie in (0, 1)")?;
        ensure(p.p >= 1.0, "physics.p", "must be at least 1")?;
        ensure(p.gamma >= 0.0 && p.gamma < 1.0, "physics.gamma", "must lie in [0, 1)")?;
        ensure(p.gamma0 > 0.0 && p.gamma0 < 1.0, "physics.gamma0", "must lie in (0, 1)")?;
        ensure(p.horizon > 0.0 && p.horizon.is_finite(), "physics.horizon", "must be positive")?;
        ensure(p.eta >= 0.0 && p.eta < 1.0, "physics.eta", "must lie in [0, 1)")?;
        ensure(!p.m.is_empty() && p.m.iter().all(|&m| m >= 2.0), "physics.m", "moments must be at least 2")?;
        let d = &self.discretization;
        ensure(d.n_t >= 2 && d.n_t.is_power_of_two(), "discretization.n_t", "must be a power of two")?;
        ensure(d.k >= 1, "discretization.k", "must be positive")?;
        ensure(d.k_noise >= 1 && d.k_noise <= d.k + 1, "discretization.k_noise", "must lie in [1, K + 1]")?;
        ensure(d.n_bins >= 2, "discretization.n_bins", "must be at least 2")?;
        ensure(d.u0.len() <= d.k + 1, "discretization.u0", "more modes than K + 1")?;
        ensure(
            d.u0.first().is_none_or(|c| c[1] == 0.0),
            "discretization.u0",
            "the k = 0 coefficient of a real field is real",
        )?;
        ensure(self.samples >= 1, "samples", "must be positive")?;
        ensure(!self.epsilons.is_empty(), "epsilons", "ladder is empty")?;
        ensure(self.epsilons.iter().all(|&e| e > 0.0), "epsilons", "must be positive")?;
        ensure(
            self.epsilons.windows(2).all(|w| w[0] > w[1]),
            "epsilons",
            "ladder must be sorted strictly descending",
        )?;
        let s = &self.sigma;
        ensure(s.cap > 0.0, "sigma.cap", "must be positive")?;
        ensure(s.length > 0.0, "sigma.length", "must be positive")?;
        ensure(s.amplitude >= 0.0, "sigma.amplitude", "must be non-negative")?;
        let sp = &self.spde;
        ensure(
            sp.martingale_n_t.is_power_of_two() && sp.martingale_n_t >= 2,
            "spde.martingale_n_t",
            "must be a power of two",
        )?;
        ensure(sp.martingale_epsilon > 0.0, "spde.martingale_epsilon", "must be positive")?;
        ensure(sp.identification_log_steps >= 1, "spde.identification_log_steps", "must be positive")?;
        let r = &self.region;
        ensure(r.n.is_power_of_two(), "region.n", "must be a power of two")?;
        ensure(r.min_level < r.max_level, "region.min_level", "must be below max_level")?;
        ensure(r.n >= 1 << r.max_level, "region.max_level", "needs 2^max_level <= n")?;
        ensure(self.schauder.k_values.len() >= 2, "schauder.k_values", "need at least two cutoffs")?;
        ensure(self.paths.n >= 2, "paths.n", "must be at least 2")?;
        ensure(self.localtime.n_bins >= 2, "localtime.n_bins", "must be at least 2")?;
        Ok(())
    }

    /// Sets one sweepable parameter by name.
    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<()> {
        let as_count = |v: f64, field: &'static str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(HarnessError::invalid(field, format!("{v} is not a positive integer")))
            }
        };
        match axis {
            "hurst" | "H" => self.physics.hurst = value,
            "p" => self.physics.p = value,
            "gamma" => self.physics.gamma = value,
            "gamma0" => self.physics.gamma0 = value,
            "gamma1" => self.physics.gamma1 = value,
            "eta" => self.physics.eta = value,
            "horizon" | "T" => self.physics.horizon = value,
            "m" => self.physics.m = vec![value],
            "epsilon" => self.epsilons = vec![value],
            "cap" => self.sigma.cap = value,
            "K" | "k" => {
                let k = as_count(value, "K")?;
                self.discretization.k = k;
                self.discretization.k_noise = k;
            }
            "k_noise" => self.discretization.k_noise = as_count(value, "k_noise")?,
            "n_t" => self.discretization.n_t = as_count(value, "n_t")?,
            "samples" => self.samples = as_count(value, "samples")?,
            "seed" => self.seed = as_count(value, "seed")? as u64,
            _ => return Err(HarnessError::invalid("axis", format!("`{axis}` is not a sweepable parameter"))),
        }
        Ok(())
    }
}

/// Parameters accepted by [`ExperimentConfig::set_axis`].
pub const AXES: &[&str] = &[
    "hurst", "p", "gamma", "gamma0", "gamma1", "eta", "horizon", "m", "epsilon", "cap", "K", "k_noise", "n_t",
    "samples", "seed",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("kind = \"region\"\n[physics]\nhurst = 0.3\np = 4.0\n").unwrap();
        assert_eq!(cfg.kind, Kind::Region);
        assert_eq!(cfg.physics.hurst, 0.3);
        assert_eq!(cfg.physics.gamma0, 0.8);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_toml("epsilons = [0.1, 0.2]").unwrap_err();
        assert!(e.to_string().contains("epsilons"), "{e}");
        let e = ExperimentConfig::from_toml("[discretization]\nn_t = 1000").unwrap_err();
        assert!(e.to_string().contains("discretization.n_t"), "{e}");
        let e = ExperimentConfig::from_toml("[physics]\nhurts = 0.2").unwrap_err();
        assert!(e.to_string().contains("hurts"), "{e}");
    }

    #[test]
    fn axes() {
        let mut cfg = ExperimentConfig::default();
        for axis in AXES {
            cfg.set_axis(axis, 2.0).unwrap();
        }
        assert!(cfg.set_axis("bogus", 1.0).is_err());
        assert!(cfg.set_axis("K", 1.5).is_err());
        assert_eq!(Kind::from_str("sew-demo").unwrap(), Kind::SewDemo);
    }
}
