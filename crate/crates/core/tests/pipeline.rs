use num_complex::Complex64;
use rbnlab_core::occupation::{local_time, Smoothing, SpatialGrid};
use rbnlab_core::paths::FbmGenerator;
use rbnlab_core::sewing::{sew, SewOptions};
use rbnlab_core::spde::{solve_mollified, CylindricalIncrements, DiffusionCoefficient, Sigma2};
use rbnlab_core::spectral::SpectralField;

#[test]
fn local_time_of_a_path_has_mass_t() {
    let w = FbmGenerator::new(1 << 12, 2.0, 0.3).unwrap().sample(3);
    let grid = SpatialGrid::covering(&w, 0.05, 256).unwrap();
    let l = local_time(&w, &grid, w.n_steps(), Smoothing::Histogram).unwrap();
    let mass: f64 = l.iter().sum::<f64>() * grid.dx();
    assert!((mass - 2.0).abs() < 1e-12, "{mass}");
}

#[test]
fn increments_of_a_path_sew_to_its_endpoint() {
    let w = FbmGenerator::new(1 << 10, 1.0, 0.25).unwrap().sample(9);
    let n = w.n_steps() as f64;
    let at = |t: f64| {
        let r = (t * n).clamp(0.0, n);
        let j = (r as usize).min(w.n_steps() - 1);
        let v = w.values();
        v[j] + (r - j as f64) * (v[j + 1] - v[j])
    };
    let germ = |s: f64, t: f64| at(t) - at(s);
    let r = sew(&germ, 0.0, 1.0, &SewOptions::default());
    let end = *w.values().last().unwrap();
    assert!((r.total() - end).abs() < 1e-12);
}

fn u0() -> SpectralField {
    let mut u = SpectralField::zeros(8);
    u.set(0, Complex64::new(0.3, 0.0));
    u.set(1, Complex64::new(0.5, 0.1));
    u.set(3, Complex64::new(0.0, -0.2));
    u
}

#[test]
fn without_noise_the_scheme_is_the_heat_flow() {
    let w = FbmGenerator::new(256, 1.0, 0.2).unwrap().sample(1);
    let sigma = DiffusionCoefficient::new(Sigma2::Constant(0.0), 8, 2.0).unwrap();
    let inc = CylindricalIncrements::for_sample(256, 8, w.dt(), 5, 0).unwrap();
    let traj = solve_mollified(&u0(), &sigma, None, &w, 256, 8, &inc).unwrap();
    let expect = u0().heat_apply(1.0);
    let diff = traj.states.last().unwrap().sub(&expect).l2_norm();
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn seeds_fix_the_trajectory() {
    let w = FbmGenerator::new(128, 1.0, 0.2).unwrap().sample(1);
    let sigma = DiffusionCoefficient::new(Sigma2::Constant(0.5), 8, 2.0).unwrap();
    let solve = |sample| {
        let inc = CylindricalIncrements::for_sample(128, 8, w.dt(), 5, sample).unwrap();
        solve_mollified(&u0(), &sigma, None, &w, 128, 8, &inc).unwrap()
    };
    let a = solve(0);
    assert_eq!(a.states, solve(0).states);
    assert_ne!(a.states.last(), solve(1).states.last());
}
