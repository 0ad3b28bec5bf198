use std::fs;

use rbnlab::config::{ExperimentConfig, Kind, SigmaKind};

#[test]
fn loads_a_partial_file_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cauchy.toml");
    fs::write(
        &file,
        r#"
kind = "cauchy"
epsilons = [0.4, 0.2]

[physics]
hurst = 0.15

[spde]
cauchy_sigma = "singular"
"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&file).unwrap();
    assert_eq!(cfg.kind, Kind::Cauchy);
    assert_eq!(cfg.epsilons, [0.4, 0.2]);
    assert_eq!(cfg.physics.hurst, 0.15);
    assert_eq!(cfg.physics.p, ExperimentConfig::default().physics.p);
    assert_eq!(cfg.spde.cauchy_sigma, SigmaKind::Singular);
}

#[test]
fn printed_config_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("full.toml");
    let mut cfg = ExperimentConfig::default();
    cfg.kind = Kind::Martingale;
    cfg.discretization.u0 = vec![[0.25, 0.0], [0.0, -0.1]];
    fs::write(&file, cfg.to_toml()).unwrap();
    assert_eq!(ExperimentConfig::load(&file).unwrap(), cfg);
}

#[test]
fn missing_file_names_the_path() {
    let e = ExperimentConfig::load("/nonexistent/rbnlab.toml".as_ref()).unwrap_err();
    assert!(e.to_string().contains("/nonexistent/rbnlab.toml"), "{e}");
}

#[test]
fn out_of_range_values_are_rejected() {
    for text in [
        "[physics]\nhurst = 1.2",
        "[physics]\nm = [1.0]",
        "[discretization]\nk = 8\nk_noise = 12",
        "[discretization]\nu0 = [[0.0, 1.0]]",
        "samples = 0",
    ] {
        assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
    }
}
