use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rbnlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbnlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RBNLAB_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn occ_region_prints_exact_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = rbnlab(&["occ", "region", "--H", "0.3", "--p", "4"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["admissible"], false);
    assert_eq!(v["H_bound"].as_f64().unwrap(), 2.0 / 7.0);
    assert_eq!(v["gamma0_bound"].as_f64().unwrap(), 6.0 / 7.0);
}

#[test]
fn paths_gen_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let o = rbnlab(&["paths", "gen", "--n", "32", "--H", "0.3", "--seed", "5", "--out", "w.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert!(text.starts_with("t,w\n0.0,0.0\n"));
    assert_eq!(text.lines().count(), 34);

    let o = rbnlab(&["paths", "gen", "--n", "32", "--H", "0.3", "--seed", "5", "--out", "w.bin"], dir.path());
    assert!(o.status.success());
    assert_eq!(fs::metadata(dir.path().join("w.bin")).unwrap().len(), 33 * 8);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("w.json")).unwrap()).unwrap();
    assert_eq!(side["n"], 32);
    assert_eq!(side["seed"], 5);
}

#[test]
fn sew_demo_case_prints_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let o = rbnlab(&["sew", "demo", "--case", "volterra-half"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("level,gap\n"));
    assert!(out.lines().count() > 5);

    let o = rbnlab(&["sew", "demo", "--case", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("volterra-half"));
}

#[test]
fn inadmissible_spde_run_exits_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[physics]\nhurst = 0.3\np = 4.0\n[discretization]\nn_t = 32\nk = 4\nk_noise = 4\n",
    )
    .unwrap();
    let o = rbnlab(&["spde-run", "--config", "bad.toml", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--override-inadmissible"));

    let o = rbnlab(
        &["spde-run", "--config", "bad.toml", "--out", "run", "--override-inadmissible"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("run/report.json").exists());
}

#[test]
fn output_directory_defaults_to_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = rbnlab(&["sew-demo"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("sew.volterra-ramp"));
    assert!(dir.path().join("rbnlab-out/sew-demo/report.json").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_rbnlab"))
        .args(["schauder"])
        .current_dir(dir.path())
        .env("RBNLAB_OUT", dir.path().join("elsewhere"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("elsewhere/schauder/report.json").exists());
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = rbnlab(&["cauchy", "--print-config"], dir.path());
    assert!(o.status.success());
    let cfg = rbnlab::ExperimentConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(cfg.kind, rbnlab::Kind::Cauchy);
    assert!(!dir.path().join("rbnlab-out").exists());
}

#[test]
fn failed_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tight.toml"), "[tolerances]\nschauder_band = -1.0\n").unwrap();
    let o = rbnlab(&["schauder", "--config", "tight.toml", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn sweep_writes_a_combined_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bounds.toml"), "kind = \"region\"\n[region]\nhursts = []\n").unwrap();
    let o = rbnlab(
        &["sweep", "--config", "bounds.toml", "--axis", "p", "--values", "1,4", "--out", "sw"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("sw/sweep_p.csv")).unwrap();
    assert!(text.contains("p,1.0,admissible,true"));
    assert!(text.contains("p,4.0,admissible,true"));
}
