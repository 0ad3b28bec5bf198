//! One line per acceptance criterion. A criterion passes when every
//! mandatory check it selects passes and the run stays inside its budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rbnlab::config::{ExperimentConfig, Kind, SigmaKind};
use rbnlab::report::ExperimentReport;
use rbnlab::{run_suites, Suite};

struct Criterion {
    id: u32,
    title: &'static str,
    suites: &'static [Suite],
    prefixes: &'static [&'static str],
    budget: Duration,
    setup: fn(&mut ExperimentConfig),
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "fBm variance and increment law",
        suites: &[Suite::Paths],
        prefixes: &["paths."],
        budget: Duration::from_secs(60),
        setup: |c| {
            c.paths.hursts = vec![0.25, 0.5, 0.75];
            c.paths.n = 1 << 12;
            c.paths.samples = 10_000;
            c.tolerances.z_max = 3.0;
            c.tolerances.chi_square_level = 0.01;
        },
    },
    Criterion {
        id: 2,
        title: "occupation-times formula",
        suites: &[Suite::Localtime],
        prefixes: &["localtime.occupation."],
        budget: Duration::from_secs(60),
        setup: |c| {
            c.localtime.hursts = vec![0.2, 0.5];
            c.localtime.n = 1 << 16;
            c.localtime.n_bins = 512;
            c.localtime.duality_seeds = 0;
            c.tolerances.occupation_relative = 1e-3;
        },
    },
    Criterion {
        id: 3,
        title: "averaged-field duality",
        suites: &[Suite::Localtime],
        prefixes: &["localtime.duality"],
        budget: Duration::from_secs(120),
        setup: |c| {
            c.localtime.hursts.clear();
            c.localtime.duality_hurst = 0.25;
            c.localtime.duality_seeds = 16;
            c.localtime.duality_gamma = 0.4;
            c.tolerances.duality_factor = 5.0;
        },
    },
    Criterion {
        id: 4,
        title: "regularity region",
        suites: &[Suite::Region],
        prefixes: &["region.H="],
        budget: Duration::from_secs(300),
        setup: |c| {
            c.region.hursts = vec![0.2, 0.45];
            c.region.seeds = 16;
            c.region.margin_inside = 0.02;
            c.region.margin_outside = 0.05;
        },
    },
    Criterion {
        id: 5,
        title: "sewing engine",
        suites: &[Suite::SewDemo],
        prefixes: &["sew."],
        budget: Duration::from_secs(60),
        setup: |c| {
            c.tolerances.additive = 1e-12;
            c.tolerances.riemann = 1e-8;
            c.tolerances.volterra = 1e-4;
        },
    },
    Criterion {
        id: 6,
        title: "Schauder constants under cutoff doubling",
        suites: &[Suite::Schauder],
        prefixes: &["schauder."],
        budget: Duration::from_secs(60),
        setup: |c| {
            c.schauder.pairs = vec![[0.0, 0.5], [1.0, 0.25], [1.0, 0.5]];
            c.schauder.k_values = vec![1 << 10, 1 << 11, 1 << 12];
            c.schauder.s_min = 0.01;
            c.tolerances.schauder_band = 0.1;
        },
    },
    Criterion {
        id: 7,
        title: "Ito isometry, constant and singular sigma",
        suites: &[Suite::Isometry],
        prefixes: &["isometry.constant", "isometry.singular"],
        budget: Duration::from_secs(600),
        setup: |c| {
            singular_config(c);
            c.epsilons = vec![0.05];
            c.spde.isometry_samples = 10_000;
            c.tolerances.isometry_relative = 0.05;
        },
    },
    Criterion {
        id: 8,
        title: "identification by sewing",
        suites: &[Suite::Identification],
        prefixes: &["identification.eps="],
        budget: Duration::from_secs(600),
        setup: |c| {
            singular_config(c);
            c.spde.identification_log_steps = 12;
            c.spde.identification_samples = 16;
            c.tolerances.identification_relative = 0.02;
        },
    },
    Criterion {
        id: 9,
        title: "uniform a-priori bounds",
        suites: &[Suite::Apriori],
        prefixes: &["apriori."],
        budget: Duration::from_secs(1800),
        setup: |c| {
            singular_config(c);
            c.epsilons = vec![0.2, 0.1, 0.05];
            c.physics.m = vec![2.0, 8.0];
            c.spde.apriori_samples = 1000;
            c.tolerances.ladder_factor = 2.0;
        },
    },
    Criterion {
        id: 10,
        title: "Cauchy property in epsilon",
        suites: &[Suite::Cauchy],
        prefixes: &["cauchy."],
        budget: Duration::from_secs(1200),
        setup: |c| {
            c.epsilons = vec![0.2, 0.1, 0.05];
            c.spde.cauchy_sigma = SigmaKind::Gaussian;
            c.spde.cauchy_min_reduction = 0.3;
        },
    },
    Criterion {
        id: 11,
        title: "martingale-problem defects",
        suites: &[Suite::Martingale],
        prefixes: &["martingale."],
        budget: Duration::from_secs(900),
        setup: |c| {
            c.spde.martingale_samples = 10_000;
            c.spde.martingale_sigma = SigmaKind::Gaussian;
            c.tolerances.z_max = 3.0;
        },
    },
    Criterion {
        id: 12,
        title: "admissibility arithmetic",
        suites: &[Suite::Region],
        prefixes: &["region.bounds."],
        budget: Duration::from_secs(1),
        setup: |c| c.region.hursts.clear(),
    },
];

fn singular_config(c: &mut ExperimentConfig) {
    c.physics.hurst = 0.2;
    c.physics.p = 2.0;
    c.physics.gamma = 0.4;
    c.sigma.kind = SigmaKind::Singular;
    c.sigma.cap = 1e3;
    c.discretization.k = 32;
    c.discretization.k_noise = 32;
    c.discretization.n_t = 1 << 10;
}

fn evaluate(c: &Criterion, report: &ExperimentReport, elapsed: Duration) -> (bool, String) {
    let selected: Vec<_> = report
        .checks
        .iter()
        .filter(|k| k.mandatory && c.prefixes.iter().any(|p| k.name.starts_with(p)))
        .collect();
    let failed: Vec<&str> = selected.iter().filter(|k| !k.passed).map(|k| k.name.as_str()).collect();
    let in_time = elapsed <= c.budget;
    let ok = !selected.is_empty() && failed.is_empty() && in_time;
    let mut detail = format!(
        "{} checks, {:.1} s of {} s",
        selected.len(),
        elapsed.as_secs_f64(),
        c.budget.as_secs()
    );
    if selected.is_empty() {
        detail.push_str("; no checks selected");
    }
    if !failed.is_empty() {
        detail.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    if !in_time {
        detail.push_str("; over budget");
    }
    (ok, detail)
}

fn main() -> ExitCode {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let root = tempfile::tempdir().expect("temporary directory");
    let mut all = true;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let mut cfg = ExperimentConfig::default();
        cfg.kind = Kind::FullSuite;
        (c.setup)(&mut cfg);
        let start = Instant::now();
        let line = match run_suites(&cfg, &root.path().join(c.id.to_string()), 1, c.suites) {
            Ok(report) => {
                let (ok, detail) = evaluate(c, &report, start.elapsed());
                all &= ok;
                format!("{} {:>2} {}: {detail}", if ok { "PASS" } else { "FAIL" }, c.id, c.title)
            }
            Err(e) => {
                all = false;
                format!("FAIL {:>2} {}: {e}", c.id, c.title)
            }
        };
        println!("{line}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
