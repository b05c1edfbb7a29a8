//! End-to-end tests of the `medpath` binary: every subcommand is exercised
//! through `std::process::Command` against real files in temp directories,
//! the way a user would run it. Fixtures come from the library's own
//! simulation generator so the planted truth is known exactly.

use medpath::dataset::residualize;
use medpath::pca::{fit_pca, select_num_components, transform};
use medpath::simulation::{generate, CalibratedGrid, SimSpec, SimTruth};
use medpath::solver::DesignStats;
use medpath::tuning::DEFAULT_ZERO_THRESHOLD;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_medpath"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to spawn medpath")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

fn assert_fails(out: &Output) {
    assert!(
        !out.status.success(),
        "expected failure, got success\nstdout: {}",
        String::from_utf8_lossy(&out.stdout),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("error"),
        "stderr should carry an error message, got: {stderr}"
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

/// Write a generated dataset as the CSV the CLI will load, and return the
/// planted truth. Column order: id, exposures, mediators, outcome.
fn write_sim_csv(spec: &SimSpec, path: &Path) -> SimTruth {
    let (raw, truth) = generate(spec).expect("generate");
    let mut csv = String::from("id");
    for name in &raw.exposure_names {
        csv.push_str(&format!(",{name}"));
    }
    for name in &raw.mediator_names {
        csv.push_str(&format!(",{name}"));
    }
    csv.push_str(&format!(",{}\n", raw.outcome_name));
    for i in 0..raw.n() {
        csv.push_str(&raw.row_ids[i]);
        for j in 0..raw.x.ncols() {
            csv.push_str(&format!(",{}", raw.x[(i, j)]));
        }
        for k in 0..raw.m.ncols() {
            csv.push_str(&format!(",{}", raw.m[(i, k)]));
        }
        csv.push_str(&format!(",{}\n", raw.y[i]));
    }
    std::fs::write(path, csv).expect("write dataset");
    truth
}

/// The standard role flags for datasets written by [`write_sim_csv`].
const SIM_ROLES: [&str; 8] = [
    "--id", "id", "--exposure", "x*", "--mediator", "m*", "--outcome", "y",
];

/// The calibrated λ1 ladder for a generated dataset, reproduced through
/// the library exactly as `simulate` builds it, so `fit` can be pointed at
/// a grid known to recover the planted truth.
fn calibrated_lambda1(spec: &SimSpec) -> Vec<f64> {
    let (raw, _) = generate(spec).expect("generate");
    let adjusted = residualize(&raw).expect("residualize");
    let mut model = fit_pca(&adjusted.x_adj, false).expect("pca");
    model.q = select_num_components(&model, spec.variance_threshold).expect("select");
    let scores = transform(&model, &adjusted.x_adj).expect("transform");
    let stats = DesignStats::new(&scores, &adjusted.m_adj, &adjusted.y_adj).expect("stats");
    CalibratedGrid::default()
        .build(&stats, DEFAULT_ZERO_THRESHOLD)
        .expect("calibrate")
        .lambda1_values
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------------------
// pca
// ---------------------------------------------------------------------------

#[test]
fn pca_outputs_are_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 60,
        r: 15,
        p: 5,
        seed: 41,
        ..SimSpec::default()
    };
    write_sim_csv(&spec, &dir.path().join("data.csv"));

    let mut args = vec!["pca", "--input", "data.csv"];
    args.extend_from_slice(&SIM_ROLES);
    args.extend_from_slice(&["--threshold", "0.9"]);

    let first = run(&args, dir.path());
    assert_ok(&first);
    assert!(stdout(&first).contains("<- q"), "variance table should mark q");
    let model1 = read(&dir.path().join("pca_model.json"));
    let scores1 = read(&dir.path().join("scores.csv"));

    let second = run(&args, dir.path());
    assert_ok(&second);
    assert_eq!(model1, read(&dir.path().join("pca_model.json")));
    assert_eq!(scores1, read(&dir.path().join("scores.csv")));

    // Scores carry one row per subject plus the header.
    assert_eq!(scores1.lines().count(), spec.n + 1);
}

#[test]
fn pca_explicit_q_overrides_threshold() {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 50,
        r: 12,
        p: 4,
        seed: 42,
        ..SimSpec::default()
    };
    write_sim_csv(&spec, &dir.path().join("data.csv"));

    let mut args = vec!["pca", "--input", "data.csv"];
    args.extend_from_slice(&SIM_ROLES);
    args.extend_from_slice(&["--threshold", "0.99", "--q", "1"]);
    let out = run(&args, dir.path());
    assert_ok(&out);
    let scores = read(&dir.path().join("scores.csv"));
    assert_eq!(scores.lines().next().unwrap(), "id,PC1");
    assert!(stdout(&out).contains("kept q = 1"));

    // Out-of-range q is rejected up front.
    let mut bad = vec!["pca", "--input", "data.csv"];
    bad.extend_from_slice(&SIM_ROLES);
    bad.extend_from_slice(&["--q", "999"]);
    assert_fails(&run(&bad, dir.path()));
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[test]
fn fit_huge_lambda_zeroes_every_path() {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 60,
        r: 12,
        p: 6,
        seed: 43,
        ..SimSpec::default()
    };
    write_sim_csv(&spec, &dir.path().join("data.csv"));

    let mut args = vec!["fit", "--input", "data.csv"];
    args.extend_from_slice(&SIM_ROLES);
    args.extend_from_slice(&[
        "--lambda1", "1e12", "--ratio2", "0", "--ratio3", "1", "--c1", "1",
        "--bic", "gaussian",
    ]);
    let out = run(&args, dir.path());
    assert_ok(&out);

    let artifact: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("fit.json"))).unwrap();
    let record = &artifact["record"];
    fn all_zero(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Array(items) => items.iter().all(all_zero),
            other => other.as_f64() == Some(0.0),
        }
    }
    assert!(all_zero(&record["alpha"]), "alpha should be fully shrunk");
    assert!(all_zero(&record["beta"]), "beta should be fully shrunk");
    assert!(all_zero(&record["gamma"]), "gamma should be fully shrunk");

    // Effects on the zero fit: no active paths, totals zero.
    let eff = run(
        &["effects", "--fit", "fit.json", "--format", "json", "--out", "zero.json"],
        dir.path(),
    );
    assert_ok(&eff);
    assert!(stdout(&eff).contains("0 active paths"));
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("zero.json"))).unwrap();
    assert_eq!(report["active_paths"].as_array().unwrap().len(), 0);
}

#[test]
fn fit_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 60,
        r: 10,
        p: 5,
        seed: 44,
        ..SimSpec::default()
    };
    write_sim_csv(&spec, &dir.path().join("data.csv"));
    let ladder = join(&calibrated_lambda1(&spec));

    let mut args = vec!["fit", "--input", "data.csv"];
    args.extend_from_slice(&SIM_ROLES);
    args.extend_from_slice(&[
        "--lambda1", &ladder, "--ratio2", "0", "--ratio3", "0.1", "--c1", "64",
        "--bic", "gaussian", "--rho", "600", "--max-iter", "20000",
    ]);

    assert_ok(&run(&args, dir.path()));
    let fit1 = read(&dir.path().join("fit.json"));
    let grid1 = read(&dir.path().join("tuning.csv"));

    assert_ok(&run(&args, dir.path()));
    assert_eq!(fit1, read(&dir.path().join("fit.json")));
    assert_eq!(grid1, read(&dir.path().join("tuning.csv")));

    // The tuning table carries one row per cell plus a header.
    assert_eq!(grid1.lines().count(), 4 + 1);
}

#[test]
fn fit_recovers_planted_paths() {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 150,
        r: 40,
        p: 25,
        seed: 45,
        ..SimSpec::default()
    };
    let truth = write_sim_csv(&spec, &dir.path().join("data.csv"));
    let ladder = join(&calibrated_lambda1(&spec));
    let rho = (10 * spec.n).to_string();

    let mut args = vec!["fit", "--input", "data.csv"];
    args.extend_from_slice(&SIM_ROLES);
    args.extend_from_slice(&[
        "--lambda1", &ladder, "--ratio2", "0", "--ratio3", "0.1", "--c1", "64",
        "--bic", "gaussian", "--rho", &rho, "--max-iter", "20000",
    ]);
    assert_ok(&run(&args, dir.path()));

    let artifact: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("fit.json"))).unwrap();
    let alpha: Vec<Vec<f64>> =
        serde_json::from_value(artifact["record"]["alpha"].clone()).unwrap();
    let beta: Vec<f64> = serde_json::from_value(artifact["record"]["beta"].clone()).unwrap();
    assert_eq!(alpha.len(), truth.q_true(), "PCA should select q_true components");

    let mut estimated = Vec::new();
    for (j, row) in alpha.iter().enumerate() {
        for (k, a) in row.iter().enumerate() {
            if (a * beta[k]).abs() > DEFAULT_ZERO_THRESHOLD {
                estimated.push((j, k));
            }
        }
    }
    let found = truth
        .active_paths
        .iter()
        .filter(|cell| estimated.contains(cell))
        .count();
    let extras = estimated
        .iter()
        .filter(|cell| !truth.active_paths.contains(cell))
        .count();
    assert!(
        found * 10 >= truth.active_paths.len() * 9,
        "found only {found} of {} planted paths",
        truth.active_paths.len()
    );
    assert!(
        extras <= 3,
        "{extras} spurious paths among {} estimated",
        estimated.len()
    );
}

// ---------------------------------------------------------------------------
// effects
// ---------------------------------------------------------------------------

/// Fit a small dataset and return the temp dir holding `fit.json`.
fn fitted_dir(seed: u64) -> (TempDir, SimSpec) {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 80,
        r: 15,
        p: 8,
        seed,
        ..SimSpec::default()
    };
    write_sim_csv(&spec, &dir.path().join("data.csv"));
    let ladder = join(&calibrated_lambda1(&spec));
    let rho = (10 * spec.n).to_string();
    let mut args = vec!["fit", "--input", "data.csv"];
    args.extend_from_slice(&SIM_ROLES);
    args.extend_from_slice(&[
        "--lambda1", &ladder, "--ratio2", "0", "--ratio3", "0.1", "--c1", "64",
        "--bic", "gaussian", "--rho", &rho, "--max-iter", "20000",
    ]);
    assert_ok(&run(&args, dir.path()));
    (dir, spec)
}

#[test]
fn effects_formats_agree() {
    let (dir, _) = fitted_dir(46);
    assert_ok(&run(
        &["effects", "--fit", "fit.json", "--format", "json", "--out", "report.json"],
        dir.path(),
    ));
    assert_ok(&run(
        &["effects", "--fit", "fit.json", "--format", "csv", "--out", "report.csv"],
        dir.path(),
    ));

    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    let ie_total: Vec<f64> = serde_json::from_value(report["ie_total"].clone()).unwrap();
    let de: Vec<f64> = serde_json::from_value(report["de"].clone()).unwrap();
    let te: Vec<f64> = serde_json::from_value(report["te"].clone()).unwrap();
    for j in 0..te.len() {
        assert_eq!(te[j], ie_total[j] + de[j], "TE identity must hold exactly");
    }

    // The CSV summary's te row agrees with the JSON values to the 4
    // significant digits the CSV prints. The summary header names which
    // components cleared the display threshold.
    let csv = read(&dir.path().join("report.csv"));
    let header = csv
        .lines()
        .find(|l| l.starts_with("effect,"))
        .expect("summary header");
    let components: Vec<usize> = header
        .split(',')
        .filter_map(|c| c.strip_prefix("PC"))
        .map(|n| n.parse::<usize>().unwrap() - 1)
        .collect();
    assert!(!components.is_empty(), "fit should have visible components");
    let te_line = csv
        .lines()
        .find(|l| l.starts_with("te,"))
        .expect("summary should have a te row");
    let cells: Vec<&str> = te_line.split(',').collect();
    // cells[0] = "te", trailing cell = grand total; columns in between
    // line up with the header's component list.
    assert_eq!(cells.len(), components.len() + 2);
    for (cell, &j) in cells[1..cells.len() - 1].iter().zip(&components) {
        let printed: f64 = cell.parse().expect("te cells are always printed");
        let exact = te[j];
        let tol = 1e-3 * exact.abs().max(1e-12);
        assert!(
            (printed - exact).abs() <= tol,
            "CSV te {printed} vs JSON {exact} for component {j}"
        );
    }
}

#[test]
fn effects_zero_threshold_flag_prunes_paths() {
    let (dir, _) = fitted_dir(47);
    assert_ok(&run(
        &["effects", "--fit", "fit.json", "--format", "json", "--out", "all.json"],
        dir.path(),
    ));
    // A sky-high cutoff empties the active set but keeps the totals.
    assert_ok(&run(
        &[
            "effects", "--fit", "fit.json", "--format", "json", "--out", "none.json",
            "--zero-threshold", "1e9",
        ],
        dir.path(),
    ));
    let all: serde_json::Value = serde_json::from_str(&read(&dir.path().join("all.json"))).unwrap();
    let none: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("none.json"))).unwrap();
    assert!(!all["active_paths"].as_array().unwrap().is_empty());
    assert!(none["active_paths"].as_array().unwrap().is_empty());
    assert_eq!(all["ie_total"], none["ie_total"]);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[test]
fn simulate_single_rep_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = [
        "simulate", "--n", "60", "--r", "20", "--p", "10", "--n-reps", "1",
        "--seed", "7",
    ];
    let out = run(&args, dir.path());
    assert_ok(&out);
    let reps1 = read(&dir.path().join("replicates.csv"));
    let agg1 = read(&dir.path().join("aggregate.csv"));
    assert_eq!(reps1.lines().count(), 2, "header plus one replicate row");

    assert_ok(&run(&args, dir.path()));
    assert_eq!(reps1, read(&dir.path().join("replicates.csv")));
    assert_eq!(agg1, read(&dir.path().join("aggregate.csv")));
}

#[test]
fn simulate_accepts_wide_dimensions() {
    let dir = TempDir::new().unwrap();
    // More exposures than subjects and a wide mediator block; one ladder
    // point keeps the runtime down.
    let out = run(
        &[
            "simulate", "--n", "60", "--r", "350", "--p", "150", "--n-reps", "1",
            "--seed", "5", "--z-values", "4.0",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let agg = read(&dir.path().join("aggregate.csv"));
    assert_eq!(agg.lines().count(), 2);
}

#[test]
fn simulate_writes_per_n_tables() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &[
            "simulate", "--n", "50,60", "--r", "10", "--p", "6", "--n-reps", "1",
            "--seed", "3",
        ],
        dir.path(),
    );
    assert_ok(&out);
    assert!(dir.path().join("replicates_n50.csv").exists());
    assert!(dir.path().join("replicates_n60.csv").exists());
    let agg = read(&dir.path().join("aggregate.csv"));
    assert_eq!(agg.lines().count(), 3, "one aggregate row per sample size");
    assert!(agg.lines().nth(1).unwrap().starts_with("50,"));
    assert!(agg.lines().nth(2).unwrap().starts_with("60,"));
}

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = TempDir::new().unwrap();
    let spec = SimSpec {
        n: 50,
        r: 10,
        p: 4,
        seed: 48,
        ..SimSpec::default()
    };
    write_sim_csv(&spec, &dir.path().join("data.csv"));
    std::fs::write(
        dir.path().join("medpath.toml"),
        r#"
threads = 2

[pca]
input = "data.csv"
id = ["id"]
exposure = ["x*"]
mediator = ["m*"]
outcome = ["y"]
threshold = 0.9
scores_out = "from_config.csv"
"#,
    )
    .unwrap();

    // Config alone drives the run.
    let out = run(&["pca", "--config", "medpath.toml"], dir.path());
    assert_ok(&out);
    assert!(dir.path().join("from_config.csv").exists());

    // A CLI flag overrides the same config key.
    let out = run(
        &["pca", "--config", "medpath.toml", "--scores-out", "from_cli.csv"],
        dir.path(),
    );
    assert_ok(&out);
    assert!(dir.path().join("from_cli.csv").exists());
    assert_eq!(
        read(&dir.path().join("from_config.csv")),
        read(&dir.path().join("from_cli.csv")),
        "same analysis either way"
    );

    // Unknown keys are flagged, not silently dropped.
    std::fs::write(dir.path().join("typo.toml"), "[pca]\nthresold = 0.9\n").unwrap();
    assert_fails(&run(&["pca", "--config", "typo.toml"], dir.path()));
}

// ---------------------------------------------------------------------------
// failure modes
// ---------------------------------------------------------------------------

#[test]
fn bad_inputs_fail_with_context() {
    let dir = TempDir::new().unwrap();

    // Missing input file.
    let out = run(
        &["fit", "--input", "nope.csv", "--exposure", "x*", "--mediator", "m*", "--outcome", "y"],
        dir.path(),
    );
    assert_fails(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    // No roles at all.
    std::fs::write(dir.path().join("tiny.csv"), "a,b\n1,2\n3,4\n").unwrap();
    assert_fails(&run(&["pca", "--input", "tiny.csv"], dir.path()));

    // A column left without a role.
    assert_fails(&run(
        &["pca", "--input", "tiny.csv", "--exposure", "a", "--outcome", "b"],
        dir.path(),
    ));

    // Unknown grid strategy.
    assert_fails(&run(
        &["simulate", "--n", "50", "--grid", "bogus"],
        dir.path(),
    ));

    // Unknown BIC variant.
    assert_fails(&run(
        &["simulate", "--n", "50", "--bic", "bayes"],
        dir.path(),
    ));
}
