//! End-to-end tests of the `elens` binary: exit codes, determinism,
//! metadata, and file behavior.

use std::process::{Command, Output};

use elens_cli::formats;

fn elens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elens"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn sample_is_deterministic_per_seed() {
    let args = [
        "sample",
        "--generate-gaussian",
        "25",
        "2",
        "--kernel",
        "distance",
        "--beta",
        "1",
        "--gamma",
        "0.4",
        "--draws",
        "20",
        "--seed",
        "11",
    ];
    let a = elens(&args);
    let b = elens(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    // A different seed changes the draws.
    let mut changed = args.to_vec();
    let last = changed.len() - 1;
    changed[last] = "12";
    let c = elens(&changed);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sample_metadata_records_seed_and_rng() {
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "15",
        "2",
        "--gamma",
        "0.5",
        "--draws",
        "3",
        "--seed",
        "99",
    ]);
    assert!(out.status.success());
    let first = stdout(&out).lines().next().unwrap().to_string();
    let meta: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(meta["seed"], 99);
    assert_eq!(meta["rng"], "chacha12");
    assert_eq!(meta["kernel"], "distance");
    assert!(meta["gamma"].is_number());
}

#[test]
fn fixed_size_draws_have_exactly_that_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.jsonl");
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "20",
        "2",
        "--beta",
        "3",
        "--gamma",
        "0.2",
        "--fixed-size",
        "3",
        "--draws",
        "25",
        "--seed",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (meta, samples) = formats::read_samples(&path).unwrap();
    assert_eq!(meta.mode, "fixed:3");
    assert_eq!(samples.len(), 25);
    for s in &samples {
        assert_eq!(s.len(), 3);
    }
}

#[test]
fn fixed_size_at_p_is_deterministic_size() {
    // β = 3 in the plane has p = 3 obligatory features.
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "12",
        "2",
        "--beta",
        "3",
        "--gamma",
        "0.3",
        "--fixed-size",
        "3",
        "--draws",
        "10",
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    for line in stdout(&out).lines().skip(1) {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["indices"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn target_size_calibration_lands_on_target() {
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "200",
        "2",
        "--kernel",
        "distance",
        "--beta",
        "1",
        "--target-size",
        "28",
        "--draws",
        "5",
        "--seed",
        "42",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    let expected = meta["expected_size"].as_f64().unwrap();
    assert!((expected - 28.0).abs() < 1e-5, "calibrated to {expected}");
}

#[test]
fn sample_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.csv");
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "15",
        "2",
        "--gamma",
        "0.4",
        "--draws",
        "8",
        "--seed",
        "21",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (meta, samples) = formats::read_samples(&path).unwrap();
    assert_eq!(meta.draws, 8);
    assert_eq!(samples.len(), 8);
}

#[test]
fn gibbs_sampler_runs_and_records() {
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "15",
        "2",
        "--gamma",
        "0.4",
        "--sampler",
        "gibbs",
        "--burn-in",
        "50",
        "--thin",
        "2",
        "--draws",
        "30",
        "--seed",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let meta: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(meta["sampler"], "gibbs");
    assert_eq!(meta["burn_in"], 50);
    assert_eq!(meta["thin"], 2);
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn lowrank_requires_psd_kernel() {
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "15",
        "2",
        "--kernel",
        "distance",
        "--gamma",
        "0.4",
        "--sampler",
        "lowrank",
        "--draws",
        "3",
        "--seed",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "15",
        "2",
        "--kernel",
        "gaussian",
        "--lengthscale",
        "0.7",
        "--gamma",
        "1.5",
        "--sampler",
        "lowrank",
        "--draws",
        "5",
        "--seed",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn even_beta_is_a_model_error() {
    let out = elens(&[
        "sample",
        "--generate-gaussian",
        "10",
        "2",
        "--beta",
        "2",
        "--gamma",
        "1",
        "--draws",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even integer"));
}

#[test]
fn missing_ground_set_is_a_config_error() {
    let out = elens(&["sample", "--draws", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn size_dist_sums_to_one_and_zero_below_p() {
    let out = elens(&[
        "size-dist",
        "--generate-gaussian",
        "14",
        "2",
        "--beta",
        "3",
        "--gamma",
        "0.5",
        "--seed",
        "6",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut total = 0.0f64;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let (m, prob) = line.split_once(',').unwrap();
        let prob: f64 = prob.parse().unwrap();
        rows.push((m.parse::<usize>().unwrap(), prob));
        total += prob;
    }
    assert!((total - 1.0).abs() < 1e-10, "total {total}");
    // β = 3 in the plane: p = 3, so sizes 0..2 are impossible.
    for &(m, prob) in rows.iter().take(3) {
        assert_eq!(prob, 0.0, "size {m}");
    }
    assert_eq!(rows.len(), 15);
}

#[test]
fn repulsion_anchor_row_is_one() {
    let out = elens(&[
        "repulsion",
        "--generate-gaussian",
        "12",
        "2",
        "--beta",
        "1",
        "--gamma",
        "0.5",
        "--seed",
        "9",
        "--anchor",
        "4",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut seen_anchor = false;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "4");
        if fields[1] == "4" {
            let rho: f64 = fields[3].parse().unwrap();
            assert!((rho - 1.0).abs() < 1e-12);
            seen_anchor = true;
        }
    }
    assert!(seen_anchor);
}

#[test]
fn forest_two_node_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.txt");
    std::fs::write(&graph, "0 1\n").unwrap();
    let path = dir.path().join("roots.jsonl");
    let out = elens(&[
        "forest",
        "--graph",
        graph.to_str().unwrap(),
        "--q",
        "1",
        "--draws",
        "9000",
        "--seed",
        "13",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expected root count"), "{stderr}");
    let (meta, samples) = formats::read_samples(&path).unwrap();
    assert_eq!(meta.kind, "elens-forest-roots");
    // Eigenvalues of the root kernel are {1, 1/3}: each of the three
    // possible root sets has probability 1/3. Check within 3 sigma.
    let draws = samples.len() as f64;
    let mut counts = [0usize; 3];
    for s in &samples {
        assert!(!s.is_empty());
        match s.indices() {
            [0] => counts[0] += 1,
            [1] => counts[1] += 1,
            [0, 1] => counts[2] += 1,
            other => panic!("unexpected root set {other:?}"),
        }
    }
    let sigma = ((1.0 / 3.0) * (2.0 / 3.0) / draws).sqrt();
    for c in counts {
        let freq = c as f64 / draws;
        assert!((freq - 1.0 / 3.0).abs() < 3.0 * sigma, "freq {freq}");
    }
}

#[test]
fn forest_rejects_disconnected_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.txt");
    std::fs::write(&graph, "0 1\n2 3\n").unwrap();
    let out = elens(&[
        "forest",
        "--graph",
        graph.to_str().unwrap(),
        "--draws",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disconnected"));
}

#[test]
fn verify_subset_is_deterministic_and_passes() {
    let args = [
        "verify",
        "--seed",
        "77",
        "--only",
        "cauchy-binet",
        "--only",
        "normalization",
    ];
    let a = elens(&args);
    assert!(a.status.success(), "{}", stdout(&a));
    let b = elens(&args);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("PASS cauchy-binet"));
    assert!(stdout(&a).contains("all checks passed"));
}

#[test]
fn verify_unknown_check_is_config_error() {
    let out = elens(&["verify", "--only", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_injected_asymmetry_exits_three() {
    let out = elens(&["verify", "--inject-asymmetric"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("validation rejected"));
}

#[test]
fn points_written_by_hand_can_seed_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    std::fs::write(&path, "x1,x2\n0.0,0.0\n1.0,0.0\n0.0,1.0\n1.5,1.5\n").unwrap();
    let out = elens(&[
        "sample",
        "--points",
        path.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--draws",
        "4",
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    assert_eq!(meta["n"], 4);
}
