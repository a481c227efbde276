//! Binary-level contract tests beyond the acceptance checklist: input
//! sniffing, covariance handling, name alignment, and the error paths that
//! must distinguish bad input (exit 1) from mathematical rejection (exit 2).

use std::path::Path;
use std::process::Command;

use latentree::model::{Edge, Leaf, NodeRef, TreeModel};
use latentree::oracle::sample;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latentree"))
}

fn write_matrix(path: &Path, names: &[&str], rows: &[Vec<f64>]) {
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let entries = nalgebra::DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]);
    let file = std::fs::File::create(path).unwrap();
    latentree::io::write_matrix_csv(file, &names, &entries).unwrap();
}

fn two_star_model() -> TreeModel {
    let leaves = (0..4)
        .map(|i| Leaf::standard(format!("x{}", i + 1)))
        .collect();
    let edges = vec![
        Edge::new(NodeRef::Hidden(0), NodeRef::Leaf(0), 0.8),
        Edge::new(NodeRef::Hidden(0), NodeRef::Leaf(1), 0.8),
        Edge::new(NodeRef::Hidden(0), NodeRef::Hidden(1), 0.5),
        Edge::new(NodeRef::Hidden(1), NodeRef::Leaf(2), 0.8),
        Edge::new(NodeRef::Hidden(1), NodeRef::Leaf(3), 0.8),
    ];
    TreeModel::new(leaves, 2, edges, 0)
}

#[test]
fn version_and_help_exit_zero() {
    for flag in ["--version", "--help"] {
        let out = binary().arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{flag}: {out:?}");
    }
}

#[test]
fn build_from_samples_is_sniffed_and_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let samples_csv = dir.path().join("samples.csv");
    let samples = sample(&two_star_model(), 5_000, 99).unwrap();
    latentree::io::write_samples_csv(std::fs::File::create(&samples_csv).unwrap(), &samples)
        .unwrap();

    let model_json = dir.path().join("model.json");
    let out = binary()
        .args(["build"])
        .arg(&samples_csv)
        .arg("-o")
        .arg(&model_json)
        .args(["--tol", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("parsed 5000 observations of 4 variables"),
        "{stdout}"
    );

    // The estimated model must be close to the exact correlations.
    let exact_csv = dir.path().join("exact.csv");
    write_matrix(
        &exact_csv,
        &["x1", "x2", "x3", "x4"],
        &[
            vec![1.0, 0.64, 0.32, 0.32],
            vec![0.64, 1.0, 0.32, 0.32],
            vec![0.32, 0.32, 1.0, 0.64],
            vec![0.32, 0.32, 0.64, 1.0],
        ],
    );
    let out = binary()
        .args(["validate"])
        .arg(&model_json)
        .arg(&exact_csv)
        .args(["--tol", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
}

#[test]
fn build_reads_covariance_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cov_csv = dir.path().join("cov.csv");
    // Markov-chain correlations (0.5, 0.25, 0.5) scaled by variances 4, 2.25, 9.
    write_matrix(
        &cov_csv,
        &["x1", "x2", "x3"],
        &[
            vec![4.0, 1.5, 1.5],
            vec![1.5, 2.25, 2.25],
            vec![1.5, 2.25, 9.0],
        ],
    );
    let model_json = dir.path().join("model.json");
    let out = binary()
        .args(["build"])
        .arg(&cov_csv)
        .args(["--covariance"])
        .arg("-o")
        .arg(&model_json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("covariance matrix"), "{stdout}");
    assert!(stdout.contains("degenerate: yes"), "{stdout}");

    let model = latentree::io::read_model_json(std::fs::File::open(&model_json).unwrap()).unwrap();
    let variances: Vec<f64> = model.leaves().iter().map(|l| l.variance).collect();
    assert_eq!(variances, vec![4.0, 2.25, 9.0]);
}

#[test]
fn build_exact_three_leaf_star() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("star.csv");
    write_matrix(
        &csv,
        &["a", "b", "c"],
        &[
            vec![1.0, 0.48, 0.40],
            vec![0.48, 1.0, 0.30],
            vec![0.40, 0.30, 1.0],
        ],
    );
    let model_json = dir.path().join("model.json");
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(&model_json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("parsed 3 variables"), "{stdout}");
    assert!(stdout.contains("1 hidden nodes, 3 edges"), "{stdout}");
    assert!(stdout.contains("degenerate: no"), "{stdout}");

    let model = latentree::io::read_model_json(std::fs::File::open(&model_json).unwrap()).unwrap();
    let mut loadings: Vec<f64> = model.edges().iter().map(|e| e.correlation).collect();
    loadings.sort_by(f64::total_cmp);
    for (got, want) in loadings.iter().zip([0.5, 0.6, 0.8]) {
        assert!((got - want).abs() < 1e-12, "{loadings:?}");
    }
}

#[test]
fn validate_aligns_variables_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("star.csv");
    write_matrix(
        &csv,
        &["a", "b", "c"],
        &[
            vec![1.0, 0.48, 0.40],
            vec![0.48, 1.0, 0.30],
            vec![0.40, 0.30, 1.0],
        ],
    );
    let model_json = dir.path().join("model.json");
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(&model_json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // Same matrix with the variables listed in a different order.
    let permuted_csv = dir.path().join("permuted.csv");
    write_matrix(
        &permuted_csv,
        &["c", "a", "b"],
        &[
            vec![1.0, 0.40, 0.30],
            vec![0.40, 1.0, 0.48],
            vec![0.30, 0.48, 1.0],
        ],
    );
    let out = binary()
        .args(["validate"])
        .arg(&model_json)
        .arg(&permuted_csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // A genuinely different variable set is an input error, not a miss.
    let renamed_csv = dir.path().join("renamed.csv");
    write_matrix(
        &renamed_csv,
        &["a", "b", "zz"],
        &[
            vec![1.0, 0.48, 0.40],
            vec![0.48, 1.0, 0.30],
            vec![0.40, 0.30, 1.0],
        ],
    );
    let out = binary()
        .args(["validate"])
        .arg(&model_json)
        .arg(&renamed_csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn corrupted_model_documents_exit_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("star.csv");
    write_matrix(
        &csv,
        &["a", "b", "c"],
        &[
            vec![1.0, 0.48, 0.40],
            vec![0.48, 1.0, 0.30],
            vec![0.40, 0.30, 1.0],
        ],
    );
    let model_json = dir.path().join("model.json");
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(&model_json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // Push one edge correlation outside (-1, 1).
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_json).unwrap()).unwrap();
    doc["edges"][0]["correlation"] = serde_json::json!(3.0);
    let broken_json = dir.path().join("broken.json");
    std::fs::write(&broken_json, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

    let out = binary()
        .args(["simulate"])
        .arg(&broken_json)
        .args(["-n", "10"])
        .arg("-o")
        .arg(dir.path().join("unused.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("not a valid tree model"), "{stderr}");

    let out = binary()
        .args(["validate"])
        .arg(&broken_json)
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn simulate_rejects_zero_observations() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("star.csv");
    write_matrix(
        &csv,
        &["a", "b", "c"],
        &[
            vec![1.0, 0.48, 0.40],
            vec![0.48, 1.0, 0.30],
            vec![0.40, 0.30, 1.0],
        ],
    );
    let model_json = dir.path().join("model.json");
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(&model_json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let out = binary()
        .args(["simulate"])
        .arg(&model_json)
        .args(["-n", "0"])
        .arg("-o")
        .arg(dir.path().join("unused.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn malformed_matrix_cell_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("broken.csv");
    std::fs::write(&csv, ",a,b\na,1.0,oops\nb,0.5,1.0\n").unwrap();
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(dir.path().join("unused.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("oops"), "{stderr}");
}

#[test]
fn asymmetric_matrix_is_a_mathematical_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("asym.csv");
    write_matrix(
        &csv,
        &["a", "b", "c"],
        &[
            vec![1.0, 0.5, 0.4],
            vec![0.4, 1.0, 0.3],
            vec![0.4, 0.3, 1.0],
        ],
    );
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(dir.path().join("unused.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn single_observation_samples_are_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    std::fs::write(&csv, "a,b,c\n0.1,0.2,0.3\n").unwrap();
    let out = binary()
        .args(["build"])
        .arg(&csv)
        .arg("-o")
        .arg(dir.path().join("unused.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn check_star_rejects_bad_indices() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("star.csv");
    write_matrix(
        &csv,
        &["a", "b", "c"],
        &[
            vec![1.0, 0.48, 0.40],
            vec![0.48, 1.0, 0.30],
            vec![0.40, 0.30, 1.0],
        ],
    );
    let out = binary()
        .args(["check-star"])
        .arg(&csv)
        .args(["0", "0", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "duplicate indices: {out:?}");

    let out = binary()
        .args(["check-star"])
        .arg(&csv)
        .args(["0", "1", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "out-of-range index: {out:?}");
}
