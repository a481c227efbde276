//! Command-line front end: star checks, model reconstruction, sampling and
//! model-against-data validation.
//!
//! Exit codes: 0 success, 1 input or IO error (including usage errors),
//! 2 mathematical rejection — data that parses cleanly but does not admit a
//! latent tree, or a model that misses the comparison tolerance. Output is
//! line-oriented and stable for scripting.

use std::collections::HashSet;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::builder::{build_topology, consistency_check};
use crate::error::{Error, Result};
use crate::io::{
    matrix_to_correlations, read_matrix_csv, read_model_json, read_samples_csv, sniff_csv,
    write_model_json, write_samples_csv, CsvKind,
};
use crate::model::{CorrelationMatrix, Leaf, Tolerances};
use crate::oracle::{estimate_correlations, leaf_correlations, sample, sample_covariance};
use crate::params::assemble_tree_model;
use crate::star::{is_star_decomposable, solve_star_loadings, star_conditionals, StarVerdict};

#[derive(Parser, Debug)]
#[command(
    name = "latentree",
    version,
    about = "Reconstruct latent-variable Gaussian tree models from pairwise leaf correlations"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn default_eq_tol() -> f64 {
    Tolerances::default().eq_tol
}

fn default_dep_floor() -> f64 {
    Tolerances::default().dep_floor
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test whether three variables of a matrix admit a hidden common cause
    CheckStar {
        /// Matrix CSV file: names in the first row and first column
        input: PathBuf,
        /// 0-based index of the first variable
        i: usize,
        /// 0-based index of the second variable
        j: usize,
        /// 0-based index of the third variable
        k: usize,
        /// Interpret the matrix as covariances instead of correlations
        #[arg(long)]
        covariance: bool,
        /// Relative tolerance for equality tests
        #[arg(long, default_value_t = default_eq_tol())]
        tol: f64,
        /// Smallest usable correlation magnitude
        #[arg(long = "dep-floor", default_value_t = default_dep_floor())]
        dep_floor: f64,
    },
    /// Reconstruct a latent tree model from a matrix or sample CSV
    Build {
        /// Matrix CSV (named rows/columns) or samples CSV (header + rows)
        input: PathBuf,
        /// Where to write the model JSON
        #[arg(short, long)]
        output: PathBuf,
        /// Interpret a matrix input as covariances instead of correlations
        #[arg(long)]
        covariance: bool,
        /// Relative tolerance for equality tests
        #[arg(long, default_value_t = default_eq_tol())]
        tol: f64,
        /// Smallest usable correlation magnitude
        #[arg(long = "dep-floor", default_value_t = default_dep_floor())]
        dep_floor: f64,
    },
    /// Draw observations of the leaf variables from a model file
    Simulate {
        /// Model JSON file
        model: PathBuf,
        /// Number of observations to draw
        #[arg(short = 'n', long = "n-obs")]
        n_obs: usize,
        /// Random seed; a fixed seed reproduces the file exactly
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the samples CSV
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare a model's implied correlations against a matrix file
    Validate {
        /// Model JSON file
        model: PathBuf,
        /// Matrix CSV file with the same variable names
        matrix: PathBuf,
        /// Interpret the matrix as covariances instead of correlations
        #[arg(long)]
        covariance: bool,
        /// Maximum allowed |implied - given| entry discrepancy
        #[arg(long, default_value_t = default_eq_tol())]
        tol: f64,
        /// Smallest usable correlation magnitude
        #[arg(long = "dep-floor", default_value_t = default_dep_floor())]
        dep_floor: f64,
    },
}

/// Parse arguments from the process environment and run. Returns the exit
/// code; usage errors exit 1, --help and --version exit 0.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn tolerances(tol: f64, dep_floor: f64) -> Tolerances {
    Tolerances::default()
        .with_eq_tol(tol)
        .with_dep_floor(dep_floor)
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::CheckStar {
            input,
            i,
            j,
            k,
            covariance,
            tol,
            dep_floor,
        } => cmd_check_star(&input, [i, j, k], covariance, &tolerances(tol, dep_floor)),
        Command::Build {
            input,
            output,
            covariance,
            tol,
            dep_floor,
        } => cmd_build(&input, &output, covariance, &tolerances(tol, dep_floor)),
        Command::Simulate {
            model,
            n_obs,
            seed,
            output,
        } => cmd_simulate(&model, n_obs, seed, &output),
        Command::Validate {
            model,
            matrix,
            covariance,
            tol,
            dep_floor,
        } => cmd_validate(&model, &matrix, covariance, &tolerances(tol, dep_floor)),
    }
}

fn read_matrix_file(path: &Path, covariance: bool) -> Result<(Vec<Leaf>, CorrelationMatrix)> {
    let text = fs::read_to_string(path)?;
    let (names, entries) = read_matrix_csv(text.as_bytes())?;
    matrix_to_correlations(&names, entries, covariance)
}

/// Read a model file, mapping validation failures to exit code 1: a broken
/// model document is an input problem, not a mathematical rejection.
fn read_model_file(path: &Path) -> Result<std::result::Result<crate::model::TreeModel, i32>> {
    let file = fs::File::open(path)?;
    match read_model_json(BufReader::new(file)) {
        Ok(model) => Ok(Ok(model)),
        Err(Error::InvalidTree { report }) => {
            eprintln!("model file {} is not a valid tree model:", path.display());
            eprintln!("{report}");
            Ok(Err(1))
        }
        Err(e) => Err(e),
    }
}

fn cmd_check_star(
    input: &Path,
    indices: [usize; 3],
    covariance: bool,
    tol: &Tolerances,
) -> Result<i32> {
    let (leaves, rho) = read_matrix_file(input, covariance)?;
    for &idx in &indices {
        if idx >= rho.n() {
            return Err(Error::IndexOutOfRange {
                index: idx,
                len: rho.n(),
            });
        }
    }
    let [i, j, k] = indices;
    if i == j || i == k || j == k {
        return Err(Error::InvalidArgument(
            "the three variable indices must be distinct".into(),
        ));
    }
    let (r12, r13, r23) = (rho.get(i, j), rho.get(i, k), rho.get(j, k));
    println!(
        "triplet ({}, {}, {}): rho = ({}, {}, {})",
        leaves[i].name, leaves[j].name, leaves[k].name, r12, r13, r23
    );
    match is_star_decomposable(r12, r13, r23, tol)? {
        StarVerdict::Rejected(reason) => {
            println!("star-decomposable: no");
            println!("reason: {reason}");
            Ok(2)
        }
        StarVerdict::Decomposable => {
            let loadings = solve_star_loadings(r12, r13, r23, tol)?;
            let solution = star_conditionals(
                &loadings,
                [leaves[i].mean, leaves[j].mean, leaves[k].mean],
                [leaves[i].variance, leaves[j].variance, leaves[k].variance],
            )?;
            println!("star-decomposable: yes");
            for (slot, &idx) in indices.iter().enumerate() {
                println!(
                    "loading[{}] = {}",
                    leaves[idx].name, solution.loadings[slot]
                );
            }
            for (slot, &idx) in indices.iter().enumerate() {
                let lg = solution.leaf_conditionals[slot];
                println!(
                    "conditional[{} | center]: slope {}, intercept {}, noise-variance {}",
                    leaves[idx].name, lg.slope, lg.intercept, lg.noise_var
                );
            }
            if let Some(slot) = solution.degenerate_with_leaf {
                println!(
                    "note: the hidden center coincides with leaf '{}'",
                    leaves[indices[slot]].name
                );
            }
            Ok(0)
        }
    }
}

fn cmd_build(input: &Path, output: &Path, covariance: bool, tol: &Tolerances) -> Result<i32> {
    let text = fs::read_to_string(input)?;
    let (leaves, rho) = match sniff_csv(&text)? {
        CsvKind::Matrix => {
            let (names, entries) = read_matrix_csv(text.as_bytes())?;
            let parsed = matrix_to_correlations(&names, entries, covariance)?;
            println!(
                "parsed {} variables from {} ({} matrix)",
                parsed.1.n(),
                input.display(),
                if covariance {
                    "covariance"
                } else {
                    "correlation"
                }
            );
            parsed
        }
        CsvKind::Samples => {
            let samples = read_samples_csv(text.as_bytes())?;
            println!(
                "parsed {} observations of {} variables from {}",
                samples.n_obs(),
                samples.n_vars(),
                input.display()
            );
            let cov = sample_covariance(&samples)?;
            let rho = estimate_correlations(&samples)?;
            let leaves = samples
                .columns()
                .iter()
                .enumerate()
                .map(|(idx, name)| Leaf {
                    name: name.clone(),
                    mean: cov.mean(idx),
                    variance: cov.get(idx, idx),
                })
                .collect();
            (leaves, rho)
        }
    };
    let topo = build_topology(&rho, tol)?;
    let model = assemble_tree_model(&topo, &rho, &leaves, tol)?;
    let consistency = consistency_check(&topo, &rho, tol)?;
    println!(
        "topology: {} hidden nodes, {} edges",
        topo.hidden_count(),
        model.edges().len()
    );
    println!("consistency: {consistency}");
    println!(
        "degenerate: {}",
        if model.is_degenerate() { "yes" } else { "no" }
    );
    for note in model.notes() {
        println!("note: {note}");
    }
    write_model_json(BufWriter::new(fs::File::create(output)?), &model)?;
    println!("model written to {}", output.display());
    Ok(0)
}

fn cmd_simulate(model_path: &Path, n_obs: usize, seed: u64, output: &Path) -> Result<i32> {
    let model = match read_model_file(model_path)? {
        Ok(model) => model,
        Err(code) => return Ok(code),
    };
    if model.is_degenerate() {
        eprintln!(
            "warning: model is degenerate (zero-noise edge); some sampled leaves are exact \
             linear functions of others"
        );
    }
    let samples = sample(&model, n_obs, seed)?;
    write_samples_csv(BufWriter::new(fs::File::create(output)?), &samples)?;
    println!(
        "wrote {} observations of {} variables to {}",
        samples.n_obs(),
        samples.n_vars(),
        output.display()
    );
    Ok(0)
}

fn cmd_validate(
    model_path: &Path,
    matrix_path: &Path,
    covariance: bool,
    tol: &Tolerances,
) -> Result<i32> {
    let model = match read_model_file(model_path)? {
        Ok(model) => model,
        Err(code) => return Ok(code),
    };
    let (matrix_leaves, given) = read_matrix_file(matrix_path, covariance)?;
    let matrix_names: Vec<&str> = matrix_leaves.iter().map(|l| l.name.as_str()).collect();
    if matrix_names.iter().collect::<HashSet<_>>().len() != matrix_names.len() {
        return Err(Error::LeafSetMismatch {
            detail: "matrix file repeats a variable name".into(),
        });
    }
    if matrix_names.len() != model.n_leaves() {
        return Err(Error::LeafSetMismatch {
            detail: format!(
                "model has {} leaves, matrix has {} variables",
                model.n_leaves(),
                matrix_names.len()
            ),
        });
    }
    // Reorder the matrix into the model's leaf order by name.
    let perm: Vec<usize> = model
        .leaves()
        .iter()
        .map(|leaf| {
            matrix_names
                .iter()
                .position(|&n| n == leaf.name)
                .ok_or_else(|| Error::LeafSetMismatch {
                    detail: format!("matrix lacks variable '{}'", leaf.name),
                })
        })
        .collect::<Result<_>>()?;
    let given = given.submatrix(&perm)?;
    let implied = leaf_correlations(&model)?;
    let discrepancy = implied.max_abs_diff(&given)?;
    let n = implied.n();
    println!(
        "max |implied - given| = {:e} over {} entries",
        discrepancy,
        n * (n - 1) / 2
    );
    let within = discrepancy <= tol.eq_tol;
    println!(
        "within tolerance {:e}: {}",
        tol.eq_tol,
        if within { "yes" } else { "no" }
    );
    Ok(if within { 0 } else { 2 })
}
