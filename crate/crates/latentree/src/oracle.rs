//! Forward model and estimation: exact implied leaf correlations computed two
//! independent ways, ancestral sampling, and sample correlation estimation.
//!
//! The two forward routes — multiplying edge correlations along tree paths
//! versus assembling the full joint covariance from the directed
//! factorization and marginalizing — must agree to near machine precision;
//! that agreement is the backbone consistency check for everything else in
//! the crate.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{CorrelationMatrix, CovarianceMatrix, NodeRef, Tolerances, TreeModel};

/// Observations of the leaf variables: one row per observation, columns
/// bound to leaf names.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    columns: Vec<String>,
    values: DMatrix<f64>,
}

impl SampleMatrix {
    pub fn new(columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: values.ncols(),
            });
        }
        if values.nrows() < 1 {
            return Err(Error::InvalidArgument(
                "sample matrix needs at least one observation".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sample matrix contains non-finite entries".into(),
            ));
        }
        Ok(SampleMatrix { columns, values })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, obs: usize, var: usize) -> f64 {
        self.values[(obs, var)]
    }
}

/// Joint covariance over all leaf and hidden variables, with a flag marking
/// singular (degenerate) models that contain a zero-noise edge.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    pub matrix: CovarianceMatrix,
    pub singular: bool,
}

fn require_valid(t: &TreeModel) -> Result<()> {
    let report = t.validate(&Tolerances::default());
    if report.passed() {
        Ok(())
    } else {
        Err(Error::InvalidTree { report })
    }
}

/// Index of a node in the joint ordering: leaves first, then hidden nodes.
fn joint_index(t: &TreeModel, node: NodeRef) -> usize {
    match node {
        NodeRef::Leaf(i) => i,
        NodeRef::Hidden(h) => t.n_leaves() + h,
    }
}

/// Implied correlation between every pair of leaves: the product of edge
/// correlations along the unique connecting path.
pub fn leaf_correlations(t: &TreeModel) -> Result<CorrelationMatrix> {
    require_valid(t)?;
    let n = t.n_leaves();
    let mut entries = DMatrix::identity(n, n);
    for i in 0..n {
        // BFS from leaf i carrying the running path product.
        let start = NodeRef::Leaf(i);
        let mut visited = std::collections::HashSet::from([start]);
        let mut queue = std::collections::VecDeque::from([(start, 1.0f64)]);
        while let Some((node, product)) = queue.pop_front() {
            for edge in t.edges() {
                if let Some(next) = edge.other(node) {
                    if visited.insert(next) {
                        let p = product * edge.correlation;
                        if let NodeRef::Leaf(j) = next {
                            if j > i {
                                entries[(i, j)] = p;
                                entries[(j, i)] = p;
                            }
                        }
                        queue.push_back((next, p));
                    }
                }
            }
        }
    }
    CorrelationMatrix::from_matrix(entries)
}

/// Full covariance over the n + m variables, assembled root-down from the
/// directed linear-Gaussian factorization: cov(child, v) = slope * cov(parent, v)
/// for previously placed v, var(child) = slope^2 var(parent) + noise.
///
/// Degenerate models (an edge with |rho| = 1) yield a positive-semidefinite
/// but singular matrix; this is reported via the `singular` flag rather than
/// an error.
pub fn joint_covariance(t: &TreeModel) -> Result<JointCovariance> {
    require_valid(t)?;
    let total = t.node_count();
    let mut cov = DMatrix::zeros(total, total);
    let mut means = vec![0.0f64; total];

    let root = joint_index(t, t.root());
    cov[(root, root)] = 1.0;
    let mut placed = vec![root];
    let mut singular = false;

    for (parent, child) in t.traversal_from_root() {
        let lg = t
            .conditional(parent, child)
            .expect("traversal pairs share an edge");
        if lg.noise_var == 0.0 {
            singular = true;
        }
        let ci = joint_index(t, child);
        let pi = joint_index(t, parent);
        means[ci] = lg.intercept + lg.slope * means[pi];
        for &v in &placed {
            let value = lg.slope * cov[(pi, v)];
            cov[(ci, v)] = value;
            cov[(v, ci)] = value;
        }
        cov[(ci, ci)] = lg.slope * lg.slope * cov[(pi, pi)] + lg.noise_var;
        placed.push(ci);
    }

    Ok(JointCovariance {
        matrix: CovarianceMatrix::from_parts(means, cov)?,
        singular,
    })
}

/// Marginal covariance over a subset of variables; for Gaussians this is
/// submatrix selection.
pub fn marginal_leaf_block(c: &CovarianceMatrix, indices: &[usize]) -> Result<CovarianceMatrix> {
    c.marginal(indices)
}

/// Ancestral sampling: draw the root, then each child given its parent,
/// walking away from the root. Only leaf columns are returned. Deterministic
/// for a fixed seed.
pub fn sample(t: &TreeModel, n_obs: usize, seed: u64) -> Result<SampleMatrix> {
    require_valid(t)?;
    if n_obs < 1 {
        return Err(Error::InvalidArgument("n_obs must be at least 1".into()));
    }

    let order = t.traversal_from_root();
    let conditionals: Vec<(usize, usize, crate::model::LinearGaussian)> = order
        .iter()
        .map(|&(parent, child)| {
            let lg = t.conditional(parent, child).expect("edge exists");
            (joint_index(t, parent), joint_index(t, child), lg)
        })
        .collect();

    let n = t.n_leaves();
    let total = t.node_count();
    let root = joint_index(t, t.root());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(n_obs, n);
    let mut node_values = vec![0.0f64; total];

    for obs in 0..n_obs {
        node_values[root] = rng.sample(StandardNormal);
        for &(pi, ci, lg) in &conditionals {
            let noise: f64 = if lg.noise_var > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                z * lg.noise_var.sqrt()
            } else {
                0.0
            };
            node_values[ci] = lg.intercept + lg.slope * node_values[pi] + noise;
        }
        for leaf in 0..n {
            values[(obs, leaf)] = node_values[leaf];
        }
    }

    let columns = t.leaves().iter().map(|l| l.name.clone()).collect();
    SampleMatrix::new(columns, values)
}

/// Sample correlation matrix: covariance with divisor n_obs - 1, converted
/// to correlations and clamped into [-1, 1].
pub fn estimate_correlations(s: &SampleMatrix) -> Result<CorrelationMatrix> {
    let n_obs = s.n_obs();
    if n_obs < 2 {
        return Err(Error::InvalidArgument(
            "correlation estimation needs at least 2 observations".into(),
        ));
    }
    let cov = sample_covariance(s)?;
    let corr = cov.to_correlation()?;
    let n = corr.n();
    let clamped = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            corr.get(i, j).clamp(-1.0, 1.0)
        }
    });
    CorrelationMatrix::from_matrix(clamped)
}

/// Sample covariance with the unbiased n - 1 divisor.
pub fn sample_covariance(s: &SampleMatrix) -> Result<CovarianceMatrix> {
    let n_obs = s.n_obs();
    if n_obs < 2 {
        return Err(Error::InvalidArgument(
            "covariance estimation needs at least 2 observations".into(),
        ));
    }
    let p = s.n_vars();
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n_obs).map(|i| s.get(i, j)).sum::<f64>() / n_obs as f64)
        .collect();
    let mut cov = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut acc = 0.0;
            for i in 0..n_obs {
                acc += (s.get(i, a) - means[a]) * (s.get(i, b) - means[b]);
            }
            let value = acc / (n_obs - 1) as f64;
            cov[(a, b)] = value;
            cov[(b, a)] = value;
        }
    }
    for j in 0..p {
        if cov[(j, j)] <= 0.0 {
            return Err(Error::DegenerateVariable { index: j });
        }
    }
    CovarianceMatrix::from_parts(means, cov)
}
