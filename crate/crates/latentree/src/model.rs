//! Domain types shared by all modules: correlation/covariance matrices,
//! linear-Gaussian edge conditionals, latent tree models, and validity
//! checking for each.
//!
//! Conventions used throughout the crate:
//! - leaves are indexed `0..n`, hidden nodes `0..m`; a [`NodeRef`] tags which
//!   space an index lives in;
//! - every hidden variable is standardized (mean 0, variance 1), which pins
//!   the otherwise unidentifiable latent scale and location;
//! - edges are undirected and carry a single edge correlation; directed
//!   conditionals are derived on demand from a chosen root and do not change
//!   the joint distribution.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Numerical thresholds used by validity checks and equality tests.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative tolerance for cross-product equality tests.
    pub eq_tol: f64,
    /// Eigenvalue floor for positive-semidefiniteness, relative to the
    /// largest eigenvalue.
    pub psd_tol: f64,
    /// Minimum |correlation| treated as a genuine dependency.
    pub dep_floor: f64,
    /// Margin below 1 for a loading magnitude before the star is declared
    /// degenerate (the center coincides with a leaf).
    pub unit_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq_tol: 1e-6,
            psd_tol: 1e-10,
            dep_floor: 1e-3,
            unit_tol: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn with_eq_tol(mut self, eq_tol: f64) -> Self {
        self.eq_tol = eq_tol;
        self
    }

    pub fn with_dep_floor(mut self, dep_floor: f64) -> Self {
        self.dep_floor = dep_floor;
        self
    }
}

// ---------------------------------------------------------------------------
// Correlation and covariance matrices
// ---------------------------------------------------------------------------

/// Symmetric unit-diagonal matrix of pairwise correlations among observed
/// variables. The sole input to structure learning.
///
/// Construction only enforces squareness; the statistical invariants
/// (symmetry, unit diagonal, range, positive semidefiniteness, dependency
/// floor) are checked by [`validate_correlation_matrix`] so that suspect
/// matrices can be inspected rather than rejected at the door.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NonSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        Ok(CorrelationMatrix { entries })
    }

    /// Build from row slices. All rows must have length equal to the row count.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(CorrelationMatrix { entries })
    }

    /// Symmetric 3x3 matrix from the three off-diagonal correlations.
    pub fn from_triplet(r12: f64, r13: f64, r23: f64) -> Self {
        let entries = DMatrix::from_row_slice(3, 3, &[1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0]);
        CorrelationMatrix { entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Submatrix over the given variable indices, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<CorrelationMatrix> {
        check_indices(indices, self.n())?;
        let k = indices.len();
        let entries = DMatrix::from_fn(k, k, |i, j| self.get(indices[i], indices[j]));
        Ok(CorrelationMatrix { entries })
    }

    /// Largest absolute entrywise difference against another matrix.
    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: other.n(),
            });
        }
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for j in 0..self.n() {
                worst = worst.max((self.get(i, j) - other.get(i, j)).abs());
            }
        }
        Ok(worst)
    }
}

/// Covariance matrix with per-variable means. Entries carry the product of
/// the two variables' units; the diagonal must be strictly positive for the
/// matrix to convert to correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    means: Vec<f64>,
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn from_parts(means: Vec<f64>, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NonSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if means.len() != entries.nrows() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: means.len(),
            });
        }
        Ok(CovarianceMatrix { means, entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Convert to a correlation matrix: rho_ij = sigma_ij / sqrt(sigma_ii sigma_jj),
    /// with the diagonal set to exactly 1.
    pub fn to_correlation(&self) -> Result<CorrelationMatrix> {
        let n = self.n();
        for i in 0..n {
            if self.get(i, i) <= 0.0 {
                return Err(Error::DegenerateVariable { index: i });
            }
        }
        let sd: Vec<f64> = (0..n).map(|i| self.get(i, i).sqrt()).collect();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                self.get(i, j) / (sd[i] * sd[j])
            }
        });
        Ok(CorrelationMatrix { entries })
    }

    /// Marginal over a subset of variables: the Gaussian marginal is just the
    /// selected submatrix and sub-vector of means.
    pub fn marginal(&self, indices: &[usize]) -> Result<CovarianceMatrix> {
        check_indices(indices, self.n())?;
        let k = indices.len();
        let entries = DMatrix::from_fn(k, k, |i, j| self.get(indices[i], indices[j]));
        let means = indices.iter().map(|&i| self.means[i]).collect();
        Ok(CovarianceMatrix { means, entries })
    }
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if seen[i] {
            return Err(Error::DuplicateIndex { index: i });
        }
        seen[i] = true;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Correlation-matrix validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationViolation {
    Asymmetric {
        i: usize,
        j: usize,
        upper: f64,
        lower: f64,
    },
    DiagonalNotUnit {
        i: usize,
        value: f64,
    },
    OutOfRange {
        i: usize,
        j: usize,
        value: f64,
    },
    NotPositiveSemidefinite {
        min_eigenvalue: f64,
        floor: f64,
    },
    BelowDependencyFloor {
        i: usize,
        j: usize,
        value: f64,
        floor: f64,
    },
}

impl fmt::Display for CorrelationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationViolation::Asymmetric { i, j, upper, lower } => {
                write!(f, "asymmetric: ({i},{j}) = {upper} but ({j},{i}) = {lower}")
            }
            CorrelationViolation::DiagonalNotUnit { i, value } => {
                write!(f, "diagonal ({i},{i}) = {value}, expected 1")
            }
            CorrelationViolation::OutOfRange { i, j, value } => {
                write!(f, "entry ({i},{j}) = {value} outside [-1, 1]")
            }
            CorrelationViolation::NotPositiveSemidefinite {
                min_eigenvalue,
                floor,
            } => {
                write!(
                    f,
                    "not positive semidefinite: smallest eigenvalue {min_eigenvalue} below floor {floor}"
                )
            }
            CorrelationViolation::BelowDependencyFloor { i, j, value, floor } => {
                write!(
                    f,
                    "entry ({i},{j}) = {value} below the dependency floor {floor}"
                )
            }
        }
    }
}

/// Pass/fail report for the correlation-matrix invariants.
#[derive(Debug, Clone, Default)]
pub struct CorrelationReport {
    pub violations: Vec<CorrelationViolation>,
}

impl CorrelationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for CorrelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "ok")
        } else {
            for (k, v) in self.violations.iter().enumerate() {
                if k > 0 {
                    writeln!(f)?;
                }
                write!(f, "- {v}")?;
            }
            Ok(())
        }
    }
}

/// Check symmetry, unit diagonal, entry range, positive semidefiniteness and
/// the dependency floor. Report-style: all violations are collected.
pub fn validate_correlation_matrix(m: &CorrelationMatrix, tol: &Tolerances) -> CorrelationReport {
    let n = m.n();
    let mut violations = Vec::new();

    for i in 0..n {
        let d = m.get(i, i);
        if (d - 1.0).abs() > 1e-12 {
            violations.push(CorrelationViolation::DiagonalNotUnit { i, value: d });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let upper = m.get(i, j);
            let lower = m.get(j, i);
            if (upper - lower).abs() > 1e-12 {
                violations.push(CorrelationViolation::Asymmetric { i, j, upper, lower });
            }
            if upper.abs() > 1.0 {
                violations.push(CorrelationViolation::OutOfRange { i, j, value: upper });
            }
            if upper.abs() < tol.dep_floor {
                violations.push(CorrelationViolation::BelowDependencyFloor {
                    i,
                    j,
                    value: upper,
                    floor: tol.dep_floor,
                });
            }
        }
    }

    // Eigenvalues of the symmetrized matrix; the floor scales with the
    // largest eigenvalue so sample estimates with tiny negative modes pass.
    if n > 0 {
        let sym = (m.entries() + m.entries().transpose()) * 0.5;
        let eigs = sym.symmetric_eigenvalues();
        let max_eig = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let floor = -tol.psd_tol * max_eig.max(1.0);
        if min_eig < floor {
            violations.push(CorrelationViolation::NotPositiveSemidefinite {
                min_eigenvalue: min_eig,
                floor,
            });
        }
    }

    CorrelationReport { violations }
}

// ---------------------------------------------------------------------------
// Quartet classes
// ---------------------------------------------------------------------------

/// The sibling pairing a 4-tuple of leaves exhibits in a tree, named by
/// 1-based positions within the tuple: `Pair12_34` means the first and
/// second leaves hang off one internal node, the third and fourth off
/// another. `Degenerate` means all four share a single hidden neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuartetClass {
    Pair12_34,
    Pair13_24,
    Pair14_23,
    Degenerate,
}

impl QuartetClass {
    /// The two sibling pairs as 0-based positions, or `None` when degenerate.
    pub fn sibling_pairs(&self) -> Option<[[usize; 2]; 2]> {
        match self {
            QuartetClass::Pair12_34 => Some([[0, 1], [2, 3]]),
            QuartetClass::Pair13_24 => Some([[0, 2], [1, 3]]),
            QuartetClass::Pair14_23 => Some([[0, 3], [1, 2]]),
            QuartetClass::Degenerate => None,
        }
    }

    /// Position (1, 2 or 3) paired with position 0, or `None` when degenerate.
    pub fn partner_of_first(&self) -> Option<usize> {
        self.sibling_pairs().map(|p| p[0][1])
    }

    /// Class whose first position pairs with `partner` (1, 2 or 3).
    pub fn pairing_first_with(partner: usize) -> QuartetClass {
        match partner {
            1 => QuartetClass::Pair12_34,
            2 => QuartetClass::Pair13_24,
            3 => QuartetClass::Pair14_23,
            _ => panic!("partner must be 1, 2 or 3"),
        }
    }
}

impl fmt::Display for QuartetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuartetClass::Pair12_34 => write!(f, "12|34"),
            QuartetClass::Pair13_24 => write!(f, "13|24"),
            QuartetClass::Pair14_23 => write!(f, "14|23"),
            QuartetClass::Degenerate => write!(f, "degenerate"),
        }
    }
}

// ---------------------------------------------------------------------------
// Linear-Gaussian conditionals
// ---------------------------------------------------------------------------

/// One directed edge conditional: child = intercept + slope * parent + noise,
/// with noise ~ N(0, noise_var).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussian {
    pub slope: f64,
    pub intercept: f64,
    pub noise_var: f64,
}

impl LinearGaussian {
    pub fn new(slope: f64, intercept: f64, noise_var: f64) -> Self {
        LinearGaussian {
            slope,
            intercept,
            noise_var,
        }
    }

    /// Collapse a two-step chain: `self` conditions x on m, `inner` conditions
    /// m on p; the result conditions x on p after integrating m out.
    pub fn compose(&self, inner: &LinearGaussian) -> LinearGaussian {
        LinearGaussian {
            slope: self.slope * inner.slope,
            intercept: self.intercept + self.slope * inner.intercept,
            noise_var: self.noise_var + self.slope * self.slope * inner.noise_var,
        }
    }
}

// ---------------------------------------------------------------------------
// Tree model
// ---------------------------------------------------------------------------

/// Reference to a node in a latent tree: an observed leaf or a hidden
/// internal variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Leaf(usize),
    Hidden(usize),
}

impl NodeRef {
    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeRef::Leaf(_))
    }

    pub fn is_hidden(&self) -> bool {
        matches!(self, NodeRef::Hidden(_))
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Leaf(i) => write!(f, "leaf[{i}]"),
            NodeRef::Hidden(i) => write!(f, "hidden[{i}]"),
        }
    }
}

/// An observed variable: name plus marginal mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
}

impl Leaf {
    pub fn standard(name: impl Into<String>) -> Self {
        Leaf {
            name: name.into(),
            mean: 0.0,
            variance: 1.0,
        }
    }
}

/// Undirected edge carrying the correlation between its endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: NodeRef,
    pub b: NodeRef,
    pub correlation: f64,
}

impl Edge {
    pub fn new(a: NodeRef, b: NodeRef, correlation: f64) -> Self {
        Edge { a, b, correlation }
    }

    pub fn other(&self, node: NodeRef) -> Option<NodeRef> {
        if self.a == node {
            Some(self.b)
        } else if self.b == node {
            Some(self.a)
        } else {
            None
        }
    }
}

/// Full latent Gaussian tree: observed leaves with their marginal moments,
/// standardized hidden nodes, and undirected edges carrying correlations.
///
/// `degenerate` marks models containing an edge with |correlation| = 1
/// (a hidden center coinciding with a leaf); such models are usable for
/// sampling but their joint covariance is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    leaves: Vec<Leaf>,
    hidden_count: usize,
    edges: Vec<Edge>,
    root: usize,
    degenerate: bool,
    notes: Vec<String>,
}

impl TreeModel {
    pub fn new(leaves: Vec<Leaf>, hidden_count: usize, edges: Vec<Edge>, root: usize) -> Self {
        TreeModel {
            leaves,
            hidden_count,
            edges,
            root,
            degenerate: false,
            notes: Vec::new(),
        }
    }

    /// Single hidden center with one leaf per loading. Leaves are standard
    /// (mean 0, variance 1) unless customized afterwards.
    pub fn star(loadings: &[f64]) -> Self {
        let leaves = (0..loadings.len())
            .map(|i| Leaf::standard(format!("x{}", i + 1)))
            .collect();
        let edges = loadings
            .iter()
            .enumerate()
            .map(|(i, &r)| Edge::new(NodeRef::Hidden(0), NodeRef::Leaf(i), r))
            .collect();
        TreeModel::new(leaves, 1, edges, 0)
    }

    pub fn with_degenerate(mut self, degenerate: bool) -> Self {
        self.degenerate = degenerate;
        self
    }

    pub fn push_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_count
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaf(&self, i: usize) -> &Leaf {
        &self.leaves[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> NodeRef {
        NodeRef::Hidden(self.root)
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn node_count(&self) -> usize {
        self.leaves.len() + self.hidden_count
    }

    /// Neighbors of a node in edge order (deterministic).
    pub fn neighbors(&self, node: NodeRef) -> Vec<NodeRef> {
        self.edges.iter().filter_map(|e| e.other(node)).collect()
    }

    pub fn edge_correlation(&self, a: NodeRef, b: NodeRef) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.correlation)
    }

    fn node_moments(&self, node: NodeRef) -> (f64, f64) {
        match node {
            NodeRef::Leaf(i) => (self.leaves[i].mean, self.leaves[i].variance),
            NodeRef::Hidden(_) => (0.0, 1.0),
        }
    }

    /// Directed conditional of `child` given `parent` along their shared
    /// edge: slope = rho * sd(child)/sd(parent), noise = var(child)(1-rho^2).
    pub fn conditional(&self, parent: NodeRef, child: NodeRef) -> Option<LinearGaussian> {
        let rho = self.edge_correlation(parent, child)?;
        let (mu_p, var_p) = self.node_moments(parent);
        let (mu_c, var_c) = self.node_moments(child);
        let slope = rho * (var_c / var_p).sqrt();
        let intercept = mu_c - slope * mu_p;
        let noise_var = (var_c * (1.0 - rho * rho)).max(0.0);
        Some(LinearGaussian {
            slope,
            intercept,
            noise_var,
        })
    }

    /// Breadth-first (parent, child) pairs walking away from the root;
    /// every node except the root appears exactly once as a child.
    pub fn traversal_from_root(&self) -> Vec<(NodeRef, NodeRef)> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let root = self.root();
        visited.insert(root);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            for next in self.neighbors(node) {
                if visited.insert(next) {
                    order.push((node, next));
                    queue.push_back(next);
                }
            }
        }
        order
    }

    /// Rewrite hidden-node signs into the canonical gauge: the path
    /// correlation from every hidden node to leaf 0 is positive. Equivalent
    /// formulation: all hidden-hidden edges positive and leaf 0's edge
    /// positive. Leaf correlations are unchanged.
    pub fn canonical_gauge(&self) -> TreeModel {
        let mut flips = vec![1.0f64; self.hidden_count];
        // Walk from leaf 0, tracking the running path sign to each hidden node.
        let start = NodeRef::Leaf(0);
        let mut visited = std::collections::HashSet::from([start]);
        let mut queue = std::collections::VecDeque::from([(start, 1.0f64)]);
        while let Some((node, sign)) = queue.pop_front() {
            for edge in &self.edges {
                if let Some(next) = edge.other(node) {
                    if visited.insert(next) {
                        let s = sign * edge.correlation.signum();
                        if let NodeRef::Hidden(h) = next {
                            flips[h] = s;
                        }
                        queue.push_back((next, s));
                    }
                }
            }
        }
        let node_flip = |node: NodeRef| match node {
            NodeRef::Leaf(_) => 1.0,
            NodeRef::Hidden(h) => flips[h],
        };
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.a, e.b, e.correlation * node_flip(e.a) * node_flip(e.b)))
            .collect();
        TreeModel {
            leaves: self.leaves.clone(),
            hidden_count: self.hidden_count,
            edges,
            root: self.root,
            degenerate: self.degenerate,
            notes: self.notes.clone(),
        }
    }

    /// Check all tree-model invariants, collecting every violation.
    pub fn validate(&self, tol: &Tolerances) -> TreeReport {
        tree_is_valid(self, tol)
    }
}

// ---------------------------------------------------------------------------
// Tree-model validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum TreeViolation {
    NotConnected,
    WrongEdgeCount { edges: usize, nodes: usize },
    EndpointOutOfRange { node: NodeRef },
    SelfLoop { node: NodeRef },
    HiddenDegreeTooLow { hidden: usize, degree: usize },
    LeafDegreeNotOne { leaf: usize, degree: usize },
    TooManyHidden { hidden: usize, leaves: usize },
    EdgeCorrelationOutOfRange { a: NodeRef, b: NodeRef, value: f64 },
    RootOutOfRange { root: usize },
    LeafVarianceNotPositive { leaf: usize, variance: f64 },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::NotConnected => write!(f, "edge set is not connected"),
            TreeViolation::WrongEdgeCount { edges, nodes } => {
                write!(f, "{edges} edges for {nodes} nodes; a tree needs nodes - 1")
            }
            TreeViolation::EndpointOutOfRange { node } => {
                write!(f, "edge endpoint {node} out of range")
            }
            TreeViolation::SelfLoop { node } => write!(f, "self-loop at {node}"),
            TreeViolation::HiddenDegreeTooLow { hidden, degree } => {
                write!(f, "hidden[{hidden}] has degree {degree}, needs at least 3")
            }
            TreeViolation::LeafDegreeNotOne { leaf, degree } => {
                write!(f, "leaf[{leaf}] has degree {degree}, needs exactly 1")
            }
            TreeViolation::TooManyHidden { hidden, leaves } => {
                write!(
                    f,
                    "{hidden} hidden nodes for {leaves} leaves; at most leaves - 2"
                )
            }
            TreeViolation::EdgeCorrelationOutOfRange { a, b, value } => {
                write!(f, "edge {a} -- {b} correlation {value} out of range")
            }
            TreeViolation::RootOutOfRange { root } => write!(f, "root hidden[{root}] out of range"),
            TreeViolation::LeafVarianceNotPositive { leaf, variance } => {
                write!(f, "leaf[{leaf}] variance {variance} is not positive")
            }
        }
    }
}

/// Pass/fail report for the tree-model invariants.
#[derive(Debug, Clone, Default)]
pub struct TreeReport {
    pub violations: Vec<TreeViolation>,
}

impl TreeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for TreeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "ok")
        } else {
            for (k, v) in self.violations.iter().enumerate() {
                if k > 0 {
                    writeln!(f)?;
                }
                write!(f, "- {v}")?;
            }
            Ok(())
        }
    }
}

/// Validity check for a tree model: connected tree shape, hidden degree >= 3,
/// leaf degree 1, hidden count <= leaves - 2, and edge correlations within
/// the admissible band (|rho| up to 1 for flagged-degenerate models).
pub fn tree_is_valid(t: &TreeModel, tol: &Tolerances) -> TreeReport {
    let n = t.n_leaves();
    let m = t.hidden_count();
    let nodes = n + m;
    let mut violations = Vec::new();

    let in_range = |node: NodeRef| match node {
        NodeRef::Leaf(i) => i < n,
        NodeRef::Hidden(i) => i < m,
    };

    let mut shape_ok = true;
    for e in t.edges() {
        for node in [e.a, e.b] {
            if !in_range(node) {
                violations.push(TreeViolation::EndpointOutOfRange { node });
                shape_ok = false;
            }
        }
        if e.a == e.b {
            violations.push(TreeViolation::SelfLoop { node: e.a });
            shape_ok = false;
        }
    }

    if t.edges().len() + 1 != nodes {
        violations.push(TreeViolation::WrongEdgeCount {
            edges: t.edges().len(),
            nodes,
        });
    }

    if shape_ok && nodes > 0 {
        // Connectivity via BFS from the first node.
        let start = if n > 0 {
            NodeRef::Leaf(0)
        } else {
            NodeRef::Hidden(0)
        };
        let mut visited = std::collections::HashSet::from([start]);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            for next in t.neighbors(node) {
                if visited.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        if visited.len() != nodes {
            violations.push(TreeViolation::NotConnected);
        }

        for i in 0..n {
            let degree = t.neighbors(NodeRef::Leaf(i)).len();
            if degree != 1 {
                violations.push(TreeViolation::LeafDegreeNotOne { leaf: i, degree });
            }
        }
        for h in 0..m {
            let degree = t.neighbors(NodeRef::Hidden(h)).len();
            if degree < 3 {
                violations.push(TreeViolation::HiddenDegreeTooLow { hidden: h, degree });
            }
        }
    }

    if n >= 2 && m > n - 2 {
        violations.push(TreeViolation::TooManyHidden {
            hidden: m,
            leaves: n,
        });
    }

    if t.root >= m {
        violations.push(TreeViolation::RootOutOfRange { root: t.root });
    }

    let upper = if t.is_degenerate() {
        1.0
    } else {
        1.0 - tol.unit_tol
    };
    for e in t.edges() {
        let r = e.correlation.abs();
        if !(tol.dep_floor..=upper).contains(&r) {
            violations.push(TreeViolation::EdgeCorrelationOutOfRange {
                a: e.a,
                b: e.b,
                value: e.correlation,
            });
        }
    }

    for (i, leaf) in t.leaves().iter().enumerate() {
        if leaf.variance <= 0.0 {
            violations.push(TreeViolation::LeafVarianceNotPositive {
                leaf: i,
                variance: leaf.variance,
            });
        }
    }

    TreeReport { violations }
}
