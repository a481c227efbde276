//! Topology reconstruction: recover the shape of the latent tree from leaf
//! correlations alone.
//!
//! Leaves are inserted one at a time. The first three form a star around
//! hidden node 0; each later leaf walks down the current tree, at every
//! hidden node asking each branch "does this leaf pair into you?" via a
//! quartet test against representatives of the other branches. Exactly one
//! claiming branch means descend (or split an edge when the claimant is a
//! leaf or the node we just came from); no claims means the leaf attaches
//! right here; several claims mean no single tree explains the data.
//!
//! The walk only checks the quartets it needs. [`consistency_check`]
//! quantifies how well the full, overdetermined set of loading equations
//! agrees afterwards.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{
    validate_correlation_matrix, CorrelationMatrix, NodeRef, QuartetClass, Tolerances, TreeModel,
};
use crate::quartet::classify_quartet_of;
use crate::star::{is_star_decomposable, solve_star_loadings, StarVerdict};

/// Tree shape over `n_leaves` leaves and some hidden nodes, without edge
/// parameters. Every leaf has exactly one hidden neighbor; hidden nodes have
/// degree at least 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_leaves: usize,
    /// Neighbors of each hidden node, indexed by hidden id.
    adj: Vec<Vec<NodeRef>>,
    /// (hidden, leaf) pairs whose implied edge has unit magnitude: the
    /// hidden node coincides with that observed leaf.
    coincident: Vec<(usize, usize)>,
}

impl Topology {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn hidden_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, hidden: usize) -> &[NodeRef] {
        &self.adj[hidden]
    }

    /// (hidden, leaf) coincidences detected from unit-magnitude loadings.
    pub fn coincident(&self) -> &[(usize, usize)] {
        &self.coincident
    }

    /// Every edge once: hidden-leaf edges plus hidden-hidden edges with the
    /// lower hidden id first.
    pub fn edges(&self) -> Vec<(NodeRef, NodeRef)> {
        let mut out = Vec::new();
        for (h, nbs) in self.adj.iter().enumerate() {
            for &nb in nbs {
                match nb {
                    NodeRef::Leaf(_) => out.push((NodeRef::Hidden(h), nb)),
                    NodeRef::Hidden(v) if v > h => out.push((NodeRef::Hidden(h), nb)),
                    NodeRef::Hidden(_) => {}
                }
            }
        }
        out
    }

    /// Hidden neighbor of a leaf.
    pub fn leaf_attachment(&self, leaf: usize) -> Option<usize> {
        self.adj
            .iter()
            .position(|nbs| nbs.contains(&NodeRef::Leaf(leaf)))
    }

    /// Leaves reachable through each neighbor of `hidden`, one sorted group
    /// per neighbor slot. The groups partition all leaves.
    pub fn subtree_leaves(&self, hidden: usize) -> Vec<Vec<usize>> {
        self.adj[hidden]
            .iter()
            .map(|&start| {
                let mut leaves = Vec::new();
                match start {
                    NodeRef::Leaf(l) => leaves.push(l),
                    NodeRef::Hidden(s) => {
                        let mut visited = vec![false; self.adj.len()];
                        visited[hidden] = true;
                        visited[s] = true;
                        let mut queue = VecDeque::from([s]);
                        while let Some(u) = queue.pop_front() {
                            for &nb in &self.adj[u] {
                                match nb {
                                    NodeRef::Leaf(l) => leaves.push(l),
                                    NodeRef::Hidden(v) => {
                                        if !visited[v] {
                                            visited[v] = true;
                                            queue.push_back(v);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                leaves.sort_unstable();
                leaves
            })
            .collect()
    }

    /// Lowest-indexed leaf through each neighbor slot of `hidden`.
    fn subtree_reps(&self, hidden: usize) -> Vec<usize> {
        self.subtree_leaves(hidden)
            .iter()
            .map(|g| *g.first().expect("every branch reaches a leaf"))
            .collect()
    }

    /// Leaf bipartitions induced by the hidden-hidden edges, each written as
    /// the sorted side not containing leaf 0. Two valid topologies are the
    /// same shape exactly when their split sets match.
    pub fn splits(&self) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        for h in 0..self.adj.len() {
            let groups = self.subtree_leaves(h);
            for (slot, &nb) in self.adj[h].iter().enumerate() {
                if let NodeRef::Hidden(v) = nb {
                    if v > h {
                        let side = &groups[slot];
                        if side.binary_search(&0).is_ok() {
                            let far: Vec<usize> = (0..self.n_leaves)
                                .filter(|l| side.binary_search(l).is_err())
                                .collect();
                            out.insert(far);
                        } else {
                            out.insert(side.clone());
                        }
                    }
                }
            }
        }
        out
    }

    /// Structural sanity: connected tree, every leaf attached exactly once,
    /// hidden degrees at least 3.
    pub fn validate(&self) -> Result<()> {
        let m = self.adj.len();
        let mut leaf_seen = vec![0usize; self.n_leaves];
        let mut edge_count = 0usize;
        for (h, nbs) in self.adj.iter().enumerate() {
            if nbs.len() < 3 {
                return Err(Error::InvalidArgument(format!(
                    "hidden[{h}] has degree {} (needs at least 3)",
                    nbs.len()
                )));
            }
            for &nb in nbs {
                match nb {
                    NodeRef::Leaf(l) => {
                        if l >= self.n_leaves {
                            return Err(Error::IndexOutOfRange {
                                index: l,
                                len: self.n_leaves,
                            });
                        }
                        leaf_seen[l] += 1;
                        edge_count += 1;
                    }
                    NodeRef::Hidden(v) => {
                        if v >= m {
                            return Err(Error::IndexOutOfRange { index: v, len: m });
                        }
                        if v == h {
                            return Err(Error::InvalidArgument(format!(
                                "hidden[{h}] has a self-loop"
                            )));
                        }
                        if !self.adj[v].contains(&NodeRef::Hidden(h)) {
                            return Err(Error::InvalidArgument(format!(
                                "edge hidden[{h}]-hidden[{v}] is not symmetric"
                            )));
                        }
                        if v > h {
                            edge_count += 1;
                        }
                    }
                }
            }
        }
        for (l, &count) in leaf_seen.iter().enumerate() {
            if count != 1 {
                return Err(Error::InvalidArgument(format!(
                    "leaf[{l}] has degree {count} (needs exactly 1)"
                )));
            }
        }
        let nodes = self.n_leaves + m;
        if edge_count + 1 != nodes {
            return Err(Error::InvalidArgument(format!(
                "{edge_count} edges for {nodes} nodes: not a tree"
            )));
        }
        // Connectivity over hidden nodes (leaves hang off them).
        let mut visited = vec![false; m];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(u) = queue.pop_front() {
            for &nb in &self.adj[u] {
                if let NodeRef::Hidden(v) = nb {
                    if !visited[v] {
                        visited[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        if visited.iter().any(|&v| !v) {
            return Err(Error::InvalidArgument("topology is disconnected".into()));
        }
        Ok(())
    }
}

impl TreeModel {
    /// Shape of this model with parameters stripped. Leaf edges at unit
    /// magnitude (within the default tolerance) are recorded as coincident.
    /// Assumes a structurally valid model.
    pub fn topology(&self) -> Topology {
        let unit_tol = Tolerances::default().unit_tol;
        let mut adj = vec![Vec::new(); self.hidden_count()];
        let mut coincident = Vec::new();
        for e in self.edges() {
            match (e.a, e.b) {
                (NodeRef::Hidden(h), NodeRef::Hidden(v)) => {
                    adj[h].push(NodeRef::Hidden(v));
                    adj[v].push(NodeRef::Hidden(h));
                }
                (NodeRef::Hidden(h), NodeRef::Leaf(l)) | (NodeRef::Leaf(l), NodeRef::Hidden(h)) => {
                    adj[h].push(NodeRef::Leaf(l));
                    if e.correlation.abs() >= 1.0 - unit_tol {
                        coincident.push((h, l));
                    }
                }
                (NodeRef::Leaf(_), NodeRef::Leaf(_)) => {}
            }
        }
        Topology {
            n_leaves: self.n_leaves(),
            adj,
            coincident,
        }
    }
}

/// Reconstruct the tree shape implied by a leaf correlation matrix.
///
/// The matrix must validate (symmetry, range, dependence floor, positive
/// semidefiniteness); rejections surface as errors carrying the offending
/// triplet or quartet. Hidden nodes that coincide with a leaf (a unit
/// loading) are kept and annotated rather than rejected.
pub fn build_topology(rho: &CorrelationMatrix, tol: &Tolerances) -> Result<Topology> {
    let n = rho.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "topology reconstruction needs at least 3 leaves, got {n}"
        )));
    }
    let report = validate_correlation_matrix(rho, tol);
    if !report.passed() {
        return Err(Error::InvalidCorrelationMatrix { report });
    }

    if let StarVerdict::Rejected(reason) =
        is_star_decomposable(rho.get(0, 1), rho.get(0, 2), rho.get(1, 2), tol)?
    {
        return Err(Error::NotStarDecomposable {
            triplet: [0, 1, 2],
            reason,
        });
    }

    let mut topo = Topology {
        n_leaves: 3,
        adj: vec![vec![NodeRef::Leaf(0), NodeRef::Leaf(1), NodeRef::Leaf(2)]],
        coincident: Vec::new(),
    };
    for x in 3..n {
        insert_leaf(&mut topo, rho, x, tol)?;
        topo.n_leaves = x + 1;
    }
    topo.coincident = detect_coincidences(&topo, rho, tol)?;
    Ok(topo)
}

/// Walk leaf `x` down the tree built so far and splice it in.
fn insert_leaf(
    topo: &mut Topology,
    rho: &CorrelationMatrix,
    x: usize,
    tol: &Tolerances,
) -> Result<()> {
    let mut w = 0usize;
    let mut came_from: Option<usize> = None;
    loop {
        let reps = topo.subtree_reps(w);
        let mut claimants = Vec::new();
        for slot in 0..reps.len() {
            let mut others: Vec<usize> = reps
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != slot)
                .map(|(_, &r)| r)
                .collect();
            others.sort_unstable();
            let class = classify_quartet_of(rho, [x, reps[slot], others[0], others[1]], tol)?;
            if class == QuartetClass::Pair12_34 {
                claimants.push(slot);
            }
        }
        match claimants.len() {
            // Nothing pulls x into a branch: it hangs directly off w.
            0 => {
                topo.adj[w].push(NodeRef::Leaf(x));
                return Ok(());
            }
            1 => {
                let slot = claimants[0];
                match topo.adj[w][slot] {
                    // Sibling of an attached leaf: split that leaf edge with
                    // a fresh hidden node holding both.
                    NodeRef::Leaf(l) => {
                        let h = topo.adj.len();
                        topo.adj[w][slot] = NodeRef::Hidden(h);
                        topo.adj
                            .push(vec![NodeRef::Hidden(w), NodeRef::Leaf(l), NodeRef::Leaf(x)]);
                        return Ok(());
                    }
                    NodeRef::Hidden(v) => {
                        if came_from == Some(v) {
                            // Both endpoints of this internal edge pull x
                            // toward each other: x sits on the edge itself.
                            let h = topo.adj.len();
                            topo.adj[w][slot] = NodeRef::Hidden(h);
                            let back = topo.adj[v]
                                .iter()
                                .position(|&nb| nb == NodeRef::Hidden(w))
                                .expect("internal edges are symmetric");
                            topo.adj[v][back] = NodeRef::Hidden(h);
                            topo.adj.push(vec![
                                NodeRef::Hidden(w),
                                NodeRef::Hidden(v),
                                NodeRef::Leaf(x),
                            ]);
                            return Ok(());
                        }
                        came_from = Some(w);
                        w = v;
                    }
                }
            }
            _ => {
                let r0 = reps[claimants[0]];
                let r1 = reps[claimants[1]];
                let r2 = *reps
                    .iter()
                    .find(|&&r| r != r0 && r != r1)
                    .expect("hidden degree is at least 3");
                return Err(Error::NotTreeDecomposable {
                    quartet: [x, r0, r1, r2],
                    detail: format!(
                        "leaf {x} is claimed by {} branches at one internal node \
                         (representatives {r0} and {r1}); no single tree fits",
                        claimants.len()
                    ),
                });
            }
        }
    }
}

/// Flag every (hidden, adjacent leaf) pair whose implied loading reaches
/// unit magnitude: the hidden variable is that leaf.
fn detect_coincidences(
    topo: &Topology,
    rho: &CorrelationMatrix,
    tol: &Tolerances,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for h in 0..topo.hidden_count() {
        let reps = topo.subtree_reps(h);
        for (slot, &nb) in topo.adj[h].iter().enumerate() {
            let NodeRef::Leaf(x) = nb else { continue };
            let mut others: Vec<usize> = reps
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != slot)
                .map(|(_, &r)| r)
                .collect();
            others.sort_unstable();
            let (j, k) = (others[0], others[1]);
            let loadings = solve_star_loadings(rho.get(x, j), rho.get(x, k), rho.get(j, k), tol)
                .map_err(|e| match e {
                    Error::NotStarDecomposable { reason, .. } => Error::NotStarDecomposable {
                        triplet: [x, j, k],
                        reason,
                    },
                    other => other,
                })?;
            if loadings.degenerate_with_leaf == Some(0) {
                out.push((h, x));
            }
        }
    }
    Ok(out)
}

/// Whether two topologies are the same tree shape over the same leaf set.
pub fn topology_isomorphic(a: &Topology, b: &Topology) -> Result<bool> {
    if a.n_leaves != b.n_leaves {
        return Err(Error::LeafSetMismatch {
            detail: format!("{} leaves vs {}", a.n_leaves, b.n_leaves),
        });
    }
    Ok(a.splits() == b.splits())
}

/// How far the overdetermined loading equations are from agreeing.
///
/// Each (hidden node, leaf) pair determines a squared loading
/// rho_xj * rho_xk / rho_jk for every choice of reference leaves j, k drawn
/// from two branches different from x's. On exact tree data all choices
/// coincide; the worst relative spread measures deviation from that.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Number of loading determinations evaluated.
    pub checks: usize,
    /// Worst (max - min) / max|value| over any (hidden, leaf) pair.
    pub max_relative_spread: f64,
    pub worst_hidden: usize,
    pub worst_leaf: usize,
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} loading determinations, worst relative spread {:.3e} at hidden[{}] / leaf[{}]",
            self.checks, self.max_relative_spread, self.worst_hidden, self.worst_leaf
        )
    }
}

/// Evaluate every loading determination the topology admits against the
/// data. The matrix should already validate; a vanishing reference
/// correlation is reported as a floor violation.
pub fn consistency_check(
    topo: &Topology,
    rho: &CorrelationMatrix,
    tol: &Tolerances,
) -> Result<ConsistencyReport> {
    if rho.n() != topo.n_leaves {
        return Err(Error::DimensionMismatch {
            expected: topo.n_leaves,
            actual: rho.n(),
        });
    }
    let mut report = ConsistencyReport {
        checks: 0,
        max_relative_spread: 0.0,
        worst_hidden: 0,
        worst_leaf: 0,
    };
    for h in 0..topo.hidden_count() {
        let groups = topo.subtree_leaves(h);
        for x in 0..topo.n_leaves {
            let gx = groups
                .iter()
                .position(|g| g.binary_search(&x).is_ok())
                .expect("groups partition the leaves");
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut count = 0usize;
            for gj in 0..groups.len() {
                if gj == gx {
                    continue;
                }
                for gk in gj + 1..groups.len() {
                    if gk == gx {
                        continue;
                    }
                    for &j in &groups[gj] {
                        for &k in &groups[gk] {
                            let denom = rho.get(j, k);
                            if denom.abs() < tol.dep_floor {
                                return Err(Error::BelowDependencyFloor {
                                    i: j,
                                    j: k,
                                    value: denom,
                                    floor: tol.dep_floor,
                                });
                            }
                            let v = rho.get(x, j) * rho.get(x, k) / denom;
                            lo = lo.min(v);
                            hi = hi.max(v);
                            count += 1;
                        }
                    }
                }
            }
            report.checks += count;
            if count >= 2 {
                let spread = (hi - lo) / hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
                if spread > report.max_relative_spread {
                    report.max_relative_spread = spread;
                    report.worst_hidden = h;
                    report.worst_leaf = x;
                }
            }
        }
    }
    Ok(report)
}
