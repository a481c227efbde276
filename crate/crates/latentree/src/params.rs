//! Parameter recovery: fill in every edge correlation of a reconstructed
//! topology from the leaf correlation matrix.
//!
//! Magnitudes come first. A leaf edge satisfies
//! rho_xh^2 = rho_xj rho_xk / rho_jk with j, k taken from two other branches
//! of the hidden neighbor; an internal edge is the ratio of one reference
//! leaf's loadings on its two endpoints. Signs are then fixed in a canonical
//! gauge — flipping a hidden variable's sign negates all its incident edges
//! without changing any leaf correlation, so only a gauge choice is
//! recoverable: internal edges and leaf 0's edge are taken positive, which
//! forces every other leaf edge to carry the sign of that leaf's correlation
//! with leaf 0.

use std::collections::BTreeSet;

use crate::builder::Topology;
use crate::error::{Error, Result};
use crate::model::{CorrelationMatrix, Edge, Leaf, NodeRef, Tolerances, TreeModel};

/// Loading magnitude |rho| between a leaf and a hidden node of the topology,
/// implied by the correlations of the leaf with reference leaves j, k drawn
/// from two branches of the hidden node different from the leaf's own.
pub fn leaf_loading(
    topo: &Topology,
    rho: &CorrelationMatrix,
    hidden: usize,
    leaf: usize,
    tol: &Tolerances,
) -> Result<f64> {
    if hidden >= topo.hidden_count() {
        return Err(Error::IndexOutOfRange {
            index: hidden,
            len: topo.hidden_count(),
        });
    }
    if leaf >= topo.n_leaves() {
        return Err(Error::IndexOutOfRange {
            index: leaf,
            len: topo.n_leaves(),
        });
    }
    let groups = topo.subtree_leaves(hidden);
    let own = groups
        .iter()
        .position(|g| g.binary_search(&leaf).is_ok())
        .expect("groups partition the leaves");
    let mut reps: Vec<usize> = groups
        .iter()
        .enumerate()
        .filter(|&(slot, _)| slot != own)
        .map(|(_, g)| g[0])
        .collect();
    reps.sort_unstable();
    let (j, k) = (reps[0], reps[1]);
    let denom = rho.get(j, k);
    if denom.abs() < tol.dep_floor {
        return Err(Error::BelowDependencyFloor {
            i: j,
            j: k,
            value: denom,
            floor: tol.dep_floor,
        });
    }
    Ok((rho.get(leaf, j) * rho.get(leaf, k) / denom)
        .abs()
        .sqrt()
        .min(1.0))
}

/// Correlation of an internal (hidden-hidden) edge from one reference leaf's
/// correlations with the two endpoints: the path to the far endpoint extends
/// the path to the near one by exactly this edge, so the edge is their
/// ratio. The result must lie strictly inside the usable magnitude band
/// (dependence floor to 1); anything else means the topology and the data
/// disagree.
pub fn recover_internal_edge(
    rho_leaf_far: f64,
    rho_leaf_near: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if rho_leaf_near.abs() < tol.dep_floor {
        return Err(Error::InvalidArgument(format!(
            "reference correlation {rho_leaf_near} is below the dependence floor {}",
            tol.dep_floor
        )));
    }
    let ratio = rho_leaf_far / rho_leaf_near;
    if !ratio.is_finite() || ratio.abs() >= 1.0 - tol.unit_tol || ratio.abs() < tol.dep_floor {
        return Err(Error::InconsistentInternalEdge { value: ratio });
    }
    Ok(ratio)
}

/// Recover all edge correlations for `topo` and assemble the full model.
///
/// `leaves` supplies names, means and variances for the observed variables
/// (use [`Leaf::standard`] for standardized data). Coincidences recorded on
/// the topology mark the model degenerate, with a note naming the leaf each
/// hidden node collapses onto. The root is hidden node 0.
pub fn assemble_tree_model(
    topo: &Topology,
    rho: &CorrelationMatrix,
    leaves: &[Leaf],
    tol: &Tolerances,
) -> Result<TreeModel> {
    topo.validate()?;
    if rho.n() != topo.n_leaves() {
        return Err(Error::DimensionMismatch {
            expected: topo.n_leaves(),
            actual: rho.n(),
        });
    }
    if leaves.len() != topo.n_leaves() {
        return Err(Error::DimensionMismatch {
            expected: topo.n_leaves(),
            actual: leaves.len(),
        });
    }

    let mut edges = Vec::new();
    for (a, b) in topo.edges() {
        match (a, b) {
            (NodeRef::Hidden(h), NodeRef::Leaf(x)) => {
                let mag = leaf_loading(topo, rho, h, x, tol)?;
                let sign = if x == 0 || rho.get(0, x) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                edges.push(Edge::new(a, b, sign * mag));
            }
            (NodeRef::Hidden(u), NodeRef::Hidden(v)) => {
                // Reference leaf on u's side away from v: its loading on v
                // extends its loading on u by this edge.
                let toward_v = topo
                    .neighbors(u)
                    .iter()
                    .position(|&nb| nb == NodeRef::Hidden(v))
                    .expect("edge endpoints are neighbors");
                let reference = topo
                    .subtree_leaves(u)
                    .iter()
                    .enumerate()
                    .filter(|&(slot, _)| slot != toward_v)
                    .map(|(_, g)| g[0])
                    .min()
                    .expect("hidden degree is at least 3");
                let near = leaf_loading(topo, rho, u, reference, tol)?;
                let far = leaf_loading(topo, rho, v, reference, tol)?;
                edges.push(Edge::new(a, b, recover_internal_edge(far, near, tol)?));
            }
            _ => unreachable!("topology edges always touch a hidden node"),
        }
    }

    let mut model = TreeModel::new(leaves.to_vec(), topo.hidden_count(), edges, 0);
    let coincident: BTreeSet<(usize, usize)> = topo.coincident().iter().copied().collect();
    if !coincident.is_empty() {
        model = model.with_degenerate(true);
        for &(h, x) in &coincident {
            model.push_note(format!(
                "hidden[{h}] coincides with leaf '{}' (unit-magnitude edge)",
                leaves[x].name
            ));
        }
    }

    let report = model.validate(tol);
    if !report.passed() {
        return Err(Error::InvalidTree { report });
    }
    Ok(model)
}
