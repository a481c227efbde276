//! Property tests for the structural invariants: relabeling equivariance,
//! sign-gauge freedom, leaf-scale independence, and estimator well-formedness.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use latentree::builder::build_topology;
use latentree::model::{
    CorrelationMatrix, Edge, Leaf, NodeRef, QuartetClass, Tolerances, TreeModel,
};
use latentree::oracle::{joint_covariance, leaf_correlations, marginal_leaf_block, SampleMatrix};
use latentree::quartet::classify_quartet_of;

fn corpus_tolerances() -> Tolerances {
    Tolerances::default()
        .with_eq_tol(1e-9)
        .with_dep_floor(1e-12)
}

/// Raw observation rows of one shared width.
fn arb_samples() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=4).prop_flat_map(|n_vars| {
        prop::collection::vec(prop::collection::vec(-100.0f64..100.0, n_vars), 3..=30)
    })
}

/// All 24 orderings of four distinct positions.
fn perms4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if a != b && a != c && a != d && b != c && b != d && c != d {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

/// Leaf correlation matrix computed through the joint covariance (the route
/// that actually consumes leaf means and variances).
fn correlations_via_joint(tree: &TreeModel) -> CorrelationMatrix {
    let joint = joint_covariance(tree).unwrap();
    let leaf_idx: Vec<usize> = (0..tree.n_leaves()).collect();
    marginal_leaf_block(&joint.matrix, &leaf_idx)
        .unwrap()
        .to_correlation()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Leaf means and variances are location/scale bookkeeping: changing
    /// them must not move the implied correlations.
    #[test]
    fn leaf_scale_does_not_move_correlations(
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=8);
        let tree = common::random_tree(n, (0.2, 0.95), &mut rng);
        let base = correlations_via_joint(&tree);

        let rescaled_leaves: Vec<Leaf> = tree
            .leaves()
            .iter()
            .enumerate()
            .map(|(i, leaf)| Leaf {
                name: leaf.name.clone(),
                mean: leaf.mean + shift * (i as f64 + 1.0),
                variance: leaf.variance * scale * (i as f64 + 1.0),
            })
            .collect();
        let rescaled = TreeModel::new(
            rescaled_leaves,
            tree.hidden_count(),
            tree.edges().to_vec(),
            0,
        );
        let moved = correlations_via_joint(&rescaled);
        prop_assert!(base.max_abs_diff(&moved).unwrap() <= 1e-12);
    }

    /// Classifying a quartet commutes with relabeling its four indices: the
    /// partner of the first index follows the permutation.
    #[test]
    fn quartet_classification_is_relabeling_equivariant(seed in any::<u64>()) {
        let tol = corpus_tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..=10);
        let tree = common::random_tree(n, (0.2, 0.95), &mut rng);
        let rho = leaf_correlations(&tree).unwrap();
        let topo = tree.topology();

        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        let q = [indices[0], indices[1], indices[2], indices[3]];
        let truth = common::structural_pairing(&topo, q);

        for perm in perms4() {
            let relabeled = [q[perm[0]], q[perm[1]], q[perm[2]], q[perm[3]]];
            let got = classify_quartet_of(&rho, relabeled, &tol).unwrap();
            let expected = match truth.sibling_pairs() {
                None => QuartetClass::Degenerate,
                Some(pairs) => {
                    // Position (within the relabeled quartet) of the leaf
                    // paired with the one now in front.
                    let partner_of = |leaf: usize| -> usize {
                        for [a, b] in pairs {
                            if q[a] == leaf {
                                return q[b];
                            }
                            if q[b] == leaf {
                                return q[a];
                            }
                        }
                        unreachable!("every quartet member has a partner")
                    };
                    let partner = partner_of(relabeled[0]);
                    let pos = relabeled.iter().position(|&x| x == partner).unwrap();
                    QuartetClass::pairing_first_with(pos)
                }
            };
            prop_assert_eq!(got, expected, "permutation {:?} of {:?}", perm, q);
        }
    }

    /// Reconstruction does not depend on how the leaves happen to be
    /// numbered: building from a permuted matrix yields the permuted tree.
    #[test]
    fn reconstruction_commutes_with_leaf_relabeling(seed in any::<u64>()) {
        let tol = corpus_tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..=9);
        let tree = common::random_tree(n, (0.2, 0.95), &mut rng);
        let rho = leaf_correlations(&tree).unwrap();

        // perm[i] is the new label of original leaf i.
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut inverse = vec![0usize; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|a| (0..n).map(|b| rho.get(inverse[a], inverse[b])).collect())
            .collect();
        let permuted = CorrelationMatrix::from_rows(&rows).unwrap();

        let rebuilt = build_topology(&permuted, &tol).unwrap();
        prop_assert_eq!(
            rebuilt.splits(),
            common::mapped_splits(&tree.topology(), &perm)
        );
    }

    /// Flipping the sign of every edge around one hidden node is not
    /// observable: implied correlations are bit-identical and the canonical
    /// gauge maps both models to the same edge signs.
    #[test]
    fn hidden_sign_flips_are_unobservable(seed in any::<u64>(), flip_pick in any::<u32>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=8);
        let tree = common::random_tree(n, (0.2, 0.95), &mut rng);
        let flip = flip_pick as usize % tree.hidden_count();

        let flipped_edges: Vec<Edge> = tree
            .edges()
            .iter()
            .map(|e| {
                let touches = e.a == NodeRef::Hidden(flip) || e.b == NodeRef::Hidden(flip);
                let sign = if touches { -1.0 } else { 1.0 };
                Edge::new(e.a, e.b, sign * e.correlation)
            })
            .collect();
        let flipped = TreeModel::new(
            tree.leaves().to_vec(),
            tree.hidden_count(),
            flipped_edges,
            0,
        );

        let base = leaf_correlations(&tree).unwrap();
        let moved = leaf_correlations(&flipped).unwrap();
        prop_assert!(base.max_abs_diff(&moved).unwrap() == 0.0);

        let gauge_a = common::edge_map(&tree.canonical_gauge());
        let gauge_b = common::edge_map(&flipped.canonical_gauge());
        prop_assert_eq!(gauge_a, gauge_b);
    }

    /// Whatever data comes in, an estimated correlation matrix is symmetric
    /// with a unit diagonal and entries in [-1, 1].
    #[test]
    fn estimates_are_well_formed_correlations(raw in arb_samples()) {
        let n_obs = raw.len();
        let n_vars = raw[0].len();
        let values = nalgebra::DMatrix::from_fn(n_obs, n_vars, |i, j| raw[i][j]);
        let columns = (0..n_vars).map(|j| format!("v{j}")).collect();
        let samples = SampleMatrix::new(columns, values).unwrap();

        match latentree::oracle::estimate_correlations(&samples) {
            Err(latentree::Error::DegenerateVariable { .. }) => {
                // Constant columns are legitimately rejected.
            }
            Err(other) => return Err(TestCaseError::fail(format!("unexpected error: {other}"))),
            Ok(est) => {
                for i in 0..n_vars {
                    prop_assert_eq!(est.get(i, i), 1.0);
                    for j in 0..n_vars {
                        prop_assert_eq!(est.get(i, j), est.get(j, i));
                        prop_assert!(est.get(i, j).abs() <= 1.0);
                    }
                }
            }
        }
    }
}
