//! Shared helpers for the integration suites: random and exhaustive tree
//! generation, a structural quartet oracle independent of any correlation
//! arithmetic, and model comparison up to the hidden-node sign gauge.
//!
//! Compiled into every integration binary; not all of them use every helper.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use latentree::builder::Topology;
use latentree::model::{Edge, Leaf, NodeRef, QuartetClass, TreeModel};

/// Edge list of a tree shape before parameters are attached.
pub type Skeleton = Vec<(NodeRef, NodeRef)>;

fn base_skeleton() -> (Skeleton, usize) {
    (
        vec![
            (NodeRef::Hidden(0), NodeRef::Leaf(0)),
            (NodeRef::Hidden(0), NodeRef::Leaf(1)),
            (NodeRef::Hidden(0), NodeRef::Leaf(2)),
        ],
        1,
    )
}

/// Insert `leaf` at position `pick`): positions 0..hidden_count attach the
/// leaf to that hidden node; the rest subdivide the corresponding edge with
/// a fresh hidden node that also takes the leaf.
fn insert_at(skeleton: &mut Skeleton, hidden_count: &mut usize, leaf: usize, pick: usize) {
    if pick < *hidden_count {
        skeleton.push((NodeRef::Hidden(pick), NodeRef::Leaf(leaf)));
    } else {
        let (a, b) = skeleton.remove(pick - *hidden_count);
        let h = *hidden_count;
        *hidden_count += 1;
        skeleton.push((a, NodeRef::Hidden(h)));
        skeleton.push((NodeRef::Hidden(h), b));
        skeleton.push((NodeRef::Hidden(h), NodeRef::Leaf(leaf)));
    }
}

/// Every labeled tree shape with `n_leaves` leaves (hidden degree >= 3),
/// reached by inserting leaves in index order. Each shape appears exactly
/// once: removing the highest leaf recovers its unique predecessor.
pub fn enumerate_skeletons(n_leaves: usize) -> Vec<(Skeleton, usize)> {
    assert!(n_leaves >= 3);
    let mut level = vec![base_skeleton()];
    for leaf in 3..n_leaves {
        let mut next = Vec::new();
        for (skeleton, hidden_count) in &level {
            for pick in 0..hidden_count + skeleton.len() {
                let mut s = skeleton.clone();
                let mut m = *hidden_count;
                insert_at(&mut s, &mut m, leaf, pick);
                next.push((s, m));
            }
        }
        level = next;
    }
    level
}

/// A uniformly chosen insertion history; not uniform over shapes, but it
/// reaches them all.
pub fn random_skeleton(n_leaves: usize, rng: &mut ChaCha8Rng) -> (Skeleton, usize) {
    let (mut skeleton, mut hidden_count) = base_skeleton();
    for leaf in 3..n_leaves {
        let pick = rng.gen_range(0..hidden_count + skeleton.len());
        insert_at(&mut skeleton, &mut hidden_count, leaf, pick);
    }
    (skeleton, hidden_count)
}

/// Attach random parameters to a skeleton: edge magnitudes uniform in
/// `mag_range` with random signs, leaf means in [-2, 2] and variances in
/// [0.5, 4].
pub fn parameterize(
    skeleton: &Skeleton,
    hidden_count: usize,
    n_leaves: usize,
    mag_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> TreeModel {
    let edges: Vec<Edge> = skeleton
        .iter()
        .map(|&(a, b)| {
            let mag = rng.gen_range(mag_range.0..=mag_range.1);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Edge::new(a, b, sign * mag)
        })
        .collect();
    let leaves: Vec<Leaf> = (0..n_leaves)
        .map(|i| Leaf {
            name: format!("x{}", i + 1),
            mean: rng.gen_range(-2.0..2.0),
            variance: rng.gen_range(0.5..4.0),
        })
        .collect();
    TreeModel::new(leaves, hidden_count, edges, 0)
}

/// Random tree over `n_leaves` leaves with edge magnitudes in `mag_range`.
pub fn random_tree(n_leaves: usize, mag_range: (f64, f64), rng: &mut ChaCha8Rng) -> TreeModel {
    let (skeleton, hidden_count) = random_skeleton(n_leaves, rng);
    parameterize(&skeleton, hidden_count, n_leaves, mag_range, rng)
}

/// Hidden nodes on the path between two leaves, endpoints included.
fn hidden_path(topo: &Topology, leaf_a: usize, leaf_b: usize) -> Vec<usize> {
    let start = topo.leaf_attachment(leaf_a).expect("leaf is attached");
    let goal = topo.leaf_attachment(leaf_b).expect("leaf is attached");
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    parent.insert(start, start);
    while let Some(u) = queue.pop_front() {
        if u == goal {
            break;
        }
        for &nb in topo.neighbors(u) {
            if let NodeRef::Hidden(v) = nb {
                parent.entry(v).or_insert_with(|| {
                    queue.push_back(v);
                    u
                });
            }
        }
    }
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = parent[&cur];
        path.push(cur);
    }
    path
}

/// Sibling pairing of four distinct leaves read off the tree shape itself:
/// the pairing whose two connecting paths share no hidden node, or
/// `Degenerate` when all three candidate pairings collide (the four paths
/// meet at a single hidden node).
pub fn structural_pairing(topo: &Topology, q: [usize; 4]) -> QuartetClass {
    let candidates = [
        ([0, 1], [2, 3], QuartetClass::Pair12_34),
        ([0, 2], [1, 3], QuartetClass::Pair13_24),
        ([0, 3], [1, 2], QuartetClass::Pair14_23),
    ];
    for (p, q2, class) in candidates {
        let first: BTreeSet<usize> = hidden_path(topo, q[p[0]], q[p[1]]).into_iter().collect();
        let second: BTreeSet<usize> = hidden_path(topo, q[q2[0]], q[q2[1]]).into_iter().collect();
        if first.is_disjoint(&second) {
            return class;
        }
    }
    QuartetClass::Degenerate
}

/// Identity of an edge that survives hidden-node relabeling: a leaf edge is
/// named by its leaf; an internal edge by the leaf side not containing
/// leaf 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKey {
    Leaf(usize),
    Split(Vec<usize>),
}

/// Map every edge of a model to its relabeling-proof key and correlation.
pub fn edge_map(model: &TreeModel) -> HashMap<EdgeKey, f64> {
    let topo = model.topology();
    let mut out = HashMap::new();
    for e in model.edges() {
        let key = match (e.a, e.b) {
            (_, NodeRef::Leaf(l)) | (NodeRef::Leaf(l), _) => EdgeKey::Leaf(l),
            (NodeRef::Hidden(u), NodeRef::Hidden(v)) => {
                let slot = topo
                    .neighbors(u)
                    .iter()
                    .position(|&nb| nb == NodeRef::Hidden(v))
                    .expect("edge endpoints are neighbors");
                let side = topo.subtree_leaves(u)[slot].clone();
                let side = if side.binary_search(&0).is_ok() {
                    (0..model.n_leaves())
                        .filter(|l| side.binary_search(l).is_err())
                        .collect()
                } else {
                    side
                };
                EdgeKey::Split(side)
            }
        };
        out.insert(key, e.correlation);
    }
    out
}

/// Worst |correlation difference| over matching edges of two models after
/// both are put in the canonical sign gauge. Panics if the shapes differ.
pub fn max_edge_diff_up_to_gauge(a: &TreeModel, b: &TreeModel) -> f64 {
    let map_a = edge_map(&a.canonical_gauge());
    let map_b = edge_map(&b.canonical_gauge());
    let keys_a: BTreeSet<_> = map_a.keys().cloned().collect();
    let keys_b: BTreeSet<_> = map_b.keys().cloned().collect();
    assert_eq!(keys_a, keys_b, "models have different shapes");
    keys_a
        .iter()
        .map(|k| (map_a[k] - map_b[k]).abs())
        .fold(0.0, f64::max)
}

/// Splits of a topology relabeled through `perm` (leaf i becomes
/// `perm[i]`), re-canonicalized so no side contains leaf 0.
pub fn mapped_splits(topo: &Topology, perm: &[usize]) -> BTreeSet<Vec<usize>> {
    topo.splits()
        .into_iter()
        .map(|side| {
            let mut mapped: Vec<usize> = side.into_iter().map(|l| perm[l]).collect();
            mapped.sort_unstable();
            if mapped.binary_search(&0).is_ok() {
                (0..topo.n_leaves())
                    .filter(|l| mapped.binary_search(l).is_err())
                    .collect()
            } else {
                mapped
            }
        })
        .collect()
}

/// All 4-element ascending index tuples out of 0..n.
pub fn four_subsets(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}
