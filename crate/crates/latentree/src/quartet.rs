//! Quartet classification: decide which sibling pairing a 4-tuple of leaves
//! exhibits by comparing the three cross-products of its pairwise
//! correlations.
//!
//! In a tree where leaves {1,2} and {3,4} hang off two internal nodes joined
//! by a path with correlation c, the products rho_13*rho_24 and rho_14*rho_23
//! coincide (both carry c^2) while rho_12*rho_34 does not. Which equality
//! holds identifies the pairing; all three holding at once means the four
//! leaves share a single center.

use crate::error::{Error, Result};
use crate::model::{CorrelationMatrix, QuartetClass, Tolerances};
use crate::star::{is_star_decomposable, StarVerdict};

/// The three pairing products of a 4x4 correlation matrix:
/// (rho_13*rho_24, rho_12*rho_34, rho_14*rho_23), indices 1-based.
pub fn cross_products(rho: &CorrelationMatrix) -> Result<(f64, f64, f64)> {
    if rho.n() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: rho.n(),
        });
    }
    let p_a = rho.get(0, 2) * rho.get(1, 3);
    let p_b = rho.get(0, 1) * rho.get(2, 3);
    let p_c = rho.get(0, 3) * rho.get(1, 2);
    Ok((p_a, p_b, p_c))
}

/// Classify the pairing of a 4x4 correlation submatrix.
pub fn classify_quartet(rho: &CorrelationMatrix, tol: &Tolerances) -> Result<QuartetClass> {
    classify_quartet_of(rho, [0, 1, 2, 3], tol)
}

/// Classify the pairing of four variables of a larger correlation matrix.
/// Errors carry the caller's indices so diagnostics name the real leaves.
///
/// Every 3-subset must be star-decomposable; otherwise the 4-tuple cannot
/// come from a tree at all. Exactly one cross-product equality (under the
/// relative tolerance `eq_tol`) picks the pairing, which must also be the
/// smallest product in magnitude; all three equalities mean the quartet is
/// degenerate. Two equalities without the third are treated as degenerate
/// rather than guessing a pairing.
pub fn classify_quartet_of(
    rho: &CorrelationMatrix,
    idx: [usize; 4],
    tol: &Tolerances,
) -> Result<QuartetClass> {
    let n = rho.n();
    for &i in &idx {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
    }

    // Star preconditions on all four triplets.
    let triplets = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    for t in triplets {
        let (a, b, c) = (idx[t[0]], idx[t[1]], idx[t[2]]);
        let verdict = is_star_decomposable(
            rho.get(a, b),
            rho.get(a, c),
            rho.get(b, c),
            tol,
        )
        .map_err(|e| match e {
            Error::BelowDependencyFloor { value, floor, .. } => Error::NotTreeDecomposable {
                quartet: idx,
                detail: format!(
                    "triplet ({a},{b},{c}) has a correlation {value} below the dependency floor {floor}"
                ),
            },
            other => other,
        })?;
        if let StarVerdict::Rejected(reason) = verdict {
            return Err(Error::NotTreeDecomposable {
                quartet: idx,
                detail: format!("triplet ({a},{b},{c}) is not star-decomposable: {reason}"),
            });
        }
    }

    let r = |i: usize, j: usize| rho.get(idx[i], idx[j]);
    let p_a = r(0, 2) * r(1, 3);
    let p_b = r(0, 1) * r(2, 3);
    let p_c = r(0, 3) * r(1, 2);

    let eq = |p: f64, q: f64| (p - q).abs() <= tol.eq_tol * p.abs().max(q.abs());
    let matches: Vec<QuartetClass> = [
        (p_a, p_c, QuartetClass::Pair12_34),
        (p_b, p_c, QuartetClass::Pair13_24),
        (p_b, p_a, QuartetClass::Pair14_23),
    ]
    .into_iter()
    .filter(|&(p, q, _)| eq(p, q))
    .map(|(_, _, class)| class)
    .collect();

    match matches.len() {
        0 => Err(Error::NotTreeDecomposable {
            quartet: idx,
            detail: format!(
                "no cross-product equality holds: products ({p_a}, {p_b}, {p_c}) at eq_tol {}",
                tol.eq_tol
            ),
        }),
        1 => {
            let class = matches[0];
            // Path-product consistency: the matched (equal) pair carries the
            // extra squared internal-path factor, so it must be the smallest
            // product in magnitude.
            let (pair_mag, odd_mag) = match class {
                QuartetClass::Pair12_34 => (p_a.abs().max(p_c.abs()), p_b.abs()),
                QuartetClass::Pair13_24 => (p_b.abs().max(p_c.abs()), p_a.abs()),
                QuartetClass::Pair14_23 => (p_b.abs().max(p_a.abs()), p_c.abs()),
                QuartetClass::Degenerate => unreachable!(),
            };
            if pair_mag > odd_mag * (1.0 + tol.eq_tol) {
                return Err(Error::NotTreeDecomposable {
                    quartet: idx,
                    detail: format!(
                        "matched pairing {class} has product magnitude {pair_mag} above the unmatched product {odd_mag}"
                    ),
                });
            }
            Ok(class)
        }
        // Two or three equalities: merge conservatively instead of inventing
        // an internal edge with |rho| close to 1.
        _ => Ok(QuartetClass::Degenerate),
    }
}
