//! Star decomposability for triplets: test whether three correlated Gaussian
//! variables admit a single hidden center, and if so solve for the loadings
//! and the conditional leaf densities.
//!
//! The decomposability test splits into a sign condition (the product of the
//! three correlations is positive) and a magnitude condition (each
//! correlation dominates the product of the other two in absolute value).
//! The magnitude form is forced by requiring real loadings no larger than 1;
//! the signed form would wrongly reject valid triplets with two negative
//! correlations such as (-0.4, -0.4, 0.32).

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{LinearGaussian, Tolerances};

/// Why a triplet fails the star-decomposability test. Pairs are local
/// indices into the triplet (0, 1, 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StarRejection {
    /// The product of the three correlations is not positive, so no sign
    /// assignment of loadings can reproduce them.
    NonPositiveProduct { product: f64 },
    /// |rho_jk| < |rho_ji| * |rho_ik|: the implied loading for the remaining
    /// leaf would exceed 1.
    MagnitudeInequality {
        pair: (usize, usize),
        value: f64,
        bound: f64,
    },
}

impl fmt::Display for StarRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StarRejection::NonPositiveProduct { product } => {
                write!(
                    f,
                    "sign condition: correlation product {product} is not positive"
                )
            }
            StarRejection::MagnitudeInequality { pair, value, bound } => {
                write!(
                    f,
                    "magnitude inequality: |rho({},{})| = {} below the product of the other two = {}",
                    pair.0,
                    pair.1,
                    value.abs(),
                    bound
                )
            }
        }
    }
}

/// Outcome of the decomposability test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StarVerdict {
    Decomposable,
    Rejected(StarRejection),
}

impl StarVerdict {
    pub fn is_decomposable(&self) -> bool {
        matches!(self, StarVerdict::Decomposable)
    }

    pub fn rejection(&self) -> Option<StarRejection> {
        match self {
            StarVerdict::Decomposable => None,
            StarVerdict::Rejected(r) => Some(*r),
        }
    }
}

/// Loadings of the three leaves on the hidden center. The sign convention
/// fixes the first loading positive; the hidden variable's sign is not
/// identifiable from the correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarLoadings {
    pub values: [f64; 3],
    /// Set when a loading magnitude reaches 1 within `unit_tol`: the hidden
    /// center coincides with that leaf (local index).
    pub degenerate_with_leaf: Option<usize>,
}

/// Full star decomposition: loadings plus the three conditional leaf
/// densities given the standardized (mean 0, variance 1) hidden center.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSolution {
    pub loadings: [f64; 3],
    pub leaf_conditionals: [LinearGaussian; 3],
    pub degenerate_with_leaf: Option<usize>,
}

fn check_triplet_preconditions(r: [f64; 3], tol: &Tolerances) -> Result<()> {
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if r[k].abs() > 1.0 {
            return Err(Error::CorrelationOutOfRange { i, j, value: r[k] });
        }
        if r[k].abs() < tol.dep_floor {
            return Err(Error::BelowDependencyFloor {
                i,
                j,
                value: r[k],
                floor: tol.dep_floor,
            });
        }
    }
    Ok(())
}

/// Test whether correlations (rho_12, rho_13, rho_23) support a hidden
/// center. Returns the verdict with the first violated condition; errors
/// only on precondition violations (out-of-range or vanishing correlations).
pub fn is_star_decomposable(r12: f64, r13: f64, r23: f64, tol: &Tolerances) -> Result<StarVerdict> {
    check_triplet_preconditions([r12, r13, r23], tol)?;

    let product = r12 * r13 * r23;
    if product <= 0.0 {
        return Ok(StarVerdict::Rejected(StarRejection::NonPositiveProduct {
            product,
        }));
    }

    // Each pair's correlation must dominate the product of the other two.
    let checks = [
        ((0usize, 1usize), r12, r13 * r23),
        ((0, 2), r13, r12 * r23),
        ((1, 2), r23, r12 * r13),
    ];
    for &(pair, value, others) in &checks {
        if value.abs() < others.abs() {
            return Ok(StarVerdict::Rejected(StarRejection::MagnitudeInequality {
                pair,
                value,
                bound: others.abs(),
            }));
        }
    }

    Ok(StarVerdict::Decomposable)
}

/// Solve for the loadings of a decomposable triplet:
/// |rho_1w| = sqrt(|rho_12 rho_13 / rho_23|), taken positive, and
/// rho_2w = rho_12 / rho_1w, rho_3w = rho_13 / rho_1w. A loading whose
/// magnitude reaches 1 within `unit_tol` marks the star degenerate (the
/// center coincides with that leaf); this is reported, not rejected.
pub fn solve_star_loadings(r12: f64, r13: f64, r23: f64, tol: &Tolerances) -> Result<StarLoadings> {
    match is_star_decomposable(r12, r13, r23, tol)? {
        StarVerdict::Decomposable => {}
        StarVerdict::Rejected(reason) => {
            return Err(Error::NotStarDecomposable {
                triplet: [0, 1, 2],
                reason,
            })
        }
    }

    let l1 = (r12.abs() * r13.abs() / r23.abs()).sqrt().min(1.0);
    let l2 = (r12 / l1).clamp(-1.0, 1.0);
    let l3 = (r13 / l1).clamp(-1.0, 1.0);
    let values = [l1, l2, l3];
    let degenerate_with_leaf = values.iter().position(|v| v.abs() >= 1.0 - tol.unit_tol);
    Ok(StarLoadings {
        values,
        degenerate_with_leaf,
    })
}

/// Conditional leaf densities for given loadings: with the center w
/// standardized, f(x_i | w) has slope rho_iw * sd_i, intercept mu_i and noise
/// variance var_i (1 - rho_iw^2); the prior f(w) is standard normal.
pub fn star_conditionals(
    loadings: &StarLoadings,
    means: [f64; 3],
    variances: [f64; 3],
) -> Result<StarSolution> {
    for (i, &v) in variances.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::DegenerateVariable { index: i });
        }
    }
    let mut conditionals = [LinearGaussian::new(0.0, 0.0, 0.0); 3];
    for i in 0..3 {
        let rho = loadings.values[i];
        conditionals[i] = LinearGaussian {
            slope: rho * variances[i].sqrt(),
            intercept: means[i],
            noise_var: (variances[i] * (1.0 - rho * rho)).max(0.0),
        };
    }
    Ok(StarSolution {
        loadings: loadings.values,
        leaf_conditionals: conditionals,
        degenerate_with_leaf: loadings.degenerate_with_leaf,
    })
}
