//! Reconstruct latent-variable Gaussian tree models from the pairwise
//! correlations of their observed leaf variables.
//!
//! A latent tree model is a tree whose internal (hidden) nodes are
//! standardized Gaussian variables of degree at least 3 and whose leaves are
//! the observed variables, each edge carrying a correlation. The correlation
//! between two leaves is the product of the edge correlations along the path
//! connecting them, which makes the whole model identifiable from the leaf
//! correlation matrix alone — up to the sign of each hidden variable.
//!
//! The crate provides:
//!
//! - [`star`]: the three-variable building block — when do three variables
//!   admit a single hidden common cause, and with what loadings?
//! - [`quartet`]: the four-variable test that decides which pairs of leaves
//!   sit on the same side of an internal edge.
//! - [`builder`]: topology reconstruction by incremental leaf insertion,
//!   plus the overdetermination [`builder::consistency_check`].
//! - [`params`]: edge-correlation recovery in a canonical sign gauge.
//! - [`oracle`]: the forward direction — exact implied correlations via two
//!   independent routes, ancestral sampling, and correlation estimation —
//!   used to round-trip everything above.
//! - [`io`] and [`cli`]: CSV/JSON formats and the command-line pipelines.

pub mod builder;
pub mod cli;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod params;
pub mod quartet;
pub mod star;

pub use builder::{build_topology, consistency_check, topology_isomorphic, Topology};
pub use error::{Error, Result};
pub use model::{
    tree_is_valid, validate_correlation_matrix, CorrelationMatrix, CovarianceMatrix, Edge, Leaf,
    LinearGaussian, NodeRef, QuartetClass, Tolerances, TreeModel,
};
pub use oracle::{
    estimate_correlations, joint_covariance, leaf_correlations, marginal_leaf_block, sample,
    SampleMatrix,
};
pub use params::{assemble_tree_model, leaf_loading, recover_internal_edge};
pub use quartet::{classify_quartet, classify_quartet_of, cross_products};
pub use star::{
    is_star_decomposable, solve_star_loadings, star_conditionals, StarLoadings, StarRejection,
    StarSolution, StarVerdict,
};
