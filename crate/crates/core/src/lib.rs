//! Detection of pairwise statistical interactions between two complementary
//! data views observed on the same samples.
//!
//! Each view is compressed along a hierarchical clustering of its variables:
//! the tree is flattened into all of its groups, every group receives a gap
//! weight derived from how long it survives in the tree, and each group is
//! summarised into a single supervariable column. A weighted Lasso then
//! selects supervariables per view, and every cross-view pair of selected
//! supervariables is screened for an interaction effect in a small linear
//! model with multiplicity-adjusted t-tests.
//!
//! The crate also ships the simulation generators (block-correlated SNP-like
//! genotypes, Poisson-log-normal counts, interaction phenotypes), the
//! precision/recall evaluation harness with an unweighted-compression
//! baseline, a Monte-Carlo verifier for the averaged-estimator accuracy
//! bound, and a greedy height-pair explorer over the two hierarchies.

pub mod cluster;
pub mod compress;
pub mod error;
pub mod evaluate;
pub mod explore;
pub mod io;
pub mod lasso;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod simulate;
pub mod testing;

pub use error::{Error, Result};
pub use model::{CompactModel, Dataset, GroupStructure, Response, VariableInteractionMatrix};
