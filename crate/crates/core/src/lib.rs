//! Samplets: multiresolution bases with vanishing moments on scattered data.
//!
//! The crate covers the whole pipeline: cluster trees, samplet
//! construction, the fast samplet transform, coefficient thresholding and
//! adaptive subsampling, samplet compression of kernel matrices, and
//! regularized interpolation and l1 basis pursuit in samplet coordinates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod cluster_tree;
pub mod compression;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod moments;
pub mod signal;
pub mod solvers;
pub mod transform;

pub use basis::{build_samplet_basis, build_samplet_basis_with, BasisOptions, SampletBasis};
pub use cluster_tree::{build_cluster_tree, BoundingBox, Cluster, ClusterTree, PointCloud};
pub use error::{Error, Result};
pub use transform::{forward_transform, inverse_transform, CoefficientVector};
