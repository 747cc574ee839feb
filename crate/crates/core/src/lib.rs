//! Image restoration with a nonconvex group low-rank prior solved by ADMM.
//!
//! The pipeline: degrade (or load) an observation with one of the operators
//! in [`degradation`], then [`admm::restore`] alternates a data-fidelity
//! update with the patch-group denoiser in [`denoiser`], whose groups are
//! built by [`patch_groups`] and shrunk by [`shrinkage`].

pub mod admm;
pub mod degradation;
pub mod denoiser;
pub mod error;
pub mod imaging;
pub mod params;
pub mod patch_groups;
pub mod shrinkage;
pub mod task;
pub mod verify;

pub use error::{RestoreError, Result};

// Links the system OpenBLAS that provides the LAPACK routines.
use openblas_src as _;
