//! Shift-splitting preconditioners for asymmetric saddle point systems.
//!
//! The crate covers the whole pipeline from assembly to verification:
//!
//! - [`sparse`] and [`matrix_market`]: CSR storage, Kronecker assembly, I/O.
//! - [`dense`]: LU, nonsymmetric eigenvalues, norm estimation and
//!   root-location predicates for desk-scale checks.
//! - [`saddle`]: the block system `[A Bᵀ; −C 0]`, the Stokes generator and
//!   the `α_est = ‖BᵀC‖₂/‖A‖₂` heuristic.
//! - [`krylov`]: CG, restarted GMRES and flexible GMRES.
//! - [`precond`]: SS, RSS, PPSS and augmentation preconditioners.
//! - [`ss_iteration`]: the stationary shift-splitting iteration and its
//!   convergence analysis.
//! - [`spectrum`]: spectra of preconditioned matrices.
//! - [`bench`]: the experiment harness behind the `ssbench` binary.

pub mod bench;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod matrix_market;
pub mod operator;
pub mod precond;
pub mod saddle;
pub mod sparse;
pub mod spectrum;
pub mod ss_iteration;

pub use error::{Error, Result};
pub use operator::LinearOperator;
pub use saddle::{build_stokes, split_external, SaddleSystem};
pub use sparse::CsrMatrix;
