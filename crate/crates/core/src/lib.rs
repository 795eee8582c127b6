//! Moment matrices of Wigner distributions and the generalized uncertainty
//! principle `M_J >= 0`.
//!
//! The crate is organised around five pieces:
//!
//! - [`weyl`]: Weyl-ordered monomials `T_{m,n}`, their products and the
//!   `xi_J` basis vectors.
//! - [`symplectic`]: spin-`j` representations of `Sp(2,R)` and their action
//!   on moment tables.
//! - [`moments`]: moment tables from Gaussian states, Fock-basis density
//!   matrices and sampled Wigner grids, plus classical Hankel checks.
//! - [`gup`]: assembly of `M_J`, eigenvalue certification, the nested Schur
//!   reduction and Schwartz-type residuals.
//! - [`fock`]: a slow, brute-force truncated Fock-space reference used to
//!   validate everything above.
//!
//! All quantities are dimensionless; `hbar` is a runtime parameter and
//! defaults to 1.

#![forbid(unsafe_code)]

mod error;
mod half;
mod linalg;

pub mod fock;
pub mod gup;
pub mod moments;
pub mod symplectic;
pub mod weyl;

pub use error::{Error, Result};
pub use half::HalfInt;

pub use fock::{
    generators, oracle_product_check, weyl_operator, TruncatedOperator, WeylOperatorBasis,
};
pub use gup::{
    build_moment_matrix, check_psd, max_certified_order, schur_reduce, schur_reduce_with,
    schwartz_residual, uncertainty_matrix, CertifiedOrder, GupReport, MomentMatrix, SchurChain,
    SchurLevel, SchurStatus, Verdict, DEFAULT_PSD_TOL,
};
pub use moments::{
    gaussian_moments, hankel_matrix, hankel_min_eigenvalue, moments_from_fock_dm,
    moments_from_grid, moments_with_basis, validate_table, FockDensityMatrix, GaussianState,
    GridMoments, GridOptions, MomentTable, ValidationReport, WignerGrid,
};
pub use symplectic::{block_rep, spin_rep, transform_moments, SpinRepMatrix, SymplecticMap};
pub use weyl::{commutator, weyl_product, xi_vector, MonomialIndex, WeylPolynomial, XiVector};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Largest total degree for which product coefficients and moments are
/// supported.
pub const MAX_DEGREE: u32 = 32;
