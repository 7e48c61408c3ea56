//! Computer algebra for exponential polynomials on the integer lattice `Z^d`.
//!
//! The crate works with functions of the form `f(x) = Σ_j p_j(x) λ_j^x`
//! where each `p_j` is a polynomial in the lattice coordinates and each
//! `λ_j ∈ (C \ {0})^d` is an exponential witness.  It provides
//!
//! * modified difference operators `Δ_{φ;y} f(x) = f(x+y) − φ(y) f(x)` and
//!   products/powers thereof, both on symbolic functions and on finite boxes
//!   of samples ([`diffops`]),
//! * annihilation certificates that decide whether a family of such
//!   operators kills a function, and searches for minimal orders and
//!   admissible witness values ([`montel`]),
//! * finite-dimensional invariant subspaces spanned by exponential
//!   monomials, with exact linear algebra over the Gaussian rationals
//!   ([`subspace`]),
//! * recovery of the exponential-polynomial decomposition of a function
//!   from samples on a box, via Hankel annihilators and spectral
//!   projections ([`recover`]),
//! * slow, independent reference implementations used to cross-check the
//!   fast paths, plus seeded random instance generation ([`oracle`]).
//!
//! Scalars are either exact Gaussian rationals or `f64` complex numbers;
//! the two backends share one [`scalar::Scalar`] type and every floating
//! comparison goes through an explicit tolerance.

pub mod diffops;
pub mod error;
pub mod lattice;
pub mod montel;
pub mod oracle;
pub mod poly;
pub mod recover;
pub mod sampled;
pub mod scalar;
pub mod selftest;
pub mod subspace;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
