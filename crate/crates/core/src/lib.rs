//! Maximum likelihood estimation for k-monotone densities.
//!
//! A k-monotone density on the positive half-line is a scale mixture of the
//! beta-type kernel `k (y - x)_+^(k-1) / y^k`. This crate fits the mixing
//! measure by support reduction and checks the result against the exact
//! optimality characterization: the support-plane spline
//! `p(y) = y^k - sum_i v_i (y - X_(i))_+^(k-1)` must be nonnegative and vanish
//! at every atom, and the atoms must interlace with the order statistics.
//!
//! Modules:
//! - [`kernel`]: the kernel, mixture density/CDF and exact sampling.
//! - [`geometry`]: fitted vectors, the directional derivative and the certificate.
//! - [`splinezero`]: piecewise polynomials, zero counting with multiplicities,
//!   total-positivity determinants and interlacing witnesses.
//! - [`solver`]: support reduction with exact weight and location polishing.
//! - [`cli`]: file formats, the JSON result document and the command drivers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod solver;
pub mod splinezero;

pub use error::{Error, Result};
pub use geometry::{certify, Certificate, ConditionReport};
pub use kernel::{Atom, KMonotoneModel, MixingMeasure, Sample};
pub use solver::{solve_mle, SolveResult, SolverConfig};
pub use splinezero::{PiecewisePolynomial, Poly, ZeroCount};
