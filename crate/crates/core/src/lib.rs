//! Spectral Galerkin and collocation solvers for pseudo-parabolic equations
//! `c v_t - (a v_xt)_x = -(alpha v_x)_x + beta v_x + gamma` on `(-1, 1)` with
//! homogeneous Dirichlet conditions, in Jacobi-weighted spaces.
//!
//! The guide in `book/` walks through every module; its code blocks run as
//! doc-tests of this crate.

// `!(x <= tol)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod expr;
pub mod forms;
pub mod jacobi;
pub mod solver;
pub mod spaces;
pub mod study;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/forms.md")]
    mod forms {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
}
