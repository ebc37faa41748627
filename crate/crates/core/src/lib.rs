//! Certified total-variation bounds for powers of positive definite functions
//! on finitely generated groups.
//!
//! The crate is organised bottom-up:
//! - [`groups`]: normal forms and sphere enumeration for free, Coxeter and
//!   free-product groups.
//! - [`states`]: positive definite functions (length, counit, free-product,
//!   radial) with decay certificates and diagnostics.
//! - [`spectra`]: growth and cogrowth statistics.
//! - [`bounds`]: upper and lower bounds on `‖φ^k − δ_e‖` and cut-off scans.
//! - [`oracle`]: brute-force recomputation of the closed forms above.
//! - [`cli`]: configuration, CSV output and the command-line driver.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod groups;
pub mod oracle;
pub mod spectra;
pub mod states;

pub use error::{Error, Result};
pub use groups::{GroupElement, GroupKind, GroupModel, Letter};
