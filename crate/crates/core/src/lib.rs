#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Holomorphic-martingale construction of bounded analytic corrections.
//!
//! Given a bounded real function `u` on the unit circle, the [`correction`]
//! module builds an analytic `g` (only nonnegative Fourier modes) and a set
//! `E` of large measure on which `u = Re g` up to a geometric residual. The
//! bounded analytic pieces come from stopping complex Brownian motion when
//! the analytic extension of `u + i ũ` leaves the disk `{|w| <= λ}`
//! ([`martingale`]); the deterministic Fourier side lives in [`spectral`]
//! and the classical maximal-function diagnostics in [`maximal`].
//!
//! Path simulation runs on rayon when the `parallel` feature is enabled
//! (the default) and falls back to a sequential loop otherwise. Results are
//! bit-identical either way.

pub mod correction;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod martingale;
pub mod maximal;
pub mod par;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
