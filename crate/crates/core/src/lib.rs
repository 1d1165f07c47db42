//! Explicit oblique boundary feedback stabilization of the linearized
//! (Oseen–Stokes) flow in a periodic channel.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: Chebyshev–Gauss–Lobatto collocation on `[0, 1]`, clamped
//!   basis recombination and Clenshaw–Curtis quadrature.
//! * [`channel`]: base flow `U(y) = C(y² − y)`, Fourier-mode fields and the
//!   energy inner product.
//! * [`spectrum`]: direct and adjoint Orr–Sommerfeld pencils, spurious-mode
//!   filtering, hypothesis checks and biorthonormalization.
//! * [`controller`]: trace Gram matrix, gain selection and the complex, real
//!   and single-wall feedback laws.
//! * [`lift`]: the shifted Dirichlet map and the duality identity it obeys.
//! * [`sim`] and [`galerkin`]: modal closed-loop simulation, decay-rate fits
//!   and the quadratic Galerkin surrogate.
//! * [`config`], [`pipeline`] and [`export`]: run configuration, end-to-end
//!   orchestration and artifact writers used by the `oseen-stab` binary.

pub mod channel;
pub mod config;
pub mod controller;
pub mod error;
pub mod export;
pub mod galerkin;
pub mod lift;
pub mod linalg;
pub mod pipeline;
pub mod sim;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
