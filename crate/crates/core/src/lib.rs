//! Sub-Riemannian geometry of Reiter-Heisenberg groups `G_qp`.
//!
//! The group lives on `R^{q×p} × R^p × R^q` with the law
//!
//! ```text
//! (x, y, t)·(ξ, η, τ) = (x + ξ, y + η, t + τ + ½(xη − ξy))
//! ```
//!
//! and carries the left-invariant sub-Riemannian structure that makes the
//! frame `X_αk`, `Y_j` orthonormal. Everything here is closed form where the
//! geometry allows it:
//!
//! - [`extremal`]: normal geodesics from the origin, their controls, cut
//!   times `2π/|τ|`, Euclidean-line and abnormal cases, and an RK4
//!   Hamiltonian flow used as an independent check.
//! - [`cutlocus`]: membership of a point `(x, 0, t)` in the cut locus, the
//!   distance `√(|x|² + 4π|P⊥_{Im x} t|)`, minimizer multiplicity and the
//!   covector family reaching a cut point.
//! - [`conjugate`]: determinant test for conjugate times on the cylinder of
//!   fixed horizontal speed, the `p = 1` criterion and the `M̂` matrix.
//! - [`oracle`]: brute-force distance estimates. Multistart shooting
//!   inverts the geodesic formula; direct minimization over
//!   piecewise-constant controls uses no closed form at all.
//!
//! [`matlin`] and [`group`] hold the small linear algebra and the group
//! operations everything else is built on.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugate;
pub mod cutlocus;
mod error;
pub mod extremal;
pub mod group;
pub mod matlin;
pub mod oracle;

pub use error::{Error, Result};
pub use extremal::{Covector, CutTime};
pub use group::{GroupPoint, GroupShape, PiecewiseControl};
pub use matlin::{HorizontalPair, Mat, Vector};

/// Default relative cutoff for singular values (rank decisions on `x`, `ξ`).
pub const DEFAULT_SV_TOL: f64 = 1e-10;
