//! Numerical toolkit for Lyapunov instability of equilibria of magnetic
//! Lagrangian systems `L = ½‖v‖² + μ(v) − U(x)`.
//!
//! * [`expr`] parses scalar expressions and differentiates them with duals.
//! * [`geometry`] evaluates metrics, Riemannian gradients, Christoffel symbols
//!   and magnetic tensors at points.
//! * [`dynamics`] integrates the (ε-rescaled) Euler–Lagrange equations with
//!   energy and confinement monitors.
//! * [`charts`] builds coordinates adapted to a regular function by flowing
//!   its level sets along `∇f/‖∇f‖²`.
//! * [`certify`] decides the growth conditions `dU(∇f) = O(U)` and
//!   `‖ι_{∇f} dμ‖ = O(U^{1/2})` on logarithmic potential shells.
//! * [`harness`] runs ε-sweeps, detects escapes and ships the example corpus.

// `!(x <= bound)` deliberately treats NaN as a failure; index loops mirror tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod charts;
pub mod dynamics;
pub mod expr;
pub mod geometry;
pub mod harness;
pub mod ode;
pub mod par;

pub use expr::{parse, Expr, ScalarField};
pub use geometry::{MetricSpec, OneForm};
