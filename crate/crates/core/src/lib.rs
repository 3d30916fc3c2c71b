//! Contour dynamics for planar aggregation patches.
//!
//! A patch is a bounded domain of uniform density whose boundary moves in the
//! velocity field induced by the Newtonian potential of the domain itself.
//! Under the time rescaling `s = log(1/(1 - t))` the patch density stays equal
//! to one while the domain contracts, with area decaying exactly like
//! `exp(-s)`. Everything in this crate works in the rescaled time `s`; the
//! [`exact`] module provides converters back to the original time `t`.
//!
//! Module map:
//!
//! * [`kernels`]: the Newtonian kernel, its gradient, and the principal-value
//!   second-derivative kernels in dimensions 2 and 3, plus hemisphere
//!   quadrature over their angular parts.
//! * [`geometry`]: closed marker curves, normals, metrics, arc-length
//!   redistribution, winding numbers, and Holder-type seminorms.
//! * [`shapes`]: initial boundary builders (circle, ellipse, trigonometric
//!   perturbations of a circle).
//! * [`contour`]: the boundary integral for the marker velocity and the RK4
//!   evolution loop with per-step diagnostics.
//! * [`field`]: off-boundary evaluation of the velocity and its gradient,
//!   with an independent principal-value cross-check.
//! * [`levelset`]: transported defining functions, backward flow tracing on a
//!   recorded history, gradient jump measurement, and the graph-patch
//!   regularity ratio.
//! * [`exact`]: closed-form disc and ellipse solutions used as oracles.

pub mod contour;
pub mod error;
pub mod exact;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod levelset;
pub mod shapes;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;

pub(crate) mod gauss;
