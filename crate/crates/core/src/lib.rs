//! Computational laboratory for harmonic measure on bounded star-shaped
//! domains.
//!
//! The crate measures the quantities that relate the Poisson kernel of a
//! domain to its geometry: walk-on-spheres harmonic measure, Green function
//! values and gradients, Reifenberg flatness of the boundary, Ahlfors density
//! ratios, the BMO oscillation of the normal, and the inclusion radii
//! `B(0, R1) ⊂ Ω ⊂ B(0, R2)`. The `verify` module turns these measurements
//! into pass/fail checks with explicit margins.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only adds
//! thread parallelism through rayon; results are identical with or without it.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod domain;
pub mod error;
pub mod flatness;
pub mod geometry;
pub mod math;
pub mod par;
pub mod potential;
pub mod rng;
pub mod sphere;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Hyperplane, Point, PointSet, P3};
