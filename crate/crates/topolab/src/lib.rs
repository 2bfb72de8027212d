//! Finite-element laboratory for topological state derivatives.
//!
//! The crate solves three families of elliptic problems on a fixed hold-all
//! domain with P1 elements (Poisson with piecewise sources, a monotone
//! semilinear reaction-diffusion problem and a two-phase transmission
//! problem), perturbs the design region by small dilated seeds and compares
//! the resulting differential quotients against limits obtained from
//! measure-data solves and from singular-part splittings.

pub mod error;
pub mod fem;
pub mod functionals;
pub mod geometry;
pub mod kernels;
pub mod mesh;
pub mod integrate;
pub mod rates;
pub mod state_derivative;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
