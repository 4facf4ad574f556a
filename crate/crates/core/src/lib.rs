//! Sub-Riemannian geometry on SE(2) and SE(3) for tracking and grouping
//! curvilinear structures.
//!
//! The crate provides exact group operations and their nilpotent
//! approximations ([`se2`], [`se3`]), a metric family with a cost model
//! ([`metrics`]), an anisotropic fast-marching solver with arc-length
//! tracking and key-point detection ([`eikonal`]), a directional lift of
//! binary masks ([`lifting`]), greedy perceptual grouping ([`grouping`]),
//! synthetic random-walk volumes ([`synthesis`]), and a ζ-calibration harness
//! ([`validation`]). Raw fields are exchanged through [`io`].

pub mod eikonal;
pub mod error;
pub mod grid;
pub mod grouping;
pub mod io;
pub mod lifting;
pub mod metrics;
pub mod se2;
pub mod se3;
pub mod synthesis;
pub mod validation;

pub use error::{Error, Result};

/// A logarithm together with a flag for inputs on (or numerically at) the
/// cut locus, where the principal branch is not unique.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Logarithm<C> {
    pub coords: C,
    pub near_cut_locus: bool,
}
