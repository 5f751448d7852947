//! Plane normal reconstruction from a single specular isophote when the
//! light source is co-located with the camera.
//!
//! The isophotes of a Phong lobe on a plane are concentric circles under
//! the viewpoint. Their image is an ellipse, and backprojecting that
//! ellipse through calibrated intrinsics yields the plane normal up to a
//! two-fold ambiguity.

pub mod error;
pub mod extraction;
pub mod geometry;
pub mod harness;
pub mod image;
pub mod overlay;
pub mod reconstruction;
pub mod selftest;
pub mod simulator;
pub mod specular;

pub use error::{Error, Result};
