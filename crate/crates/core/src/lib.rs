//! Depth reconstruction from multi-view normal and reflectance maps.
//!
//! Normals and reflectance are mapped to simulated Lambertian radiance under a
//! per-pixel light triplet ([`reparam`]). A single photometric consistency loss
//! over those radiances is then minimised per reference pixel by sweeping depth
//! hypotheses ([`sweep`]), with patch geometry that is fronto-parallel,
//! slanted, or integrated exactly from the reference normals
//! ([`integration`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and the parallel driver live in the `radiant-sweep` crate.

#![no_std]
// Range checks are written `!(x >= lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod geometry;
pub mod integration;
pub mod metrics;
pub mod raster;
pub mod reparam;
pub mod search;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, CameraPose, Pixel, View, ViewMaps};
pub use raster::Raster;
pub use reparam::{LightTriplet, RadianceVec, ReflectanceVec};

pub use nalgebra::{Matrix3, Vector3};
