//! Structure-aware morphable model of facial detail displacement maps:
//! detail rasters, wrinkle lines and distance fields, a joint latent model
//! with expression and age transforms, an editing session and an HTTP
//! service.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod cli;
pub mod edit;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod io;
pub mod losses;
pub mod mesh;
pub mod model;
pub mod raster;
pub mod service;
pub mod structure;
pub mod synth;

pub use error::{Error, Result};
