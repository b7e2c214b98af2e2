//! Woven-fabric reflectance toolkit: a two-layer microflake fabric BSDF with
//! an azimuth-aligned multiple-scattering lobe, a two-light capture renderer,
//! a Monte Carlo slab reference, and an inverse-rendering parameter fitter.

pub mod fabric;
pub mod fit;
pub mod image;
pub mod layer;
pub mod math;
pub mod microflake;
pub mod oracle;
pub mod render;
pub mod weave;

pub use fabric::{BsdfValue, FabricEval, FabricParams, YarnParams};
pub use layer::MultiShadowing;
pub use math::{Rgb, Vec3};
pub use weave::{Pattern, SurfacePoint, WeaveMap, YarnKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeftError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("image format: {0}")]
    ImageFormat(String),
    #[error("fit diverged: {0}")]
    FitDiverged(String),
}

pub type Result<T> = std::result::Result<T, WeftError>;
