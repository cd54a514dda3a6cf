//! Periodic linear cocycles: spectral and domination analysis, synthesis of
//! small isotopy paths with certificates, and a numerical laboratory for
//! radial connections between linear maps.

pub mod cli;
pub mod cocycle;
pub mod connection;
pub mod domination;
pub mod error;
pub mod generate;
pub mod linalg;
pub mod path;
pub mod planar;
pub mod spectral;
pub mod synthesis;
pub mod verification;

pub use cocycle::{bound_of, dist_cocycle, operator_norm, PeriodicCocycle};
pub use error::{Error, Result};
