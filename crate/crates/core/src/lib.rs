//! Mated-CRT maps and the random-geometry toolkit around them.
//!
//! The crate builds mated-CRT planar maps from correlated Brownian paths,
//! embeds them with the Tutte embedding, analyzes random walks on them through
//! exact electrical-network computations, and simulates Liouville Brownian
//! motion on lattice Gaussian free field backgrounds. The [`experiments`]
//! module runs the scaling studies and writes CSV, JSON and SVG artifacts.

pub mod brownian;
pub mod electrical;
pub mod error;
pub mod experiments;
pub mod field;
pub mod lbm;
pub mod linalg;
pub mod map;
pub mod rng;
pub mod stats;
pub mod tutte;

pub use error::{Error, Result};
