//! Statistical region-based active contours.
//!
//! Regions are modelled by exponential-family densities whose parameters are
//! re-estimated from the regions themselves. The contour moves with the speed
//! obtained from the derivative of the region `-log`-likelihood with respect to
//! the domain, which for maximum-likelihood estimates reduces to a plain
//! log-density ratio and for the Rayleigh moments estimator picks up an extra
//! additive term.
//!
//! Modules:
//! - [`expfam`]: families, sufficient statistics, ML and moments estimation, sampling.
//! - [`energy`]: region energies, speed laws, Bhattacharyya distance.
//! - [`levelset`]: level-set representation and evolution.
//! - [`synth`]: phantoms, contrast calibration, noise corruption.
//! - [`eval`]: FPF/TPF and the benchmark sweep.
//! - [`io`]: graymap and text-grid files.
//! - [`config`]: key=value run configuration.

pub mod config;
pub mod energy;
pub mod error;
pub mod eval;
pub mod expfam;
pub mod grid;
pub mod io;
pub mod levelset;
pub mod synth;

pub use energy::{EnergyReport, SpeedLaw};
pub use error::{Error, Result};
pub use expfam::{Estimator, ExpFamily, Family, ParamVec, RegionEstimate, RegionStats};
pub use grid::{Grid, Mask, ScalarField};
pub use levelset::{EvolveConfig, EvolveStatus, Initialization, LevelSetState, Segmentation};
