//! Command-line sweeps over the collective-bath and cavity models.

pub mod config;
pub mod dataset;
pub mod plot;
pub mod sweeps;
