//! Configuration files, observables CSV and VTK snapshots.

pub mod config;
pub mod csv;
pub mod vtk;

pub use config::{parse_config, SimulationConfig};
