//! Two-zone crowd model of stressed and non-stressed pedestrians.
//!
//! Each zone carries two densities on a cell-centered grid. They diffuse,
//! drift toward a target, exchange behaviour locally and migrate between
//! zones through localized kernels. Two time-dependent controls calm
//! stressed people at departure and on arrival.
//!
//! ```
//! use stressnet::{io::config::SimulationConfig, stepper::{Model, RunSchedule, run}};
//!
//! let mut cfg = SimulationConfig::default();
//! cfg.zone1.nx = 16;
//! cfg.zone1.ny = 16;
//! cfg.zone2.nx = 16;
//! cfg.zone2.ny = 16;
//! cfg.numerics.t_end = 1.0;
//! cfg.output.snapshot_times = vec![];
//! let model = Model::from_config(&cfg)?;
//! let out = run(&model, model.initial_state(&cfg)?, &RunSchedule::from_config(&cfg))?;
//! assert!((out.last().v - 1.0).abs() < 1e-9);
//! # Ok::<(), stressnet::Error>(())
//! ```

pub mod control;
pub mod convergence;
pub mod error;
pub mod grid;
pub mod io;
pub mod kinetics;
pub mod migration;
pub mod observables;
pub mod operators;
pub mod oracle;
pub mod scenario;
pub mod stepper;

pub use error::{ConfigError, Error, Result};
pub use grid::{integrate, Field, Grid, ZoneId};
pub use stepper::{Model, NetworkState, ZoneState};

// The guide's code samples run as doctests so the book cannot drift.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/discretization.md")]
pub mod discretization {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/migration.md")]
pub mod migration_guide {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}
