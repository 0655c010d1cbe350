//! Seeded convergence sweeps and bound suites with CSV output.

mod bounds;
mod config;
mod parallel;
mod report;
mod scenarios;

pub use bounds::*;
pub use config::*;
pub use parallel::default_workers;
pub use report::*;
pub use scenarios::*;
