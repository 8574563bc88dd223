//! Robust two-echelon truck-and-drone routing under budgeted demand
//! uncertainty.
//!
//! The solver alternates column generation over drone routes with a
//! worst-case demand search, on top of the small LP/MIP engine in `linopt`.
//! Start with [`instgen::generate`] or [`io::read_instance`], then
//! [`driver::run`].

pub mod driver;
pub mod error;
pub mod experiment;
pub mod instgen;
pub mod io;
pub mod master;
pub mod metrics;
pub mod model;
pub mod pricing;
pub mod reeval;
pub mod route;
pub mod scenariogen;

pub use driver::{run, RunConfig, RunReport, RunStatus};
pub use error::{Error, Result};
pub use model::{build_reachability, validate_instance, Instance, Reachability};
pub use route::DroneRoute;
pub use scenariogen::Scenario;
