//! Scenario files, CSV/SVG output and the command-line front end for
//! [`leadcons_core`].

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;

pub use error::AppError;
pub use scenario::Scenario;
