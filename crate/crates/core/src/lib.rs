//! Leader-follower consensus and distributed observers over switching,
//! possibly disconnected, undirected networks.
//!
//! The crate is `no_std` (with `alloc`). File formats, plotting and the
//! command-line front end live in the `leadcons` crate.

#![no_std]
// Index loops mirror the matrix algebra; NaN must fail the `!(x > y)` guards.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod netgraph;
pub mod numkit;
pub mod spectral;
pub mod switchsim;
pub mod synthesis;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
