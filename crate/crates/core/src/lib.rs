//! Finite-element level-set active contours on Delaunay graphs.

pub mod bench;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod fem;
pub mod gar;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod models;
pub mod narrowband;
pub mod solver;
pub mod synthetic;

pub use error::{Error, Result};
