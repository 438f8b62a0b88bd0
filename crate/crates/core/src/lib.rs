//! Temporal cluster matching: dates when a structure first appears inside a
//! footprint polygon, given a time series of co-registered images.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod geom_raster;
pub mod io;
pub mod matching;
pub mod pipeline;
pub mod seed;
pub mod supervised;
pub mod synthgen;

pub use error::{Result, TcmError};
