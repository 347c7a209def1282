//! Land-displacement time-series inversion, multimodal grid fusion and
//! regression of 10-layer coarse-grain composition from displacement
//! histories.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod evalstat;
pub mod fuse;
pub mod gridstore;
pub mod learn;
pub mod rng;
pub mod sbas;
pub(crate) mod smooth;
pub mod synthgen;

pub use error::{Error, Result};
