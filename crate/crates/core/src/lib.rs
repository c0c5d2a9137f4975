// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod analysis;
pub mod boundary;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod phase;
pub mod resolvent;
pub mod scalar;
pub mod scenario;
pub mod series;
pub mod spectral;
pub mod vgrid;

pub use error::{Error, Result};
