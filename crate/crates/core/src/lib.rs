#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod asymptotics;
pub mod chain;
pub mod error;
pub mod exact;
pub mod intervals;
pub mod math;
pub mod montecarlo;
pub mod params;
pub mod protocol;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use params::SplitParams;
