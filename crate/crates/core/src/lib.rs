pub mod cli;
pub mod clustering;
pub mod config;
pub mod data;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod losses;
pub mod memory;
pub mod numcore;
pub mod optim;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
