pub mod batch;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod error;
pub mod policy;
pub mod rng;
pub mod sysid;
pub mod table;
pub mod train;

pub use error::{Error, Result};
