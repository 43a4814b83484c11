pub mod attacks;
pub mod bound;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod kernel;
pub mod lr;
pub mod mixture;

pub use error::{Error, Result};
