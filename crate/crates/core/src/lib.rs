pub mod aging;
pub mod error;
pub mod hdl;
pub mod lod;
pub mod milp;
pub mod nn;

pub use error::{Error, Result};
