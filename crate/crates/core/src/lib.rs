//! Semiclassical Bohr–Sommerfeld quantization of one-dimensional wells.

pub mod actions;
pub mod error;
pub mod exprjet;
pub mod numeric;
pub mod oracle;
pub mod orbit;
pub mod quantize;
pub mod symbol;
pub mod wronlab;

pub use error::{Error, ErrorKind, Result};
