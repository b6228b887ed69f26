pub mod error;
pub mod geometry;
pub mod kernels;
pub mod landscape;
pub mod objectives;
pub mod optimizers;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
