//! Exact, asymptotic and simulation analysis of the restricted Erlang-R model.

pub mod blocking;
pub mod dimension;
pub mod error;
pub mod heuristic;
pub mod limits;
pub mod model;
pub mod mol;
pub mod qbd;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
