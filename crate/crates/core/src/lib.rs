//! Ewens fragmentation trees and Plancherel random trees.

pub mod bijection;
pub mod cli;
pub mod constants;
pub mod error;
pub mod ewens;
pub mod fragmentation;
pub mod heights;
pub mod montecarlo;
pub mod trees;
pub mod series;
mod special;

pub use error::{Error, Result};
