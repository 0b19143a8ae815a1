//! Delay equation for the singular-limit front position.

pub mod algo1;
pub mod algo2;
pub mod functional;

pub use algo1::*;
pub use algo2::*;
pub use functional::*;
