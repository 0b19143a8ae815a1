//! Travelling fronts in a slow-fast reaction-diffusion system with spatially
//! varying coefficients.
//!
//! The model, in fast-reaction scaling, is
//!
//! ```text
//! eps^2 U_s  = eps^2 U_xx + U - U^3 - eps (alpha V + gamma)
//! tauhat V_s = V_xx - (1 + f1(x)) V + (1 + f2(x)) U
//! ```
//!
//! The crate computes heterogeneous background states and stationary-front
//! positions, constant-coefficient wave speeds, full PDE trajectories with
//! front tracking, epsilon-dependent speeds by shooting, and the front
//! position of the singular limit through a delay equation (Monte Carlo and
//! quadrature evaluation of the memory term, two stepping algorithms).

pub mod background;
pub mod config;
pub mod constant_coeff;
pub mod dde;
pub mod error;
pub mod grid;
pub mod harness;
pub mod heterogeneity;
pub mod history;
pub mod model;
pub mod numerics;
pub mod pde;
pub mod trajectory;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{GridProfile, UniformGrid};
pub use heterogeneity::{build_example_heterogeneity, Heterogeneity};
pub use history::{FrontHistory, PathEval};
pub use model::ModelParams;
pub use trajectory::Trajectory;
