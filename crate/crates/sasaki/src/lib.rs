//! Numerical verification of Riccati comparison arguments on Heisenberg-type
//! Sasakian models: geodesic flow, moving-frame Riccati systems, closed-form
//! comparison solutions, measure contraction and the Bonnet-Myers bound.

pub mod error;
pub mod comparison;
pub mod config;
pub mod exec;
pub mod geodesics;
pub mod io;
pub mod mcp;
pub mod models;
pub mod ode;
pub mod quad;
pub mod riccati;

pub use error::{Error, Result};
