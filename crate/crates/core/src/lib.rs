//! Exact computation with set-polynomials, generalized (bracket)
//! polynomials, recurrence in nilsystems, and finite witness searches.

pub mod error;
pub mod rational;
pub mod setcore;
pub mod setpoly;
pub mod genpoly;
pub mod search;
pub mod nilsys;
pub mod cli;

pub use error::{Error, Result};
pub use rational::Q;
