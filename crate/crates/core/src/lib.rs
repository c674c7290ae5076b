//! Mean-reverting correlation (MRC) diffusions on correlation matrices.
//!
//! The crate bundles exact moment oracles, closed-form linear flows, a corrected
//! Euler scheme, a direct weak second-order scheme, a Monte Carlo harness and a
//! basket pricing layer with stochastic-local correlation.

pub mod cli;
pub mod corematrix;
pub mod error;
pub mod finance;
pub mod flows;
pub mod mcengine;
pub mod momentoracle;
pub mod schemes;

pub use corematrix::{CorrelationMatrix, MrcParams, SymMatrix};
pub use error::{MrcError, Result};
pub use schemes::SchemeKind;
