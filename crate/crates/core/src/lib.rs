pub mod cli;
pub mod error;
pub mod io;
pub mod mcmc;
pub mod priors;
pub mod regression;
pub mod sim;
pub mod spline;
pub mod survival;

pub use error::{GmcError, Result};
