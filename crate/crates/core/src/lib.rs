pub mod backtest;
pub mod data;
pub mod design;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod ols;
pub mod quantreg;
pub mod rng;
pub mod trading;

pub use error::{Error, Result};
