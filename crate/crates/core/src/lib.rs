pub mod cft;
pub mod combinatorics;
pub mod coulomb_gas;
pub mod error;
pub mod evaluator;
pub mod frobenius;
pub mod limits;
pub mod meander;
pub mod quad;
pub mod weights;

pub use error::{Error, Result};
