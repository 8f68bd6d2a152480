pub mod error;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod mms;
pub mod quadrature;
pub mod sav;
pub mod scenarios;
pub mod scheme;
pub mod sparse;
pub mod stochastic;
pub mod tableau;

pub use error::{Error, Result};
