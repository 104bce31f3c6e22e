pub mod classical;
pub mod cli;
pub mod determinacy;
pub mod error;
pub mod lattice;
pub mod moments;
pub mod precision;
pub mod qcore;
pub mod quadrature;
pub mod report;
pub mod series;
pub mod special;
pub mod witness;
pub mod zoo;

pub use error::{Error, Result};
pub use precision::{Decimal, PrecisionContext, QParam};
