pub mod clock;
pub mod coupling;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod lattice;
pub mod oracle;
pub mod paths;
pub mod stats;

pub use error::{Error, Result};
