pub mod bench;
pub mod codesim;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod faultloc;
pub mod learn;
pub mod lexclust;
pub mod project;
pub mod rae;
pub mod repair;

pub use error::{Error, Result};
