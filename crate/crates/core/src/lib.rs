pub mod character;
pub mod error;
pub mod fixedpoints;
pub mod integration;
pub mod lattice;
pub mod localfield;
pub mod measure;
pub mod num;
pub mod rootsys;
pub mod suite;
pub mod tree;
mod par;

pub use error::{Error, Result};
