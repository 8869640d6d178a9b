#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod edit;
pub mod error;
pub mod eval;
pub mod face;
pub mod nn;
pub mod real;

pub use error::{Error, Result};
