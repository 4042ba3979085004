#![no_std]
extern crate alloc;

pub mod error;
pub mod evaluate;
pub mod geometry;
pub mod harmonize;
pub mod headmodel;
pub mod linalg;
pub mod model;
pub mod montage;
pub mod rng;
pub mod signal;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
