pub mod controllers;
pub mod error;
pub mod field;
pub mod heat;
pub mod motion;
pub mod output;
pub mod scenarios;
pub mod sensing;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{GridSpec, ScalarField, Vec2};
