pub mod almost_einstein;
pub mod certificate;
pub mod config;
pub mod conformal;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod hyper_holonomy;
pub mod killing;
pub mod linalg;
pub mod product;
pub mod real;
pub mod selftest;
pub mod tractor;

pub use config::Config;
pub use error::{Error, Result};
