//! Resilient Wi-Fi indoor positioning: robust scaling, adversarial RSSI
//! attack simulation, a Kolmogorov-Arnold style regressor with exact
//! hand-derived gradients, weighted robust training, and a blended ensemble.

pub mod attacks;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod kan;
pub mod matrix;
pub mod model;
pub mod neural;
pub mod rng;
pub mod scaler;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::{derive_seed, DetRng};
