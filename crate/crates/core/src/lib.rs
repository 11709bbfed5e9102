//! Image-spam detection with a small convolutional network written from scratch,
//! plus the colour-histogram and HOG baselines it is compared against.

pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod layers;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Rng, Tensor};
