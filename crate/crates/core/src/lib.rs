//! Conditional image-translation GAN whose two-dimensional polar condition
//! space is learned jointly with the networks, together with the data
//! pipeline that feeds it and the metrics used to evaluate it.

pub mod datapipe;
pub mod emotion_space;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod render;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
