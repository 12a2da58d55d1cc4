//! Invertible hybrid quantum-classical GAN for unpaired image-to-image
//! translation on 32×32 grayscale images.

pub mod audit;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod nets;
pub mod postprocess;
pub mod qgen;
pub mod qsim;
pub mod study;
pub mod tensor_io;
pub mod trainer;

pub use error::{Error, Result};
pub use image::ImageTensor;
