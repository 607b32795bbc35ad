//! FFT-based computational homogenization of two-phase microstructures with
//! composite boxels at finite strain.

pub mod cli;
pub mod error;
pub mod fft;
pub mod imaging;
pub mod laminate;
pub mod material;
pub mod post;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
