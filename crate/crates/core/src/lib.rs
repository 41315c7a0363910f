//! Compressed representations of graph time series: graph Fourier bases,
//! a tied linear autoencoder, and an LSTM predictor running in the latent
//! space, plus the data generators and experiment harness around them.

pub mod ae;
pub mod codec;
pub mod data;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod linalg;
pub mod lstm;
pub mod optim;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
