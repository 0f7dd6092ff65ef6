pub mod adversarial;
pub mod channel;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod io;
pub mod nnet;
pub mod profile;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
