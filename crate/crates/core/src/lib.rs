//! Sample-size and confidence-interval toolkit for translation quality evaluation.
//!
//! * [`stats`]: Wald and finite-population intervals, the sample-size solver,
//!   and sentence/word/page conversion.
//! * [`population`]: synthetic texts with randomly placed per-sentence errors.
//! * [`montecarlo`]: repeated sampling, histograms, normal fits and
//!   half-width sweeps against the closed form.
//! * [`ped`]: post-editing distance, its tanh normalization, and sweeps of the
//!   mean normalized score.
//! * [`cli`]: the `tqe` command-line front end.

pub mod cli;
pub mod error;
pub mod manifest;
pub mod montecarlo;
pub mod output;
pub mod ped;
pub mod population;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
