//! Number-aware tokenization and decoding for masked number prediction.
//!
//! The crate compares four ways of emitting a number from a language model:
//! subword pieces, notation changes (digits, scientific), vocabulary changes
//! (one token per decade or per equal-frequency bin) and an architecture
//! change (the DExp mixture decoder). It also ships the metrics used to
//! compare them, corpus analysis helpers, and a small trainable harness.

pub mod analysis;
pub mod binning;
pub mod cli;
pub mod dexp;
mod error;
pub mod harness;
pub mod metrics;
pub mod normal;
pub mod notation;
pub mod numparse;

pub use error::{Error, Result};
pub use numparse::{decompose, recompose, ParsedNumber, MAX_EXPONENT, MAX_VALUE, N_EXPONENTS};
