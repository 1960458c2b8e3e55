//! Antimicrobial-peptide classification toolkit: five sequence encodings,
//! WGAN-GP minority oversampling, five base classifiers with a stacking
//! ensemble, and MCC scoring under stratified Monte-Carlo cross-validation.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod gan;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sequence_io;
pub mod toy;

pub use error::{Error, Result};
