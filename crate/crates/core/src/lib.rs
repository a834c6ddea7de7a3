//! Span-selection factual correction for abstractive summaries.
//!
//! Two correction engines share one from-scratch transformer encoder:
//!
//! * the iterative QA-span engine masks one entity of a draft summary at a
//!   time, asks the model for the source span that should fill the mask and
//!   splices it back before moving to the next entity;
//! * the auto-regressive engine masks every entity at once and fills the
//!   masks left to right with a shallow pointer decoder, each prediction
//!   feeding a pooled entity representation into the next step, searched
//!   with a beam.
//!
//! The crate is `no_std` (it needs `alloc`). Everything touching the file
//! system, JSON or the command line lives in the `spanfact` crate.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod ardecoder;
pub mod corpus;
pub mod corrector;
pub mod encoder;
pub mod entities;
mod error;
pub mod evalmetrics;
pub(crate) mod math;
pub mod model;
pub mod numcore;
pub mod qaspan;
pub mod synth;
pub mod textcore;
pub mod train;

pub use error::{Error, Result};
