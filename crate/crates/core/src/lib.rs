//! Discrete speech units, emotion-conditioned duration and pitch prediction,
//! vocoder conditioning, and expressivity evaluation.
//!
//! The guide in `book/` walks through each module with runnable examples;
//! those examples are compiled and run as doc-tests of this crate.

pub mod conditioning;
mod dsp;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod pitch_analysis;
pub mod prosody;
pub mod unit_codec;

pub use dsp::mfcc_features;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/units.md")]
    mod units {}
    #[doc = include_str!("../../../book/src/pitch.md")]
    mod pitch {}
    #[doc = include_str!("../../../book/src/prosody.md")]
    mod prosody {}
    #[doc = include_str!("../../../book/src/conditioning.md")]
    mod conditioning {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
