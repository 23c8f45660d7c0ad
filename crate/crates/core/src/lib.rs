//! Allocation-only building blocks for curating low-resource speech corpora
//! and post-processing acoustic model output.
//!
//! Everything here is pure computation over in-memory buffers: framing and
//! MFCC features, voice activity segmentation, blind SNR estimation, speaker
//! clustering, gender classification, forced alignment, transcript cleaning,
//! corpus splitting, n-gram language models, CTC decoding and inverse text
//! normalization. File formats, the pipeline runner and the command line live
//! in the `corpusforge` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod align;
pub mod audio;
pub mod corpus;
pub mod decode;
pub mod gender;
pub mod itn;
pub mod lm;
pub mod snr;
pub mod speaker;
pub mod synth;
pub mod text;
pub mod vad;

mod math;
