//! File formats, manifests, the TOML pipeline runner and the pieces the
//! `corpusforge` binary is built from. Algorithms live in
//! [`corpusforge_core`].

pub mod config;
pub mod espeak;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod wav;

pub use corpusforge_core as core;
