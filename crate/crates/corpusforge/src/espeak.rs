//! Synthesis through an external `espeak-ng` binary.

use std::process::Command;

use corpusforge_core::align::{AlignError, SynthesisProvider};
use corpusforge_core::audio::{AudioBuffer, CANONICAL_RATE};

use crate::wav::read_wav;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Espeak {
    pub binary: String,
    pub voice: String,
}

impl Espeak {
    pub fn new(voice: impl Into<String>) -> Self {
        Self { binary: "espeak-ng".into(), voice: voice.into() }
    }
}

impl SynthesisProvider for Espeak {
    fn name(&self) -> &str {
        "espeak"
    }

    fn render(&self, text: &str) -> Result<AudioBuffer, AlignError> {
        let dir = tempfile::tempdir().map_err(|e| AlignError::Provider(e.to_string()))?;
        let out = dir.path().join("utt.wav");
        let status = Command::new(&self.binary)
            .arg("-v")
            .arg(&self.voice)
            .arg("-w")
            .arg(&out)
            .arg("--")
            .arg(text)
            .status()
            .map_err(|e| AlignError::Provider(format!("cannot run {}: {e}", self.binary)))?;
        if !status.success() {
            return Err(AlignError::Provider(format!("{} exited with {status}", self.binary)));
        }
        read_wav(&out, CANONICAL_RATE).map_err(|e| AlignError::Provider(e.to_string()))
    }
}
