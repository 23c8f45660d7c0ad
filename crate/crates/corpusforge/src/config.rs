//! The TOML pipeline configuration and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use corpusforge_core::corpus::SplitSpec;
use corpusforge_core::decode::edit_distance;
use corpusforge_core::snr::SnrThresholds;
use corpusforge_core::speaker::{HdbscanParams, DEFAULT_CAP_MINUTES, DEFAULT_EMBEDDING_DIM, DEFAULT_MIN_CLUSTER_SIZE};
use corpusforge_core::text::CharVocabulary;
use corpusforge_core::vad::VadConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Vad,
    Snr,
    Embed,
    Cluster,
    Gender,
    Select,
    Textclean,
    Split,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Vad,
        Stage::Snr,
        Stage::Embed,
        Stage::Cluster,
        Stage::Gender,
        Stage::Select,
        Stage::Textclean,
        Stage::Split,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Vad => "vad",
            Stage::Snr => "snr",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Gender => "gender",
            Stage::Select => "select",
            Stage::Textclean => "textclean",
            Stage::Split => "split",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }

    /// Stages whose output this one reads.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Vad => &[],
            Stage::Snr | Stage::Embed | Stage::Textclean => &[Stage::Vad],
            Stage::Cluster | Stage::Gender => &[Stage::Embed],
            Stage::Select => &[Stage::Snr, Stage::Cluster],
            Stage::Split => &[Stage::Cluster],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadSection {
    pub aggressiveness: u8,
    pub frame_ms: u32,
    pub padding_ms: u32,
    pub trigger_ratio: f64,
    pub min_chunk_s: f64,
    pub max_chunk_s: f64,
}

impl Default for VadSection {
    fn default() -> Self {
        let d = VadConfig::default();
        Self {
            aggressiveness: d.aggressiveness,
            frame_ms: d.frame_ms,
            padding_ms: d.padding_ms,
            trigger_ratio: d.trigger_ratio,
            min_chunk_s: d.min_chunk_s,
            max_chunk_s: d.max_chunk_s,
        }
    }
}

impl VadSection {
    pub fn to_config(&self) -> VadConfig {
        VadConfig {
            aggressiveness: self.aggressiveness,
            frame_ms: self.frame_ms,
            padding_ms: self.padding_ms,
            trigger_ratio: self.trigger_ratio,
            min_chunk_s: self.min_chunk_s,
            max_chunk_s: self.max_chunk_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnrSection {
    pub min_db: f64,
    pub max_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_table: Option<PathBuf>,
}

impl Default for SnrSection {
    fn default() -> Self {
        let d = SnrThresholds::default();
        Self { min_db: d.min_db, max_db: d.max_db, gain_table: None }
    }
}

impl SnrSection {
    pub fn thresholds(&self) -> SnrThresholds {
        SnrThresholds { min_db: self.min_db, max_db: self.max_db }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    pub dim: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        Self { dim: DEFAULT_EMBEDDING_DIM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSection {
    pub min_cluster_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_samples: Option<usize>,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self { min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE, min_samples: None }
    }
}

impl ClusterSection {
    pub fn params(&self) -> HdbscanParams {
        HdbscanParams {
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples.unwrap_or(self.min_cluster_size),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenderSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectSection {
    pub cap_minutes: f64,
}

impl Default for SelectSection {
    fn default() -> Self {
        Self { cap_minutes: DEFAULT_CAP_MINUTES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextcleanSection {
    pub language: String,
    /// Vocabulary file; the built-in one for `language` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
}

impl Default for TextcleanSection {
    fn default() -> Self {
        Self { language: "hi".into(), vocab: None }
    }
}

impl TextcleanSection {
    pub fn vocabulary(&self) -> anyhow::Result<CharVocabulary> {
        load_vocabulary(&self.language, self.vocab.as_deref())
    }
}

pub fn load_vocabulary(language: &str, path: Option<&Path>) -> anyhow::Result<CharVocabulary> {
    Ok(match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
            let name = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            CharVocabulary::parse(language, &name, &text)?
        }
        None => CharVocabulary::builtin(language)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub ratios: [f64; 3],
    /// Falls back to the top-level seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { ratios: SplitSpec::default().ratios, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub stages: Vec<String>,
    pub vad: VadSection,
    pub snr: SnrSection,
    pub embed: EmbedSection,
    pub cluster: ClusterSection,
    pub gender: GenderSection,
    pub select: SelectSection,
    pub textclean: TextcleanSection,
    pub split: SplitSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: PathBuf::from("input"),
            output_dir: PathBuf::from("output"),
            seed: SplitSpec::default().seed,
            stages: Stage::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            vad: VadSection::default(),
            snr: SnrSection::default(),
            embed: EmbedSection::default(),
            cluster: ClusterSection::default(),
            gender: GenderSection::default(),
            select: SelectSection::default(),
            textclean: TextcleanSection::default(),
            split: SplitSection::default(),
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "input_dir", "output_dir", "seed", "stages", "vad", "snr", "embed", "cluster", "gender", "select", "textclean",
    "split",
];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    Some(match section {
        "vad" => &["aggressiveness", "frame_ms", "padding_ms", "trigger_ratio", "min_chunk_s", "max_chunk_s"],
        "snr" => &["min_db", "max_db", "gain_table"],
        "embed" => &["dim"],
        "cluster" => &["min_cluster_size", "min_samples"],
        "gender" => &["model"],
        "select" => &["cap_minutes"],
        "textclean" => &["language", "vocab"],
        "split" => &["ratios", "seed"],
        _ => return None,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n{0}")]
    Invalid(Diagnostics),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// The closest known key, if it is plausibly a misspelling.
pub fn nearest_key<'a>(key: &str, known: &[&'a str]) -> Option<&'a str> {
    let k: Vec<char> = key.chars().collect();
    known
        .iter()
        .map(|cand| (edit_distance(&k, &cand.chars().collect::<Vec<_>>()), *cand))
        .filter(|(d, cand)| *d <= 2.max(cand.chars().count() / 3))
        .min()
        .map(|(_, c)| c)
}

fn unknown_key(warnings: &mut Vec<String>, at: &str, key: &str, known: &[&str]) {
    let mut msg = format!("unknown key {at}{key:?}");
    if let Some(s) = nearest_key(key, known) {
        msg.push_str(&format!("; did you mean {s:?}?"));
    }
    warnings.push(msg);
}

fn check_keys(value: &toml::Table, warnings: &mut Vec<String>) {
    for (k, v) in value {
        if !TOP_KEYS.contains(&k.as_str()) {
            unknown_key(warnings, "", k, TOP_KEYS);
            continue;
        }
        if let (Some(known), Some(table)) = (section_keys(k), v.as_table()) {
            for inner in table.keys() {
                if !known.contains(&inner.as_str()) {
                    unknown_key(warnings, &format!("in [{k}]: "), inner, known);
                }
            }
        }
    }
}

impl PipelineConfig {
    /// Parses TOML, collecting unknown-key warnings. Relative paths are
    /// left as written.
    pub fn parse(text: &str, origin: &str) -> Result<(PipelineConfig, Vec<String>), ConfigError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })?;
        let mut warnings = Vec::new();
        check_keys(&table, &mut warnings);
        let config = PipelineConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })?;
        Ok((config, warnings))
    }

    /// Reads, parses and validates. Relative paths resolve against the
    /// configuration file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<(PipelineConfig, Diagnostics), ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let (mut config, warnings) = PipelineConfig::parse(&text, &path.display().to_string())?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        let mut diags = config.validate();
        diags.warnings.splice(0..0, warnings);
        Ok((config, diags))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input_dir);
        fix(&mut self.output_dir);
        for p in [&mut self.snr.gain_table, &mut self.gender.model, &mut self.textclean.vocab].into_iter().flatten() {
            fix(p);
        }
    }

    /// Stage names in configured order; unknown names are skipped here and
    /// reported by [`validate`](Self::validate).
    pub fn stage_list(&self) -> Vec<Stage> {
        self.stages.iter().filter_map(|s| Stage::parse(s)).collect()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { ratios: self.split.ratios, seed: self.split.seed.unwrap_or(self.seed) }
    }

    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        let names: Vec<&str> = Stage::ALL.iter().map(|s| s.as_str()).collect();
        let mut seen: Vec<Stage> = Vec::new();
        for name in &self.stages {
            let Some(stage) = Stage::parse(name) else {
                let mut msg = format!("unknown stage {name:?}");
                if let Some(s) = nearest_key(name, &names) {
                    msg.push_str(&format!("; did you mean {s:?}?"));
                }
                d.errors.push(msg);
                continue;
            };
            if seen.contains(&stage) {
                d.errors.push(format!("stage {stage} is listed twice"));
                continue;
            }
            for req in stage.requires() {
                if seen.contains(req) {
                    continue;
                }
                if self.stages.iter().any(|s| s == req.as_str()) {
                    d.errors.push(format!("stage {stage} must come after {req}"));
                } else {
                    d.errors.push(format!("stage {stage} requires {req}"));
                }
            }
            seen.push(stage);
        }

        if !self.input_dir.is_dir() {
            d.errors.push(format!("input_dir {} is not a directory", self.input_dir.display()));
        }
        if let Err(e) = self.vad.to_config().validate() {
            d.errors.push(format!("[vad] {e}"));
        }
        if !self.snr.thresholds().is_valid() {
            d.errors.push(format!("[snr] min_db {} must be below max_db {}", self.snr.min_db, self.snr.max_db));
        }
        if let Some(p) = &self.snr.gain_table {
            if !p.is_file() {
                d.errors.push(format!("[snr] gain_table {} not found", p.display()));
            }
        }
        if self.embed.dim == 0 {
            d.errors.push("[embed] dim must be positive".into());
        }
        if let Err(e) = self.cluster.params().validate() {
            d.errors.push(format!("[cluster] {e}"));
        }
        if seen.contains(&Stage::Gender) {
            match &self.gender.model {
                None => d.errors.push("[gender] model is required when the gender stage runs".into()),
                Some(p) if !p.is_file() => d.errors.push(format!("[gender] model {} not found", p.display())),
                Some(_) => {}
            }
        }
        if !(self.select.cap_minutes > 0.0) {
            d.errors.push("[select] cap_minutes must be positive".into());
        }
        if seen.contains(&Stage::Textclean) {
            if let Err(e) = self.textclean.vocabulary() {
                d.errors.push(format!("[textclean] {e}"));
            }
        }
        if let Err(e) = self.split_spec().validate() {
            d.errors.push(format!("[split] {e}"));
        }
        d
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    /// Defaults as a commented TOML document.
    pub fn template() -> String {
        let mut c = PipelineConfig::default();
        c.gender.model = Some(PathBuf::from("gender.svm"));
        format!("# corpusforge pipeline configuration\n{}", toml::to_string_pretty(&c).expect("config serializes"))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_input(text: &str) -> (tempfile::TempDir, Diagnostics) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("in")).unwrap();
        std::fs::write(dir.path().join("m.svm"), b"").unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, format!("input_dir = \"in\"\n{text}")).unwrap();
        let (_, d) = PipelineConfig::load(&p).unwrap();
        (dir, d)
    }

    #[test]
    fn well_formed_config_has_no_diagnostics() {
        let (_d, diags) = with_input("[gender]\nmodel = \"m.svm\"\n");
        assert!(diags.is_empty(), "{diags}");
    }

    #[test]
    fn split_before_cluster_is_an_order_error() {
        let (_d, diags) = with_input("stages = [\"vad\", \"embed\", \"split\", \"cluster\"]\n");
        assert_eq!(diags.errors, vec!["stage split must come after cluster".to_string()]);
    }

    #[test]
    fn missing_dependency() {
        let (_d, diags) = with_input("stages = [\"vad\", \"split\"]\n");
        assert_eq!(diags.errors, vec!["stage split requires cluster".to_string()]);
    }

    #[test]
    fn misspelled_key_gets_a_suggestion() {
        let (_d, diags) = with_input("stages = [\"vad\"]\n[vad]\nagressiveness = 3\n");
        assert!(diags.errors.is_empty());
        assert_eq!(diags.warnings, vec!["unknown key in [vad]: \"agressiveness\"; did you mean \"aggressiveness\"?"]);
        let (_d, diags) = with_input("stages = [\"vad\"]\nzzz = 1\n");
        assert_eq!(diags.warnings, vec!["unknown key \"zzz\""]);
    }

    #[test]
    fn bad_values_and_paths() {
        let (_d, diags) = with_input("stages = [\"vad\", \"embed\", \"gender\"]\n[vad]\naggressiveness = 4\n");
        assert_eq!(diags.errors.len(), 2, "{diags}");
        assert!(diags.errors.iter().any(|e| e.starts_with("[gender]")));
        let (_d, diags) = with_input("stages = [\"vad\", \"vda\"]\n[split]\nratios = [0.5, 0.5, 0.5]\n");
        assert!(diags.errors[0].contains("did you mean \"vad\""), "{diags}");
        assert!(diags.errors[1].starts_with("[split]"));
    }

    #[test]
    fn parse_failure_is_an_error() {
        assert!(PipelineConfig::parse("stages = 3", "x").is_err());
        assert!(PipelineConfig::parse("[vad", "x").is_err());
    }

    #[test]
    fn template_parses_back() {
        let (c, warnings) = PipelineConfig::parse(&PipelineConfig::template(), "t").unwrap();
        assert!(warnings.is_empty());
        assert_eq!(c.stage_list(), Stage::ALL.to_vec());
        assert_eq!(c.hash().len(), 64);
    }
}
