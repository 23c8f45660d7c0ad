//! Manifest records, speaker-disjoint splitting and dataset statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::text::nfd;

pub const NOISE_CLUSTER: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Status {
    Raw,
    VadOk,
    SnrRejected,
    ForeignRejected,
    NumericRejected,
    Selected,
}

impl Status {
    pub const ALL: [Status; 6] = [
        Self::Raw,
        Self::VadOk,
        Self::SnrRejected,
        Self::ForeignRejected,
        Self::NumericRejected,
        Self::Selected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::VadOk => "vad_ok",
            Self::SnrRejected => "snr_rejected",
            Self::ForeignRejected => "foreign_rejected",
            Self::NumericRejected => "numeric_rejected",
            Self::Selected => "selected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    pub fn is_rejected(self) -> bool {
        matches!(self, Self::SnrRejected | Self::ForeignRejected | Self::NumericRejected)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub source: String,
    pub audio_path: String,
    pub duration_s: f64,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub snr_db: Option<f64>,
    /// Cluster id within `source`; [`NOISE_CLUSTER`] for noise.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub speaker_cluster: Option<i64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub gender: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub transcript: Option<String>,
    pub status: Status,
    /// Why a record was rejected or left out, e.g. `snr_low`, `unclustered`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub reason: Option<String>,
}

impl UtteranceRecord {
    pub fn new(utt_id: impl Into<String>, source: impl Into<String>, audio_path: impl Into<String>, duration_s: f64) -> Self {
        Self {
            utt_id: utt_id.into(),
            source: source.into(),
            audio_path: audio_path.into(),
            duration_s,
            snr_db: None,
            speaker_cluster: None,
            gender: None,
            transcript: None,
            status: Status::Raw,
            reason: None,
        }
    }

    /// Speakers are identified per source: cluster ids are local to the
    /// source they were clustered in.
    pub fn speaker_key(&self) -> Option<(&str, i64)> {
        match self.speaker_cluster {
            Some(c) if c >= 0 => Some((self.source.as_str(), c)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusError {
    Empty,
    DuplicateIds(Vec<String>),
    NonPositiveDuration(String),
    Ratios(String),
    MissingCluster(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => f.write_str("manifest is empty"),
            Self::DuplicateIds(ids) => write!(f, "duplicate utt_id: {}", ids.join(", ")),
            Self::NonPositiveDuration(id) => write!(f, "{id}: duration must be positive"),
            Self::Ratios(msg) => write!(f, "bad split ratios: {msg}"),
            Self::MissingCluster(id) => write!(f, "{id}: no speaker_cluster"),
        }
    }
}

impl core::error::Error for CorpusError {}

pub fn validate(records: &[UtteranceRecord]) -> Result<(), CorpusError> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for r in records {
        if !seen.insert(r.utt_id.as_str()) {
            dups.insert(r.utt_id.clone());
        }
        if !(r.duration_s > 0.0) {
            return Err(CorpusError::NonPositiveDuration(r.utt_id.clone()));
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        Err(CorpusError::DuplicateIds(dups.into_iter().collect()))
    }
}

/// Concatenation of two manifests; duplicate ids are an error.
pub fn merge(a: &[UtteranceRecord], b: &[UtteranceRecord]) -> Result<Vec<UtteranceRecord>, CorpusError> {
    let ids: BTreeSet<&str> = a.iter().map(|r| r.utt_id.as_str()).collect();
    let dups: BTreeSet<String> = b.iter().filter(|r| ids.contains(r.utt_id.as_str())).map(|r| r.utt_id.clone()).collect();
    if !dups.is_empty() {
        return Err(CorpusError::DuplicateIds(dups.into_iter().collect()));
    }
    Ok(a.iter().chain(b).cloned().collect())
}

pub fn filter<F: FnMut(&UtteranceRecord) -> bool>(records: &[UtteranceRecord], mut keep: F) -> Vec<UtteranceRecord> {
    records.iter().filter(|r| keep(r)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Self::Train, Self::Dev, Self::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { ratios: [0.8, 0.1, 0.1], seed: 7 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.ratios.iter().any(|r| !(*r >= 0.0)) {
            return Err(CorpusError::Ratios(format!("{:?} has a negative entry", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Ratios(format!("{:?} sums to {sum}", self.ratios)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    /// One split per input record, in input order.
    pub assignment: Vec<Split>,
    pub warnings: Vec<String>,
}

impl SplitResult {
    pub fn durations(&self, records: &[UtteranceRecord]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for (r, s) in records.iter().zip(&self.assignment) {
            d[*s as usize] += r.duration_s;
        }
        d
    }
}

/// Greedy speaker-disjoint split. Noise records go to train and do not
/// count toward the ratios. Whole speakers are taken largest first (equal
/// totals in seed-shuffled order) and each goes to the split with the
/// lowest current/target duration ratio, ties to train, then dev, then test.
/// Splits with a zero ratio receive nothing.
pub fn split_by_speaker(records: &[UtteranceRecord], spec: &SplitSpec) -> Result<SplitResult, CorpusError> {
    spec.validate()?;
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    if let Some(r) = records.iter().find(|r| r.speaker_cluster.is_none()) {
        return Err(CorpusError::MissingCluster(r.utt_id.clone()));
    }
    let mut speakers: BTreeMap<(&str, i64), f64> = BTreeMap::new();
    for r in records {
        if let Some(k) = r.speaker_key() {
            *speakers.entry(k).or_default() += r.duration_s;
        }
    }
    // Targets cover clustered speech only; noise is added to train after.
    let total: f64 = speakers.values().sum();
    let target: Vec<f64> = spec.ratios.iter().map(|r| r * total).collect();
    let mut current = [0.0f64; 3];
    let mut order: Vec<((&str, i64), f64)> = speakers.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    order.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut chosen: BTreeMap<(&str, i64), Split> = BTreeMap::new();
    for (key, dur) in &order {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..3 {
            if target[k] <= 0.0 {
                continue;
            }
            let ratio = current[k] / target[k];
            if best.is_none_or(|(_, b)| ratio < b) {
                best = Some((k, ratio));
            }
        }
        let k = best.map_or(0, |(k, _)| k);
        current[k] += dur;
        chosen.insert(*key, Split::ALL[k]);
    }

    let mut warnings = Vec::new();
    if order.len() < 3 {
        warnings.push(format!(
            "only {} speaker(s): some splits are empty because speakers cannot be shared",
            order.len()
        ));
    }
    for (k, s) in Split::ALL.iter().enumerate() {
        if spec.ratios[k] > 0.0 && current[k] == 0.0 && order.len() >= 3 {
            warnings.push(format!("{} split is empty", s.as_str()));
        }
    }
    let assignment = records
        .iter()
        .map(|r| r.speaker_key().and_then(|k| chosen.get(&k).copied()).unwrap_or(Split::Train))
        .collect();
    Ok(SplitResult { assignment, warnings })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub hours: f64,
    pub n_utts: usize,
    pub n_speakers: usize,
    /// Hours per gender label; unlabelled records count as "unknown".
    pub gender_hours: BTreeMap<String, f64>,
    /// Distinct non-space code points across NFD transcripts.
    pub char_vocab_size: usize,
}

pub fn stats(records: &[UtteranceRecord]) -> Stats {
    let mut s = Stats { n_utts: records.len(), ..Stats::default() };
    let mut speakers = BTreeSet::new();
    let mut chars = BTreeSet::new();
    for r in records {
        s.hours += r.duration_s / 3600.0;
        if let Some(k) = r.speaker_key() {
            speakers.insert(k);
        }
        let g = r.gender.clone().unwrap_or_else(|| String::from("unknown"));
        *s.gender_hours.entry(g).or_default() += r.duration_s / 3600.0;
        if let Some(t) = &r.transcript {
            chars.extend(nfd(t).chars().filter(|c| !c.is_whitespace()));
        }
    }
    s.n_speakers = speakers.len();
    s.char_vocab_size = chars.len();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(id: &str, cluster: i64, hours: f64) -> UtteranceRecord {
        let mut r = UtteranceRecord::new(id, "src", "a.wav", hours * 3600.0);
        r.speaker_cluster = Some(cluster);
        r
    }

    #[test]
    fn hand_simulated_split() {
        let records = vec![rec("a", 0, 8.0), rec("b", 1, 1.0), rec("c", 2, 1.0)];
        let r = split_by_speaker(&records, &SplitSpec::default()).unwrap();
        assert_eq!(r.assignment[0], Split::Train);
        // the two 1 h speakers tie; the seed decides which goes where
        let mut rest = vec![r.assignment[1], r.assignment[2]];
        rest.sort();
        assert_eq!(rest, vec![Split::Dev, Split::Test]);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn single_speaker_goes_to_train_with_warning() {
        let records = vec![rec("a", 0, 1.0), rec("b", 0, 2.0), rec("n", NOISE_CLUSTER, 1.0)];
        let r = split_by_speaker(&records, &SplitSpec::default()).unwrap();
        assert!(r.assignment.iter().all(|s| *s == Split::Train));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn split_errors() {
        assert_eq!(split_by_speaker(&[], &SplitSpec::default()), Err(CorpusError::Empty));
        let bad = SplitSpec { ratios: [0.5, 0.5, 0.1], seed: 0 };
        assert!(matches!(split_by_speaker(&[rec("a", 0, 1.0)], &bad), Err(CorpusError::Ratios(_))));
        let mut r = rec("a", 0, 1.0);
        r.speaker_cluster = None;
        assert_eq!(split_by_speaker(&[r], &SplitSpec::default()), Err(CorpusError::MissingCluster("a".into())));
    }

    #[test]
    fn same_cluster_id_in_two_sources_is_two_speakers() {
        let mut b = rec("b", 0, 1.0);
        b.source = String::from("other");
        let s = stats(&[rec("a", 0, 1.0), b]);
        assert_eq!(s.n_speakers, 2);
    }

    #[test]
    fn stats_examples() {
        assert_eq!(stats(&[]), Stats::default());
        let mut a = UtteranceRecord::new("a", "s", "a.wav", 30.0);
        a.transcript = Some("ab".into());
        let mut b = UtteranceRecord::new("b", "s", "b.wav", 30.0);
        b.transcript = Some("bc".into());
        let s = stats(&[a, b]);
        assert!((s.hours - 1.0 / 60.0).abs() < 1e-12);
        assert_eq!((s.n_utts, s.char_vocab_size), (2, 3));
    }

    #[test]
    fn merge_and_filter() {
        let a = vec![rec("a", 0, 1.0)];
        let mut b = vec![rec("b", 0, 1.0)];
        b[0].status = Status::Selected;
        let m = merge(&a, &b).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(filter(&m, |r| r.status == Status::Selected).len(), 1);
        assert_eq!(merge(&m, &a), Err(CorpusError::DuplicateIds(vec!["a".into()])));
        assert_eq!(validate(&[rec("x", 0, 1.0), rec("x", 0, 1.0)]), Err(CorpusError::DuplicateIds(vec!["x".into()])));
    }

    #[test]
    fn status_names_round_trip() {
        for s in Status::ALL {
            assert_eq!(Status::parse(s.as_str()), Some(s));
        }
    }
}
