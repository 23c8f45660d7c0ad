//! CTC decoding: greedy collapse, prefix beam search with word-level n-gram
//! fusion, a mock acoustic model and WER/CER scoring.
//!
//! Hypothesis scores are natural-log CTC prefix probabilities plus, for
//! each completed word `w` after history `h`,
//! `alpha * ln(10) * log10 P(w | h) + beta`. The LM's log10 values are
//! converted to natural log before weighting, so `alpha` multiplies a
//! natural-log term. A word completes when a space is appended and, for
//! the final word, at the end of the utterance, where `</s>` is scored too.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::lm::{LmState, NGramModel, EOS, UNK};
use crate::math;

pub const DEFAULT_BEAM_WIDTH: usize = 128;
pub const DEFAULT_LM_WEIGHT: f64 = 2.0;
pub const DEFAULT_WORD_PENALTY: f64 = -1.0;
pub const ROW_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    NoFrames,
    NoSymbols,
    DuplicateSymbol(char),
    RowWidth { frame: usize, expected: usize, found: usize },
    NotNormalized { frame: usize, log_sum: f64 },
    NonFinite { frame: usize },
    SymbolMismatch(Vec<char>),
    Config(&'static str),
    UnknownChar(char),
    EmptyReference,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoFrames => f.write_str("emissions have no frames"),
            Self::NoSymbols => f.write_str("emission symbol table is empty"),
            Self::DuplicateSymbol(c) => write!(f, "duplicate symbol {c:?}"),
            Self::RowWidth { frame, expected, found } => {
                write!(f, "frame {frame}: expected {expected} columns, found {found}")
            }
            Self::NotNormalized { frame, log_sum } => {
                write!(f, "frame {frame}: log-sum-exp is {log_sum}, not 0")
            }
            Self::NonFinite { frame } => write!(f, "frame {frame}: NaN or +inf log probability"),
            Self::SymbolMismatch(cs) => {
                write!(f, "symbol mismatch: LM characters {cs:?} are not emission symbols")
            }
            Self::Config(msg) => f.write_str(msg),
            Self::UnknownChar(c) => write!(f, "character {c:?} is not in the symbol table"),
            Self::EmptyReference => f.write_str("empty reference"),
        }
    }
}

impl core::error::Error for DecodeError {}

/// `T x (V+1)` natural-log probabilities; column `V` is the blank.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    symbols: Vec<char>,
    frames: usize,
    data: Vec<f64>,
}

impl EmissionMatrix {
    pub fn new(symbols: Vec<char>, rows: Vec<Vec<f64>>) -> Result<Self, DecodeError> {
        let width = symbols.len() + 1;
        let mut data = Vec::with_capacity(rows.len() * width);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(DecodeError::RowWidth { frame: t, expected: width, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(symbols, data)
    }

    /// Row-major data with `symbols.len() + 1` columns per frame.
    pub fn from_flat(symbols: Vec<char>, data: Vec<f64>) -> Result<Self, DecodeError> {
        if symbols.is_empty() {
            return Err(DecodeError::NoSymbols);
        }
        let mut seen = symbols.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(DecodeError::DuplicateSymbol(w[0]));
        }
        let width = symbols.len() + 1;
        if data.is_empty() {
            return Err(DecodeError::NoFrames);
        }
        if !data.len().is_multiple_of(width) {
            let frame = data.len() / width;
            return Err(DecodeError::RowWidth { frame, expected: width, found: data.len() % width });
        }
        for (t, row) in data.chunks(width).enumerate() {
            if row.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(DecodeError::NonFinite { frame: t });
            }
            let s = math::log_sum_exp(row);
            if !(math::abs(s) <= ROW_TOLERANCE) {
                return Err(DecodeError::NotNormalized { frame: t, log_sum: s });
            }
        }
        Ok(Self { frames: data.len() / width, symbols, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn blank(&self) -> usize {
        self.symbols.len()
    }

    pub fn width(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.data[t * w..(t + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-frame argmax (lowest index on ties), repeats collapsed, blanks removed.
pub fn greedy_decode(em: &EmissionMatrix) -> String {
    let mut out = String::new();
    let mut prev = None;
    for t in 0..em.frames() {
        let row = em.row(t);
        let mut best = 0;
        for (k, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = k;
            }
        }
        if Some(best) != prev && best != em.blank() {
            out.push(em.symbols[best]);
        }
        prev = Some(best);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub beam_width: usize,
    pub lm_weight: f64,
    pub word_penalty: f64,
    pub n_best: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            beam_width: DEFAULT_BEAM_WIDTH,
            lm_weight: DEFAULT_LM_WEIGHT,
            word_penalty: DEFAULT_WORD_PENALTY,
            n_best: 1,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::Config("beam_width must be at least 1"));
        }
        if self.n_best == 0 {
            return Err(DecodeError::Config("n_best must be at least 1"));
        }
        if !self.lm_weight.is_finite() || !self.word_penalty.is_finite() {
            return Err(DecodeError::Config("lm_weight and word_penalty must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub text: String,
    /// `ln(p_blank + p_non_blank)` of the prefix.
    pub acoustic: f64,
    /// Accumulated fused LM and word-penalty terms.
    pub lm: f64,
    pub score: f64,
}

struct Node {
    parent: u32,
    ch: Option<char>,
    symbol: Option<usize>,
    children: BTreeMap<char, u32>,
    fusion: Fusion,
}

/// LM bookkeeping that depends only on the prefix text.
#[derive(Clone)]
struct Fusion {
    /// Fused terms of completed words.
    lm: f64,
    /// Fused `<unk>` term already owed by a partial word that is no longer
    /// a prefix of any vocabulary word. It counts toward pruning and is
    /// exactly what the word is charged when it completes.
    pending: Option<f64>,
    state: Option<LmState>,
    partial: String,
    /// Fused `<unk>` term under `state`.
    unk: f64,
}

impl Fusion {
    fn rank(&self) -> f64 {
        self.lm + self.pending.unwrap_or(0.0)
    }
}

#[derive(Clone, Copy)]
struct Probs {
    blank: f64,
    non_blank: f64,
}

impl Probs {
    const ZERO: Probs = Probs { blank: f64::NEG_INFINITY, non_blank: f64::NEG_INFINITY };

    fn total(&self) -> f64 {
        math::log_add(self.blank, self.non_blank)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    Node(u32),
    Extend(u32, char),
}

/// Frame-by-frame CTC prefix beam search. Prefixes live in a trie, so two
/// alignments reaching the same text always merge into one entry.
pub struct PrefixBeamSearch<'a> {
    lm: Option<&'a NGramModel>,
    config: DecoderConfig,
    symbols: Vec<char>,
    nodes: Vec<Node>,
    beam: Vec<(u32, Probs)>,
    scratch: String,
    slot: Vec<u32>,
}

impl<'a> PrefixBeamSearch<'a> {
    pub fn new(symbols: &[char], lm: Option<&'a NGramModel>, config: &DecoderConfig) -> Result<Self, DecodeError> {
        config.validate()?;
        if let Some(model) = lm {
            check_symbols(symbols, model)?;
        }
        let root = Node {
            parent: 0,
            ch: None,
            symbol: None,
            children: BTreeMap::new(),
            fusion: Fusion { lm: 0.0, pending: None, state: None, partial: String::new(), unk: 0.0 },
        };
        let mut search = Self {
            lm,
            config: config.clone(),
            symbols: symbols.to_vec(),
            nodes: vec![root],
            beam: vec![(0, Probs { blank: 0.0, non_blank: f64::NEG_INFINITY })],
            scratch: String::new(),
            slot: Vec::new(),
        };
        if let Some(model) = lm {
            let state = model.begin_state();
            search.nodes[0].fusion.unk = search.fused(model.log10_prob(&state.0, UNK));
            search.nodes[0].fusion.state = Some(state);
        }
        Ok(search)
    }

    fn fused(&self, log10_p: f64) -> f64 {
        self.config.lm_weight * math::LN_10 * log10_p + self.config.word_penalty
    }

    /// Fused term for completing `word` after `state`.
    fn complete(&self, model: &NGramModel, state: &LmState, word: &str) -> (f64, LmState) {
        let (p, next) = model.advance(state, model.vocab().id(word));
        (self.fused(p), next)
    }

    /// Ranking term of `node` extended by `c`, without building the node.
    fn extension_rank(&mut self, node: u32, c: char) -> f64 {
        let f = &self.nodes[node as usize].fusion;
        let (Some(model), Some(state)) = (self.lm, &f.state) else {
            return f.rank();
        };
        if c == ' ' {
            return match (f.partial.is_empty(), f.pending) {
                (true, _) => f.lm,
                (false, Some(p)) => f.lm + p,
                (false, None) => f.lm + self.fused(model.log10_prob(&state.0, model.vocab().id(&f.partial))),
            };
        }
        if let Some(p) = f.pending {
            return f.lm + p;
        }
        self.scratch.clear();
        self.scratch.push_str(&f.partial);
        self.scratch.push(c);
        if model.vocab().is_prefix(&self.scratch) {
            f.lm
        } else {
            f.lm + f.unk
        }
    }

    fn extend(&self, node: u32, c: char) -> Fusion {
        let f = &self.nodes[node as usize].fusion;
        let (Some(model), Some(state)) = (self.lm, &f.state) else {
            return f.clone();
        };
        if c == ' ' {
            if f.partial.is_empty() {
                return f.clone();
            }
            let (term, next) = self.complete(model, state, &f.partial);
            let unk = self.fused(model.log10_prob(&next.0, UNK));
            return Fusion { lm: f.lm + term, pending: None, state: Some(next), partial: String::new(), unk };
        }
        let mut partial = f.partial.clone();
        partial.push(c);
        let pending = match f.pending {
            Some(p) => Some(p),
            None if !model.vocab().is_prefix(&partial) => Some(f.unk),
            None => None,
        };
        Fusion { lm: f.lm, pending, state: f.state.clone(), partial, unk: f.unk }
    }

    pub fn text(&self, mut node: u32) -> String {
        let mut rev = Vec::new();
        while let Some(c) = self.nodes[node as usize].ch {
            rev.push(c);
            node = self.nodes[node as usize].parent;
        }
        rev.into_iter().rev().collect()
    }

    fn key_text(&self, key: Key) -> String {
        match key {
            Key::Node(n) => self.text(n),
            Key::Extend(n, c) => {
                let mut s = self.text(n);
                s.push(c);
                s
            }
        }
    }

    /// Advances one frame of natural-log probabilities (blank last).
    pub fn step(&mut self, row: &[f64]) {
        let blank = self.symbols.len();
        // Existing nodes can be reached from several beam entries, so they
        // merge through `slot`; an `Extend` key has exactly one source.
        let mut slot = core::mem::take(&mut self.slot);
        slot.resize(self.nodes.len(), u32::MAX);
        let mut next: Vec<(Key, Probs)> = Vec::with_capacity(self.beam.len() * (blank + 1));
        let mut add_node = |next: &mut Vec<(Key, Probs)>, node: u32, blank_p: f64, non_blank_p: f64| {
            let i = &mut slot[node as usize];
            if *i == u32::MAX {
                *i = next.len() as u32;
                next.push((Key::Node(node), Probs::ZERO));
            }
            let e = &mut next[*i as usize].1;
            e.blank = math::log_add(e.blank, blank_p);
            e.non_blank = math::log_add(e.non_blank, non_blank_p);
        };
        for &(node, p) in &self.beam {
            let total = p.total();
            let n = &self.nodes[node as usize];
            add_node(&mut next, node, total + row[blank], f64::NEG_INFINITY);
            if let Some(k) = n.symbol {
                add_node(&mut next, node, f64::NEG_INFINITY, p.non_blank + row[k]);
            }
            for (k, &c) in self.symbols.iter().enumerate() {
                let from = if n.symbol == Some(k) { p.blank } else { total };
                match n.children.get(&c) {
                    Some(&child) => add_node(&mut next, child, f64::NEG_INFINITY, from + row[k]),
                    None => next.push((Key::Extend(node, c), Probs { blank: f64::NEG_INFINITY, non_blank: from + row[k] })),
                }
            }
        }
        for (key, _) in &next {
            if let Key::Node(n) = key {
                slot[*n as usize] = u32::MAX;
            }
        }
        self.slot = slot;

        let mut scored: Vec<(Key, Probs, f64)> = Vec::with_capacity(next.len());
        for (key, p) in next {
            if p.total() == f64::NEG_INFINITY {
                continue;
            }
            let rank = match key {
                Key::Node(n) => self.nodes[n as usize].fusion.rank(),
                Key::Extend(n, c) => self.extension_rank(n, c),
            };
            scored.push((key, p, p.total() + rank));
        }
        let order = |a: &(Key, Probs, f64), b: &(Key, Probs, f64)| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.key_text(a.0).cmp(&self.key_text(b.0)))
        };
        if scored.len() > self.config.beam_width {
            scored.select_nth_unstable_by(self.config.beam_width, order);
            scored.truncate(self.config.beam_width);
        }
        scored.sort_by(order);
        scored.truncate(self.config.beam_width);

        self.beam.clear();
        for (key, p, _) in scored {
            let node = match key {
                Key::Extend(parent, c) => {
                    let fusion = self.extend(parent, c);
                    let id = self.nodes.len() as u32;
                    let symbol = self.symbols.iter().position(|&s| s == c);
                    self.nodes.push(Node { parent, ch: Some(c), symbol, children: BTreeMap::new(), fusion });
                    self.nodes[parent as usize].children.insert(c, id);
                    id
                }
                Key::Node(n) => n,
            };
            self.beam.push((node, p));
        }
    }

    /// Current beam in rank order, without end-of-utterance terms. `lm`
    /// includes any `<unk>` term owed by an unfinished word.
    pub fn hypotheses(&self) -> Vec<Hypothesis> {
        self.beam
            .iter()
            .map(|&(node, p)| {
                let lm = self.nodes[node as usize].fusion.rank();
                Hypothesis { text: self.text(node), acoustic: p.total(), lm, score: p.total() + lm }
            })
            .collect()
    }

    /// Closes the last word, adds `</s>` and returns the n-best list.
    pub fn finish(&self) -> Vec<Hypothesis> {
        let mut out: Vec<Hypothesis> = self
            .beam
            .iter()
            .map(|&(node, p)| {
                let f = &self.nodes[node as usize].fusion;
                let mut lm = f.lm;
                if let (Some(model), Some(state)) = (self.lm, &f.state) {
                    let state = if f.partial.is_empty() {
                        state.clone()
                    } else {
                        let (term, next) = self.complete(model, state, &f.partial);
                        lm += term;
                        next
                    };
                    lm += self.config.lm_weight * math::LN_10 * model.log10_prob(&state.0, EOS);
                }
                Hypothesis { text: self.text(node), acoustic: p.total(), lm, score: p.total() + lm }
            })
            .collect();
        out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.text.cmp(&b.text)));
        out.truncate(self.config.n_best);
        out
    }
}

/// Every character of every LM word must be an emission symbol. An LM
/// corpus is cleaned against the acoustic model's character inventory, so
/// a word it cannot spell means the two were built for different alphabets.
pub fn check_symbols(symbols: &[char], lm: &NGramModel) -> Result<(), DecodeError> {
    let mut missing: Vec<char> = Vec::new();
    for w in lm.vocab().words().iter().skip(3) {
        for c in w.chars() {
            if !symbols.contains(&c) && !missing.contains(&c) {
                missing.push(c);
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        missing.sort_unstable();
        Err(DecodeError::SymbolMismatch(missing))
    }
}

/// Prefix beam search over the whole matrix. Without a model, decoding is
/// pure CTC and `lm_weight` and `word_penalty` are unused.
pub fn beam_decode(
    em: &EmissionMatrix,
    lm: Option<&NGramModel>,
    config: &DecoderConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let mut search = PrefixBeamSearch::new(em.symbols(), lm, config)?;
    for t in 0..em.frames() {
        search.step(em.row(t));
    }
    Ok(search.finish())
}

/// Renders text as CTC emissions: each character holds `frames_per_char`
/// frames followed by one blank frame, with a blank frame at each end.
/// Frame logits are `peak` on the target plus `noise`-scaled Gaussian noise
/// on every column, then log-softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MockAcousticModel {
    pub symbols: Vec<char>,
    pub frames_per_char: usize,
    pub peak: f64,
    pub noise: f64,
}

impl MockAcousticModel {
    pub fn new(symbols: Vec<char>, noise: f64) -> Self {
        Self { symbols, frames_per_char: 2, peak: 6.0, noise }
    }

    pub fn emissions<R: Rng + ?Sized>(&self, text: &str, rng: &mut R) -> Result<EmissionMatrix, DecodeError> {
        let blank = self.symbols.len();
        let mut targets = vec![blank];
        for c in text.chars() {
            let k = self.symbols.iter().position(|&s| s == c).ok_or(DecodeError::UnknownChar(c))?;
            targets.extend(core::iter::repeat_n(k, self.frames_per_char.max(1)));
            targets.push(blank);
        }
        let width = blank + 1;
        let mut data = Vec::with_capacity(targets.len() * width);
        for &target in &targets {
            let mut row: Vec<f64> = (0..width).map(|_| self.noise * rng.sample::<f64, _>(StandardNormal)).collect();
            row[target] += self.peak;
            let z = math::log_sum_exp(&row);
            data.extend(row.iter().map(|v| v - z));
        }
        EmissionMatrix::from_flat(self.symbols.clone(), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditCount {
    pub distance: usize,
    pub reference_len: usize,
}

impl EditCount {
    pub fn rate(&self) -> f64 {
        self.distance as f64 / self.reference_len as f64
    }
}

impl core::ops::Add for EditCount {
    type Output = EditCount;

    fn add(self, o: EditCount) -> EditCount {
        EditCount { distance: self.distance + o.distance, reference_len: self.reference_len + o.reference_len }
    }
}

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn word_errors(reference: &str, hypothesis: &str) -> Result<EditCount, DecodeError> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    if r.is_empty() {
        return Err(DecodeError::EmptyReference);
    }
    Ok(EditCount { distance: edit_distance(&r, &h), reference_len: r.len() })
}

/// Characters with whitespace removed.
pub fn char_errors(reference: &str, hypothesis: &str) -> Result<EditCount, DecodeError> {
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let h: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    if r.is_empty() {
        return Err(DecodeError::EmptyReference);
    }
    Ok(EditCount { distance: edit_distance(&r, &h), reference_len: r.len() })
}

pub fn wer(reference: &str, hypothesis: &str) -> Result<f64, DecodeError> {
    word_errors(reference, hypothesis).map(|e| e.rate())
}

pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, DecodeError> {
    char_errors(reference, hypothesis).map(|e| e.rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{build_vocab, train_ngram};

    fn ln_rows(symbols: &[char], rows: &[&[f64]]) -> EmissionMatrix {
        let rows = rows.iter().map(|r| r.iter().map(|p| libm::log(*p)).collect()).collect();
        EmissionMatrix::new(symbols.to_vec(), rows).unwrap()
    }

    #[test]
    fn greedy_rules() {
        let s = ['a', 'b'];
        let hi = 0.8;
        let lo = 0.1;
        let a: &[f64] = &[hi, lo, lo];
        let b: &[f64] = &[lo, hi, lo];
        let k: &[f64] = &[lo, lo, hi];
        assert_eq!(greedy_decode(&ln_rows(&s, &[a, a, k, b])), "ab");
        assert_eq!(greedy_decode(&ln_rows(&s, &[k, k])), "");
        assert_eq!(greedy_decode(&ln_rows(&s, &[a, k, a])), "aa");
    }

    #[test]
    fn uniform_two_frames() {
        let third = 1.0 / 3.0;
        let u: &[f64] = &[third, third, third];
        let em = ln_rows(&['a', 'b'], &[u, u]);
        let cfg = DecoderConfig { beam_width: 9, lm_weight: 0.0, word_penalty: 0.0, n_best: 9 };
        let hyps = beam_decode(&em, None, &cfg).unwrap();
        let p: BTreeMap<String, f64> = hyps.iter().map(|h| (h.text.clone(), libm::exp(h.acoustic))).collect();
        assert_eq!(p.len(), 5);
        for (text, want) in [("a", 1.0 / 3.0), ("b", 1.0 / 3.0), ("", 1.0 / 9.0), ("ab", 1.0 / 9.0), ("ba", 1.0 / 9.0)] {
            assert!((p[text] - want).abs() < 1e-12, "{text}");
        }
        // ties resolve lexicographically
        assert_eq!(hyps[0].text, "a");
        assert_eq!(hyps[1].text, "b");
    }

    #[test]
    fn rejects_bad_matrices() {
        assert_eq!(EmissionMatrix::from_flat(vec!['a'], vec![]), Err(DecodeError::NoFrames));
        assert!(matches!(
            EmissionMatrix::from_flat(vec!['a'], vec![-0.1, -0.1]),
            Err(DecodeError::NotNormalized { frame: 0, .. })
        ));
        assert_eq!(EmissionMatrix::from_flat(vec!['a', 'a'], vec![0.0; 3]), Err(DecodeError::DuplicateSymbol('a')));
        let cfg = DecoderConfig { beam_width: 0, ..DecoderConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn symbol_mismatch() {
        let v = build_vocab(["ab ba"], 10).unwrap();
        let m = train_ngram(["ab ba"], &v, 2).unwrap().model;
        assert!(check_symbols(&['a', 'b', 'c', ' '], &m).is_ok());
        assert_eq!(check_symbols(&['a', 'z', ' '], &m), Err(DecodeError::SymbolMismatch(vec!['b'])));
    }

    #[test]
    fn error_rates() {
        assert!((wer("a b c", "a x c").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer("a b", "a b").unwrap(), 0.0);
        assert_eq!(cer("ab c", "abc").unwrap(), 0.0);
        assert_eq!(cer("abc", "abd").unwrap(), 1.0 / 3.0);
        assert_eq!(wer("", "x"), Err(DecodeError::EmptyReference));
        assert_eq!(wer("  ", ""), Err(DecodeError::EmptyReference));
    }

    #[test]
    fn mock_model_is_greedy_decodable_without_noise() {
        let am = MockAcousticModel::new(vec!['a', 'b', ' '], 0.0);
        let mut rng = crate::synth::rng(3);
        let em = am.emissions("aab ba", &mut rng).unwrap();
        assert_eq!(greedy_decode(&em), "aab ba");
        assert_eq!(em.frames(), 1 + 6 * 3);
        assert_eq!(am.emissions("c", &mut rng), Err(DecodeError::UnknownChar('c')));
    }
}
