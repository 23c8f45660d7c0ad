//! Back-off word n-gram models: vocabulary selection, interpolated modified
//! Kneser-Ney estimation, ARPA text serialization and scoring.
//!
//! Estimation follows the KenLM `lmplz` recipe. Sentences are padded as
//! `<s> w1 .. wn </s>`. The highest order keeps raw counts, and lower orders
//! use continuation counts, except n-grams that begin with `<s>`, which keep
//! raw counts because they cannot be extended to the left. The unigram level
//! interpolates with the uniform distribution over every word but `<s>`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::math;

pub type WordId = u32;

pub const UNK: WordId = 0;
pub const BOS: WordId = 1;
pub const EOS: WordId = 2;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_TOP_K: usize = 500_000;
pub const FALLBACK_DISCOUNT: f64 = 0.75;
pub const MAX_ORDER: usize = 5;

/// Log10 probability written for `<s>`, which is never predicted.
pub const BOS_LOG10: f64 = -99.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LmError {
    EmptyCorpus,
    Order(usize),
    MalformedHeader(String),
    CountMismatch { order: usize, declared: usize, found: usize },
    MissingEnd,
    BadLine { line: usize, reason: String },
}

impl fmt::Display for LmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyCorpus => f.write_str("empty corpus"),
            Self::Order(n) => write!(f, "order must be in 1..={MAX_ORDER}, got {n}"),
            Self::MalformedHeader(msg) => write!(f, "malformed header: {msg}"),
            Self::CountMismatch { order, declared, found } => {
                write!(f, "count mismatch: {order}-grams declared {declared}, found {found}")
            }
            Self::MissingEnd => f.write_str("missing \\end\\"),
            Self::BadLine { line, reason } => write!(f, "line {line}: {reason}"),
        }
    }
}

impl core::error::Error for LmError {}

#[derive(Debug, Clone, PartialEq)]
pub enum LmWarning {
    /// Closed-form discounts were unusable at this order; the fallback was used.
    DiscountFallback { order: usize, reason: String },
    /// No sentence was long enough for the requested order.
    OrderTruncated { requested: usize, used: usize },
}

impl fmt::Display for LmWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DiscountFallback { order, reason } => {
                write!(f, "{order}-gram discounts fall back to {FALLBACK_DISCOUNT}: {reason}")
            }
            Self::OrderTruncated { requested, used } => {
                write!(f, "corpus too short for order {requested}; model truncated to order {used}")
            }
        }
    }
}

/// Word list with ids `<unk>`=0, `<s>`=1, `</s>`=2, then words by
/// descending count with lexicographic ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, WordId>,
}

impl Vocabulary {
    fn with_specials() -> Self {
        let mut v = Self { words: Vec::new(), counts: Vec::new(), index: BTreeMap::new() };
        for w in [UNK_TOKEN, BOS_TOKEN, EOS_TOKEN] {
            v.push(w.to_string(), 0);
        }
        v
    }

    fn push(&mut self, word: String, count: u64) -> WordId {
        let id = self.words.len() as WordId;
        self.index.insert(word.clone(), id);
        self.words.push(word);
        self.counts.push(count);
        id
    }

    /// Vocabulary over an explicit word list, in the given order.
    pub fn from_words<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut v = Self::with_specials();
        for w in words {
            let w = w.as_ref();
            if !v.index.contains_key(w) {
                v.push(w.to_string(), 0);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Id of `word`, or `<unk>` when absent.
    pub fn id(&self, word: &str) -> WordId {
        self.get(word).unwrap_or(UNK)
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// True when some non-special word starts with `prefix`.
    pub fn is_prefix(&self, prefix: &str) -> bool {
        use core::ops::Bound;
        self.index
            .range::<str, _>((Bound::Included(prefix), Bound::Unbounded))
            .take_while(|(w, _)| w.starts_with(prefix))
            .any(|(_, &id)| id > EOS)
    }

    /// Maps a whitespace-tokenized sentence to ids; unknown and literal
    /// sentence markers become `<unk>`.
    pub fn encode(&self, sentence: &str) -> Vec<WordId> {
        sentence
            .split_whitespace()
            .map(|w| match self.id(w) {
                BOS | EOS => UNK,
                id => id,
            })
            .collect()
    }
}

/// Keeps the `top_k` most frequent whitespace tokens. Sentence markers in
/// the text are ignored.
pub fn build_vocab<S: AsRef<str>>(corpus: impl IntoIterator<Item = S>, top_k: usize) -> Result<Vocabulary, LmError> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for line in corpus {
        for w in line.as_ref().split_whitespace() {
            if matches!(w, UNK_TOKEN | BOS_TOKEN | EOS_TOKEN) {
                continue;
            }
            match counts.get_mut(w) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(w.to_string(), 1);
                }
            }
        }
    }
    if counts.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    // BTreeMap order is lexicographic, and the sort is stable.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked.truncate(top_k);
    let mut v = Vocabulary::with_specials();
    for (w, c) in ranked {
        v.push(w, c);
    }
    Ok(v)
}

/// Discounts for adjusted counts 1, 2 and 3+.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount(pub [f64; 3]);

impl Discount {
    pub const FALLBACK: Discount = Discount([FALLBACK_DISCOUNT; 3]);

    pub fn get(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.0[0],
            2 => self.0[1],
            _ => self.0[2],
        }
    }

    /// Chen and Goodman's estimate from counts-of-counts `n[k-1]` = number of
    /// n-grams with adjusted count k, k = 1..=4.
    pub fn estimate(n: [u64; 4]) -> Result<Discount, String> {
        for (k, c) in n.iter().take(3).enumerate() {
            if *c == 0 {
                return Err(format!("no n-grams with adjusted count {}", k + 1));
            }
        }
        let y = n[0] as f64 / (n[0] as f64 + 2.0 * n[1] as f64);
        let mut d = [0.0; 3];
        for j in 1..=3usize {
            let v = j as f64 - (j + 1) as f64 * y * n[j] as f64 / n[j - 1] as f64;
            if !(v > 0.0 && v <= j as f64) {
                return Err(format!("D{j} = {v} out of range"));
            }
            d[j - 1] = v;
        }
        Ok(Discount(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramEntry {
    pub log10_prob: f64,
    /// Present when the n-gram is a context of some longer entry.
    pub log10_backoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab: Vocabulary,
    /// `tables[n-1]` holds the n-grams.
    tables: Vec<BTreeMap<Vec<WordId>, NGramEntry>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    pub total: f64,
    /// One entry per token plus the closing `</s>`.
    pub per_token: Vec<f64>,
    pub oov: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub order: usize,
    /// Per-order discounts replacing the closed-form estimate.
    pub discounts: Option<Vec<Discount>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, discounts: None }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: NGramModel,
    pub discounts: Vec<Discount>,
    pub warnings: Vec<LmWarning>,
}

pub fn train_ngram<S: AsRef<str>>(
    corpus: impl IntoIterator<Item = S>,
    vocab: &Vocabulary,
    order: usize,
) -> Result<Trained, LmError> {
    train_ngram_with(corpus, vocab, &TrainConfig { order, discounts: None })
}

pub fn train_ngram_with<S: AsRef<str>>(
    corpus: impl IntoIterator<Item = S>,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<Trained, LmError> {
    if config.order == 0 || config.order > MAX_ORDER {
        return Err(LmError::Order(config.order));
    }
    let sentences: Vec<Vec<WordId>> = corpus
        .into_iter()
        .map(|s| {
            let mut p = vec![BOS];
            p.extend(vocab.encode(s.as_ref()));
            p.push(EOS);
            p
        })
        .collect();
    if sentences.iter().all(|p| p.len() == 2) {
        return Err(LmError::EmptyCorpus);
    }
    let mut warnings = Vec::new();
    let longest = sentences.iter().map(Vec::len).max().unwrap_or(0);
    let order = config.order.min(longest);
    if order < config.order {
        warnings.push(LmWarning::OrderTruncated { requested: config.order, used: order });
    }

    let adjusted = adjusted_counts(&sentences, order);

    let discounts = match &config.discounts {
        Some(d) if d.len() >= order => d[..order].to_vec(),
        Some(_) => return Err(LmError::Order(order)),
        None => (0..order)
            .map(|i| {
                let mut n = [0u64; 4];
                for &c in adjusted[i].values() {
                    if (1..=4).contains(&c) {
                        n[c as usize - 1] += 1;
                    }
                }
                Discount::estimate(n).unwrap_or_else(|reason| {
                    warnings.push(LmWarning::DiscountFallback { order: i + 1, reason });
                    Discount::FALLBACK
                })
            })
            .collect(),
    };

    // gamma and denominator per context, level by level
    let mut gammas: Vec<BTreeMap<Vec<WordId>, f64>> = Vec::with_capacity(order);
    let mut denominators: Vec<BTreeMap<Vec<WordId>, f64>> = Vec::with_capacity(order);
    for (i, level) in adjusted.iter().enumerate() {
        let mut g: BTreeMap<Vec<WordId>, f64> = BTreeMap::new();
        let mut den: BTreeMap<Vec<WordId>, f64> = BTreeMap::new();
        let mut iter = level.iter().peekable();
        while let Some((gram, &c)) = iter.next() {
            let ctx = &gram[..i];
            let mut sum = c as f64;
            let mut mass = discounts[i].get(c);
            while let Some((next, &nc)) = iter.peek() {
                if &next[..i] != ctx {
                    break;
                }
                sum += nc as f64;
                mass += discounts[i].get(nc);
                iter.next();
            }
            g.insert(ctx.to_vec(), mass / sum);
            den.insert(ctx.to_vec(), sum);
        }
        gammas.push(g);
        denominators.push(den);
    }

    let uniform = 1.0 / (vocab.len() - 1) as f64;
    let mut probs: Vec<BTreeMap<Vec<WordId>, f64>> = Vec::with_capacity(order);
    let mut unigram = BTreeMap::new();
    let gamma0 = gammas[0].get(&[][..]).copied().unwrap_or(0.0);
    let den0 = denominators[0].get(&[][..]).copied().unwrap_or(1.0);
    for id in 0..vocab.len() as WordId {
        if id == BOS {
            continue;
        }
        let c = adjusted[0].get(&[id][..]).copied().unwrap_or(0);
        let p = (c as f64 - discounts[0].get(c)) / den0 + gamma0 * uniform;
        unigram.insert(vec![id], p);
    }
    probs.push(unigram);
    for i in 1..order {
        let mut level = BTreeMap::new();
        for (gram, &c) in &adjusted[i] {
            let ctx = &gram[..i];
            let lower = probs[i - 1][&gram[1..]];
            let p = (c as f64 - discounts[i].get(c)) / denominators[i][ctx] + gammas[i][ctx] * lower;
            level.insert(gram.clone(), p);
        }
        probs.push(level);
    }

    let mut tables: Vec<BTreeMap<Vec<WordId>, NGramEntry>> = Vec::with_capacity(order);
    for (i, level) in probs.iter().enumerate() {
        let mut t = BTreeMap::new();
        for (gram, &p) in level {
            let backoff = gammas.get(i + 1).and_then(|g| g.get(gram)).map(|&g| math::log10(g));
            t.insert(gram.clone(), NGramEntry { log10_prob: math::log10(p).min(0.0), log10_backoff: backoff });
        }
        if i == 0 {
            let backoff = gammas.get(1).and_then(|g| g.get(&[BOS][..])).map(|&g| math::log10(g));
            t.insert(vec![BOS], NGramEntry { log10_prob: BOS_LOG10, log10_backoff: backoff });
        }
        tables.push(t);
    }

    Ok(Trained { model: NGramModel { vocab: vocab.clone(), tables }, discounts, warnings })
}

/// Raw counts at the top order and for `<s>`-initial n-grams, continuation
/// counts elsewhere. `out[n-1]` holds the n-grams.
fn adjusted_counts(sentences: &[Vec<WordId>], order: usize) -> Vec<BTreeMap<Vec<WordId>, u64>> {
    let mut out: Vec<BTreeMap<Vec<WordId>, u64>> = vec![BTreeMap::new(); order];
    for p in sentences {
        for j in 1..p.len() {
            let start = (j + 1).saturating_sub(order);
            let gram = &p[start..=j];
            if gram.len() == order || start == 0 {
                *out[gram.len() - 1].entry(gram.to_vec()).or_insert(0) += 1;
            }
        }
    }
    for i in (0..order.saturating_sub(1)).rev() {
        let (lower, upper) = out.split_at_mut(i + 1);
        for gram in upper[0].keys() {
            *lower[i].entry(gram[1..].to_vec()).or_insert(0) += 1;
        }
    }
    out
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.tables.len()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn entry(&self, gram: &[WordId]) -> Option<&NGramEntry> {
        self.tables.get(gram.len().checked_sub(1)?)?.get(gram)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.tables.iter().map(BTreeMap::len).collect()
    }

    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = (&Vec<WordId>, &NGramEntry)> {
        self.tables[n - 1].iter()
    }

    /// Every history with a stored backoff, plus the empty history.
    pub fn contexts(&self) -> Vec<Vec<WordId>> {
        let mut out = vec![Vec::new()];
        for t in &self.tables {
            out.extend(t.iter().filter(|(_, e)| e.log10_backoff.is_some()).map(|(g, _)| g.clone()));
        }
        out
    }

    /// Longest-match back-off: if `history + word` is stored, its
    /// probability; otherwise the history's backoff plus the estimate under
    /// the history shortened by one word.
    pub fn log10_prob(&self, history: &[WordId], word: WordId) -> f64 {
        let keep = history.len().min(self.order() - 1);
        let history = &history[history.len() - keep..];
        let mut key: Vec<WordId> = Vec::with_capacity(keep + 1);
        let mut backoff = 0.0;
        for k in (0..=keep).rev() {
            let h = &history[keep - k..];
            key.clear();
            key.extend_from_slice(h);
            key.push(word);
            if let Some(e) = self.tables[k].get(&key[..]) {
                return backoff + e.log10_prob;
            }
            if k > 0 {
                if let Some(b) = self.tables[k - 1].get(h).and_then(|e| e.log10_backoff) {
                    backoff += b;
                }
            }
        }
        // `word` has no unigram, which only happens for ids outside the vocabulary.
        backoff + self.tables[0].get(&[UNK][..]).map_or(BOS_LOG10, |e| e.log10_prob)
    }

    pub fn begin_state(&self) -> LmState {
        LmState(vec![BOS])
    }

    /// Scores `word` after `state` and returns the advanced state.
    pub fn advance(&self, state: &LmState, word: WordId) -> (f64, LmState) {
        let p = self.log10_prob(&state.0, word);
        let keep = self.order().saturating_sub(1);
        let mut next = Vec::with_capacity(keep);
        let all = state.0.iter().copied().chain(core::iter::once(word));
        let total = state.0.len() + 1;
        next.extend(all.skip(total.saturating_sub(keep)));
        (p, LmState(next))
    }

    pub fn score_ids(&self, ids: &[WordId]) -> SentenceScore {
        let mut state = self.begin_state();
        let mut per_token = Vec::with_capacity(ids.len() + 1);
        for &w in ids.iter().chain(core::iter::once(&EOS)) {
            let (p, next) = self.advance(&state, w);
            per_token.push(p);
            state = next;
        }
        SentenceScore {
            total: per_token.iter().sum(),
            per_token,
            oov: ids.iter().filter(|&&w| w == UNK).count(),
        }
    }

    /// Total log10 probability of a whitespace-tokenized sentence including
    /// `</s>`; out-of-vocabulary words score as `<unk>`.
    pub fn score(&self, sentence: &str) -> SentenceScore {
        self.score_ids(&self.vocab.encode(sentence))
    }

    pub fn to_arpa(&self) -> String {
        let mut out = String::new();
        out.push_str("\\data\\\n");
        for (i, t) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", i + 1, t.len());
        }
        for (i, t) in self.tables.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", i + 1);
            // unigrams in id order so a reader recovers the same ids
            for (gram, e) in t {
                out.push_str(&fmt_log10(e.log10_prob));
                out.push('\t');
                for (k, w) in gram.iter().enumerate() {
                    if k > 0 {
                        out.push(' ');
                    }
                    out.push_str(self.vocab.word(*w));
                }
                if let Some(b) = e.log10_backoff {
                    out.push('\t');
                    out.push_str(&fmt_log10(b));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    /// Parses ARPA text. Unigram order fixes word ids after the three
    /// specials; a missing `<unk>` is added with log10 probability -100.
    pub fn from_arpa(text: &str) -> Result<NGramModel, LmError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let header = lines.by_ref().find(|(_, l)| !l.is_empty());
        if !matches!(header, Some((_, "\\data\\"))) {
            return Err(LmError::MalformedHeader("expected \\data\\".into()));
        }
        let mut declared: Vec<usize> = Vec::new();
        let mut section: Option<(usize, usize)> = None;
        for (no, line) in lines.by_ref() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("ngram ") {
                let (n, c) = rest
                    .split_once('=')
                    .ok_or_else(|| LmError::MalformedHeader(format!("line {no}: {line}")))?;
                let n: usize = n.trim().parse().map_err(|_| LmError::MalformedHeader(format!("line {no}: {line}")))?;
                let c: usize = c.trim().parse().map_err(|_| LmError::MalformedHeader(format!("line {no}: {line}")))?;
                if n != declared.len() + 1 {
                    return Err(LmError::MalformedHeader(format!("line {no}: orders out of sequence")));
                }
                declared.push(c);
                continue;
            }
            match parse_section(line) {
                Some(1) => {
                    section = Some((1, no));
                    break;
                }
                _ => return Err(LmError::MalformedHeader(format!("line {no}: unexpected {line:?}"))),
            }
        }
        if declared.is_empty() || section.is_none() {
            return Err(LmError::MalformedHeader("no n-gram counts".into()));
        }
        if declared.len() > MAX_ORDER {
            return Err(LmError::Order(declared.len()));
        }

        let mut raw: Vec<Vec<(Vec<String>, NGramEntry)>> = vec![Vec::new(); declared.len()];
        let mut current = 1usize;
        let mut ended = false;
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(n) = parse_section(line) {
                if n != current + 1 || n > declared.len() {
                    return Err(LmError::BadLine { line: no, reason: format!("unexpected section {line}") });
                }
                current = n;
                continue;
            }
            let bad = |reason: &str| LmError::BadLine { line: no, reason: reason.into() };
            let mut fields = line.split_whitespace();
            let prob: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| bad("bad log probability"))?;
            let words: Vec<String> = fields.by_ref().take(current).map(ToString::to_string).collect();
            if words.len() != current {
                return Err(bad("too few words"));
            }
            let backoff = match fields.next() {
                Some(f) => Some(f.parse::<f64>().map_err(|_| bad("bad backoff"))?),
                None => None,
            };
            if fields.next().is_some() {
                return Err(bad("trailing fields"));
            }
            raw[current - 1].push((words, NGramEntry { log10_prob: prob, log10_backoff: backoff }));
        }
        if !ended {
            return Err(LmError::MissingEnd);
        }
        for (i, (entries, &d)) in raw.iter().zip(&declared).enumerate() {
            if entries.len() != d {
                return Err(LmError::CountMismatch { order: i + 1, declared: d, found: entries.len() });
            }
        }

        let mut vocab = Vocabulary::with_specials();
        for (words, _) in &raw[0] {
            if vocab.get(&words[0]).is_none() {
                vocab.push(words[0].clone(), 0);
            }
        }
        let mut tables: Vec<BTreeMap<Vec<WordId>, NGramEntry>> = vec![BTreeMap::new(); declared.len()];
        for (i, entries) in raw.into_iter().enumerate() {
            for (words, e) in entries {
                let mut ids = Vec::with_capacity(words.len());
                for w in &words {
                    ids.push(vocab.get(w).ok_or_else(|| LmError::BadLine {
                        line: 0,
                        reason: format!("{}-gram uses word {w:?} missing from unigrams", i + 1),
                    })?);
                }
                tables[i].insert(ids, e);
            }
        }
        tables[0].entry(vec![UNK]).or_insert(NGramEntry { log10_prob: -100.0, log10_backoff: None });
        Ok(NGramModel { vocab, tables })
    }
}

fn parse_section(line: &str) -> Option<usize> {
    line.strip_prefix('\\')?.strip_suffix("-grams:")?.parse().ok()
}

/// Seven significant digits, `%g` style.
pub fn fmt_log10(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.6e}");
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-4..7).contains(&exp) {
        let m = digits.trim_end_matches('0');
        out.push_str(&m[..1]);
        if m.len() > 1 {
            out.push('.');
            out.push_str(&m[1..]);
        }
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
        return out;
    }
    let body = if exp >= 0 {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        format!("{int}.{frac}")
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{digits}")
    };
    let body = body.trim_end_matches('0').trim_end_matches('.');
    out.push_str(body);
    out
}

/// Last `order - 1` words seen; starts at `<s>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LmState(pub Vec<WordId>);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_frequency_and_ties() {
        let v = build_vocab(["a a b"], 1).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("a"), 3);
        assert_eq!(v.id("b"), UNK);
        let v = build_vocab(["b a"], 1).unwrap();
        assert_eq!(v.word(3), "a");
        let v = build_vocab(["c b a b"], 10).unwrap();
        assert_eq!(&v.words()[3..], ["b", "a", "c"]);
        let v = build_vocab(["off of"], 10).unwrap();
        assert!(v.is_prefix("") && v.is_prefix("o") && v.is_prefix("off"));
        assert!(!v.is_prefix("offs") && !v.is_prefix("<") && !v.is_prefix("x"));
        assert_eq!(build_vocab(["", "  "], 5), Err(LmError::EmptyCorpus));
    }

    #[test]
    fn discount_estimate_matches_formula() {
        let d = Discount::estimate([10, 4, 2, 1]).unwrap();
        let y = 10.0 / 18.0;
        assert!((d.0[0] - (1.0 - 2.0 * y * 0.4)).abs() < 1e-12);
        assert!((d.0[1] - (2.0 - 3.0 * y * 0.5)).abs() < 1e-12);
        assert!((d.0[2] - (3.0 - 4.0 * y * 0.5)).abs() < 1e-12);
        assert!(Discount::estimate([3, 0, 1, 1]).is_err());
    }

    #[test]
    fn unigram_only_leaves_unk_mass() {
        let v = build_vocab(["a a a"], 10).unwrap();
        let t = train_ngram(["a a a"], &v, 1).unwrap();
        let m = &t.model;
        let pa = m.log10_prob(&[], v.id("a"));
        let punk = m.log10_prob(&[], UNK);
        assert!(punk > -10.0 && punk < pa);
        assert!(t.warnings.iter().any(|w| matches!(w, LmWarning::DiscountFallback { .. })));
    }

    #[test]
    fn continuation_counts() {
        let s: Vec<Vec<WordId>> = vec![vec![BOS, 3, 4, EOS], vec![BOS, 4, 4, EOS]];
        let c = adjusted_counts(&s, 3);
        assert_eq!(c[2].get(&[3, 4, EOS][..]), Some(&1));
        assert_eq!(c[1].get(&[BOS, 3][..]), Some(&1));
        assert_eq!(c[1].get(&[4, EOS][..]), Some(&2));
        // left contexts of 4: <s>, 3 and 4
        assert_eq!(c[0].get(&[4][..]), Some(&3));
        assert_eq!(c[0].get(&[EOS][..]), Some(&1));
    }

    #[test]
    fn short_corpus_truncates_order() {
        let v = build_vocab(["a"], 10).unwrap();
        let t = train_ngram(["a"], &v, 5).unwrap();
        assert_eq!(t.model.order(), 3);
        assert!(t.warnings.contains(&LmWarning::OrderTruncated { requested: 5, used: 3 }));
    }

    #[test]
    fn g7_formatting() {
        assert_eq!(fmt_log10(-0.65817641), "-0.6581764");
        assert_eq!(fmt_log10(-99.0), "-99");
        assert_eq!(fmt_log10(-1.0791812), "-1.079181");
        assert_eq!(fmt_log10(-0.000031234567), "-3.123457e-05");
        assert_eq!(fmt_log10(-12.5), "-12.5");
        assert_eq!(fmt_log10(-0.30103), "-0.30103");
    }

    #[test]
    fn arpa_errors() {
        let good = "\\data\\\nngram 1=2\n\n\\1-grams:\n-1\t<unk>\n-0.5\t</s>\n\n\\end\\\n";
        assert!(NGramModel::from_arpa(good).is_ok());
        let short = good.replace("ngram 1=2", "ngram 1=3");
        let e = NGramModel::from_arpa(&short).unwrap_err();
        assert!(e.to_string().starts_with("count mismatch"));
        assert_eq!(NGramModel::from_arpa(&good.replace("\\end\\", "")), Err(LmError::MissingEnd));
        assert!(matches!(NGramModel::from_arpa("ngram 1=2"), Err(LmError::MalformedHeader(_))));
    }
}
