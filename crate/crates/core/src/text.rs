//! Transcript cleaning: punctuation stripping, NFD, digit rejection and
//! per-language character vocabularies.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextError {
    EmptyVocabulary,
    DigitInVocabulary(char),
    BadEntry { line: usize, entry: String },
    UnknownLanguage(String),
}

impl fmt::Display for TextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyVocabulary => f.write_str("vocabulary is empty"),
            Self::DigitInVocabulary(c) => write!(f, "vocabulary contains digit {c:?}"),
            Self::BadEntry { line, entry } => write!(f, "line {line}: bad vocabulary entry {entry:?}"),
            Self::UnknownLanguage(l) => write!(f, "no built-in vocabulary for {l:?}"),
        }
    }
}

impl core::error::Error for TextError {}

pub fn is_punct_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// Unicode P* and S* characters minus a whitelist.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PunctSet {
    whitelist: BTreeSet<char>,
}

impl PunctSet {
    pub fn with_whitelist(chars: impl IntoIterator<Item = char>) -> Self {
        Self { whitelist: chars.into_iter().collect() }
    }

    /// Keeps every punctuation or symbol character the vocabulary allows.
    pub fn for_vocabulary(vocab: &CharVocabulary) -> Self {
        Self::with_whitelist(vocab.allowed.iter().copied().filter(|c| is_punct_or_symbol(*c)))
    }

    pub fn contains(&self, c: char) -> bool {
        is_punct_or_symbol(c) && !self.whitelist.contains(&c)
    }
}

/// Deletes characters in `set`, collapses whitespace runs to one space and
/// trims. Deleted characters are tallied into `removed` when given.
pub fn strip_punct_counting(text: &str, set: &PunctSet, mut removed: Option<&mut BTreeMap<char, usize>>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if set.contains(c) {
            if let Some(r) = removed.as_deref_mut() {
                *r.entry(c).or_default() += 1;
            }
        } else if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

pub fn strip_punct(text: &str, set: &PunctSet) -> String {
    strip_punct_counting(text, set, None)
}

pub fn nfd(text: &str) -> String {
    text.nfd().collect()
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// True iff some character is a decimal digit (category Nd) in any script.
pub fn has_digits(text: &str) -> bool {
    text.chars().any(|c| get_general_category(c) == GeneralCategory::DecimalNumber)
}

pub fn char_inventory<'a>(texts: impl IntoIterator<Item = &'a str>) -> BTreeSet<char> {
    texts.into_iter().flat_map(str::chars).filter(|c| *c != ' ').collect()
}

const BUILTIN: &[(&str, &str, &str)] = &[
    ("hi", "Hindi (Devanagari)", include_str!("../data/vocab/hi.vocab")),
    ("en", "English (Latin)", include_str!("../data/vocab/en.vocab")),
    ("ta", "Tamil", include_str!("../data/vocab/ta.vocab")),
];

/// Allowed post-NFD code points for one language. The space is always
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocabulary {
    pub language: String,
    pub name: String,
    allowed: BTreeSet<char>,
}

impl CharVocabulary {
    pub fn new(
        language: impl Into<String>,
        name: impl Into<String>,
        chars: impl IntoIterator<Item = char>,
    ) -> Result<Self, TextError> {
        let mut allowed: BTreeSet<char> = chars.into_iter().collect();
        allowed.remove(&' ');
        if allowed.is_empty() {
            return Err(TextError::EmptyVocabulary);
        }
        if let Some(d) = allowed.iter().find(|c| get_general_category(**c) == GeneralCategory::DecimalNumber) {
            return Err(TextError::DigitInVocabulary(*d));
        }
        allowed.insert(' ');
        Ok(Self { language: language.into(), name: name.into(), allowed })
    }

    /// One entry per line: a literal character or `U+XXXX`; `#` starts a
    /// comment (a literal `#` entry must be written as `U+0023`).
    pub fn parse(language: &str, name: &str, text: &str) -> Result<Self, TextError> {
        let mut chars = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let entry = raw.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            let bad = || TextError::BadEntry { line: i + 1, entry: entry.to_string() };
            let c = if let Some(hex) = entry.strip_prefix("U+").or_else(|| entry.strip_prefix("u+")) {
                u32::from_str_radix(hex, 16).ok().and_then(char::from_u32).ok_or_else(bad)?
            } else {
                let mut it = entry.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => c,
                    _ => return Err(bad()),
                }
            };
            chars.push(c);
        }
        Self::new(language, name, chars)
    }

    pub fn builtin(language: &str) -> Result<Self, TextError> {
        let (lang, name, data) = BUILTIN
            .iter()
            .find(|(l, _, _)| *l == language)
            .ok_or_else(|| TextError::UnknownLanguage(language.to_string()))?;
        Self::parse(lang, name, data)
    }

    pub fn builtin_languages() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(l, _, _)| *l)
    }

    pub fn contains(&self, c: char) -> bool {
        self.allowed.contains(&c)
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.allowed.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }
}

/// Characters of `text` outside the vocabulary; clean iff empty.
pub fn check_foreign(text: &str, vocab: &CharVocabulary) -> (bool, BTreeSet<char>) {
    let offending: BTreeSet<char> = text.chars().filter(|c| !vocab.contains(*c)).collect();
    (offending.is_empty(), offending)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Kept(String),
    Numeric(String),
    Foreign { text: String, offending: BTreeSet<char> },
}

impl CleanOutcome {
    pub fn text(&self) -> &str {
        match self {
            Self::Kept(t) | Self::Numeric(t) | Self::Foreign { text: t, .. } => t,
        }
    }

    pub fn is_kept(&self) -> bool {
        matches!(self, Self::Kept(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped_foreign: usize,
    pub dropped_numeric: usize,
    pub chars_removed: BTreeMap<char, usize>,
    pub foreign_chars: BTreeMap<char, usize>,
}

impl CleanReport {
    pub fn total(&self) -> usize {
        self.kept + self.dropped_foreign + self.dropped_numeric
    }
}

/// Cleaning for one utterance, in fixed order: strip punctuation, NFD,
/// reject digits, reject foreign characters.
#[derive(Debug, Clone)]
pub struct Cleaner {
    pub punct: PunctSet,
    pub vocab: CharVocabulary,
}

impl Cleaner {
    pub fn new(vocab: CharVocabulary) -> Self {
        Self { punct: PunctSet::for_vocabulary(&vocab), vocab }
    }

    pub fn clean(&self, text: &str, report: &mut CleanReport) -> CleanOutcome {
        let stripped = strip_punct_counting(text, &self.punct, Some(&mut report.chars_removed));
        let normalized = nfd(&stripped);
        if has_digits(&normalized) {
            report.dropped_numeric += 1;
            return CleanOutcome::Numeric(normalized);
        }
        let (clean, offending) = check_foreign(&normalized, &self.vocab);
        if clean {
            report.kept += 1;
            CleanOutcome::Kept(normalized)
        } else {
            for c in &offending {
                *report.foreign_chars.entry(*c).or_default() += 1;
            }
            report.dropped_foreign += 1;
            CleanOutcome::Foreign { text: normalized, offending }
        }
    }
}
