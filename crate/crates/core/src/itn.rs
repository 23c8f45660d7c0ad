//! Inverse text normalization of spoken cardinals.
//!
//! A small weighted transducer engine over word tokens (tropical semiring)
//! and number grammars compiled from `token<TAB>value<TAB>role` tables.
//! Compiled grammars map a number's words to its digit string, e.g.
//! "two thousand twenty two" to "2022".

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::fmt;

/// Weight of an ε-arc that skips a digit slot. Parses that skip less cost less.
pub const SKIP_PENALTY: f64 = 0.1;

pub const LANGUAGES: [&str; 2] = ["en", "hi"];

const EN_GRAMMAR: &str = include_str!("../data/itn/en.tsv");
const HI_GRAMMAR: &str = include_str!("../data/itn/hi.tsv");

#[derive(Debug, Clone, PartialEq)]
pub enum ItnError {
    NoParse,
    UnsupportedLanguage(String),
    Grammar { line: usize, message: String },
    NoState(u32),
    BadWeight(f64),
}

impl fmt::Display for ItnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoParse => f.write_str("no parse"),
            Self::UnsupportedLanguage(l) => {
                write!(f, "unsupported language {l:?} (supported: {})", LANGUAGES.join(", "))
            }
            Self::Grammar { line, message } => write!(f, "grammar line {line}: {message}"),
            Self::NoState(s) => write!(f, "state {s} does not exist"),
            Self::BadWeight(w) => write!(f, "weight {w} is not a finite non-negative number"),
        }
    }
}

impl core::error::Error for ItnError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    /// `None` is ε.
    pub input: Option<String>,
    pub output: Vec<String>,
    pub weight: f64,
    pub to: u32,
}

impl Arc {
    fn canonical_cmp(&self, o: &Arc) -> Ordering {
        self.input
            .cmp(&o.input)
            .then_with(|| self.output.cmp(&o.output))
            .then_with(|| self.weight.total_cmp(&o.weight))
            .then_with(|| self.to.cmp(&o.to))
    }
}

/// Weighted transducer over word tokens. State 0 is the start state.
/// Arcs of a state are kept in a canonical order, so search results do
/// not depend on the order in which arcs were added.
#[derive(Debug, Clone, PartialEq)]
pub struct Wfst {
    arcs: Vec<Vec<Arc>>,
    finals: Vec<Option<f64>>,
}

impl Default for Wfst {
    fn default() -> Self {
        Self::new()
    }
}

/// Best path found by [`Wfst::transduce`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub output: Vec<String>,
    pub weight: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Cost {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0)
    }
}

fn check_weight(w: f64) -> Result<f64, ItnError> {
    if w.is_finite() && w >= 0.0 {
        Ok(w)
    } else {
        Err(ItnError::BadWeight(w))
    }
}

impl Wfst {
    pub fn new() -> Self {
        Self { arcs: vec![Vec::new()], finals: vec![None] }
    }

    pub fn start(&self) -> u32 {
        0
    }

    pub fn add_state(&mut self) -> u32 {
        self.arcs.push(Vec::new());
        self.finals.push(None);
        (self.arcs.len() - 1) as u32
    }

    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn arcs(&self, state: u32) -> &[Arc] {
        &self.arcs[state as usize]
    }

    pub fn final_weight(&self, state: u32) -> Option<f64> {
        self.finals.get(state as usize).copied().flatten()
    }

    pub fn set_final(&mut self, state: u32, weight: f64) -> Result<(), ItnError> {
        let w = check_weight(weight)?;
        *self.finals.get_mut(state as usize).ok_or(ItnError::NoState(state))? = Some(w);
        Ok(())
    }

    pub fn add_arc<S: AsRef<str>>(
        &mut self,
        from: u32,
        input: Option<&str>,
        output: &[S],
        weight: f64,
        to: u32,
    ) -> Result<(), ItnError> {
        let weight = check_weight(weight)?;
        for s in [from, to] {
            if s as usize >= self.arcs.len() {
                return Err(ItnError::NoState(s));
            }
        }
        let arc = Arc {
            input: input.map(String::from),
            output: output.iter().map(|s| s.as_ref().to_string()).collect(),
            weight,
            to,
        };
        let list = &mut self.arcs[from as usize];
        let at = list.partition_point(|a| a.canonical_cmp(&arc) != Ordering::Greater);
        list.insert(at, arc);
        Ok(())
    }

    /// Shortest path that consumes all of `tokens` and ends in a final state.
    pub fn transduce<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Path, ItnError> {
        self.prefixes(tokens).pop().flatten().ok_or(ItnError::NoParse)
    }

    /// Best path for every prefix: entry `j` is the shortest path consuming
    /// exactly `tokens[..j]`, if one exists. One Dijkstra run over
    /// (state, position) pairs.
    pub fn prefixes<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Option<Path>> {
        let width = tokens.len() + 1;
        let node = |s: u32, pos: usize| s as usize * width + pos;
        let mut dist = vec![f64::INFINITY; self.arcs.len() * width];
        let mut back: BTreeMap<usize, (usize, u32)> = BTreeMap::new();
        let mut done = vec![false; dist.len()];
        let mut heap = BinaryHeap::new();
        dist[node(0, 0)] = 0.0;
        heap.push(Reverse((Cost(0.0), 0u32, 0usize)));
        while let Some(Reverse((Cost(d), s, pos))) = heap.pop() {
            let here = node(s, pos);
            if done[here] {
                continue;
            }
            done[here] = true;
            for (i, arc) in self.arcs[s as usize].iter().enumerate() {
                let next_pos = match &arc.input {
                    None => pos,
                    Some(label) if pos < tokens.len() && label == tokens[pos].as_ref() => pos + 1,
                    Some(_) => continue,
                };
                let there = node(arc.to, next_pos);
                let nd = d + arc.weight;
                if nd < dist[there] {
                    dist[there] = nd;
                    back.insert(there, (here, i as u32));
                    heap.push(Reverse((Cost(nd), arc.to, next_pos)));
                }
            }
        }

        let mut out = vec![None; width];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut best: Option<(f64, u32)> = None;
            for (s, fw) in self.finals.iter().enumerate() {
                let Some(fw) = fw else { continue };
                let total = dist[node(s as u32, j)] + fw;
                if total.is_finite() && best.is_none_or(|(b, _)| total < b) {
                    best = Some((total, s as u32));
                }
            }
            if let Some((weight, s)) = best {
                let mut arcs = Vec::new();
                let mut at = node(s, j);
                while let Some(&(prev, i)) = back.get(&at) {
                    arcs.push(&self.arcs[prev / width][i as usize]);
                    at = prev;
                }
                let output = arcs.iter().rev().flat_map(|a| a.output.iter().cloned()).collect();
                *slot = Some(Path { output, weight });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    /// 0 to 9.
    Unit,
    /// A closed word for 10 to 99 that takes no unit after it.
    Teen,
    /// 20, 30, ... 90; may be followed by a unit.
    Ten,
    /// 100 or a larger power of ten, scaling the words before it.
    Multiplier,
}

impl Role {
    fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "unit" => Role::Unit,
            "teen" => Role::Teen,
            "ten" => Role::Ten,
            "multiplier" => Role::Multiplier,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarEntry {
    pub token: String,
    pub value: u64,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GrammarOptions {
    /// Also read two two-digit groups as a year: "twenty twenty two" → "2022".
    pub years: bool,
}

/// Cardinal number words of one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberGrammar {
    pub language: String,
    entries: Vec<GrammarEntry>,
    /// Multiplier exponents, ascending.
    exponents: Vec<u32>,
}

impl NumberGrammar {
    pub fn builtin(language: &str) -> Result<Self, ItnError> {
        let text = match language {
            "en" => EN_GRAMMAR,
            "hi" => HI_GRAMMAR,
            other => return Err(ItnError::UnsupportedLanguage(other.to_string())),
        };
        Self::parse(language, text)
    }

    /// Reads `token<TAB>value<TAB>role` lines. Blank lines and lines
    /// starting with `#` are skipped; a token may appear once.
    pub fn parse(language: &str, text: &str) -> Result<Self, ItnError> {
        let mut entries: Vec<GrammarEntry> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ItnError::Grammar { line: n + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            let [token, value, role] = fields[..] else {
                return Err(err(alloc::format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let token = token.trim();
            if token.is_empty() || token.contains(char::is_whitespace) {
                return Err(err(alloc::format!("bad token {token:?}")));
            }
            let value: u64 = value.trim().parse().map_err(|_| err(alloc::format!("bad value {value:?}")))?;
            let role = Role::parse(role.trim()).ok_or_else(|| err(alloc::format!("unknown role {role:?}")))?;
            let ok = match role {
                Role::Unit => value <= 9,
                Role::Teen => (10..=99).contains(&value),
                Role::Ten => (20..=90).contains(&value) && value.is_multiple_of(10),
                Role::Multiplier => value >= 100 && is_power_of_ten(value),
            };
            if !ok {
                return Err(err(alloc::format!("value {value} does not fit role {role:?}")));
            }
            if entries.iter().any(|e| e.token == token) {
                return Err(err(alloc::format!("duplicate token {token:?}")));
            }
            entries.push(GrammarEntry { token: token.to_string(), value, role });
        }
        let mut exponents: Vec<u32> =
            entries.iter().filter(|e| e.role == Role::Multiplier).map(|e| e.value.ilog10()).collect();
        exponents.sort_unstable();
        exponents.dedup();
        Ok(Self { language: language.to_string(), entries, exponents })
    }

    pub fn entries(&self) -> &[GrammarEntry] {
        &self.entries
    }

    /// Numbers below `10^max_digits()` are covered. The leading group holds
    /// as many digits as the widest gap between consecutive multipliers
    /// (three for million over thousand, two for crore over lakh).
    pub fn max_digits(&self) -> u32 {
        let Some(&top) = self.exponents.last() else { return 2 };
        let mut gap = 1;
        for w in self.exponents.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        top + gap
    }

    fn words(&self, role: Role) -> impl Iterator<Item = &GrammarEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    pub fn compile(&self, options: GrammarOptions) -> Wfst {
        let mut b = Builder { g: self, fst: Wfst::new() };
        let end = b.fst.add_state();
        b.fst.set_final(end, 0.0).unwrap();
        b.number(0, end, self.max_digits(), false, false);
        for e in self.words(Role::Unit).filter(|e| e.value == 0) {
            b.word(0, &e.token, "0", end);
        }
        if options.years {
            let mid = b.fst.add_state();
            b.two_digits(0, mid, false, true);
            b.two_digits(mid, end, true, true);
        }
        b.fst
    }
}

fn is_power_of_ten(mut v: u64) -> bool {
    while v >= 10 && v.is_multiple_of(10) {
        v /= 10;
    }
    v == 1
}

struct Builder<'g> {
    g: &'g NumberGrammar,
    fst: Wfst,
}

impl Builder<'_> {
    fn word(&mut self, from: u32, token: &str, out: &str, to: u32) {
        let output: &[&str] = if out.is_empty() { &[] } else { &[out] };
        self.fst.add_arc(from, Some(token), output, 0.0, to).unwrap();
    }

    fn zeros(&mut self, from: u32, n: u32, to: u32) {
        let z = "0".repeat(n as usize);
        self.fst.add_arc(from, None, &[z], SKIP_PENALTY, to).unwrap();
    }

    /// Paths from `from` to `to` reading a number below `10^digits`.
    /// `padded` outputs exactly `digits` digits; otherwise no leading
    /// zeros. Zero itself is read only when padded and `zero` is set, as
    /// an ε-skip.
    fn number(&mut self, from: u32, to: u32, digits: u32, padded: bool, zero: bool) {
        let Some(&k) = self.g.exponents.iter().rev().find(|&&k| k < digits) else {
            if digits == 1 {
                if padded && zero {
                    self.zeros(from, 1, to);
                }
                for e in self.g.words(Role::Unit).filter(|e| e.value > 0) {
                    self.word(from, &e.token, &e.value.to_string(), to);
                }
            } else {
                self.two_digits(from, to, padded, false);
                if padded && zero {
                    self.zeros(from, digits, to);
                }
            }
            return;
        };
        let lead = digits - k;
        // Without a group at this multiplier.
        if padded {
            let mid = self.fst.add_state();
            self.zeros(from, lead, mid);
            self.number(mid, to, k, true, zero);
        } else {
            self.number(from, to, k, false, false);
        }
        // coefficient, multiplier word, padded remainder.
        let coef = self.fst.add_state();
        self.number(from, coef, lead, padded, false);
        let rest = self.fst.add_state();
        let value = 10u64.pow(k);
        let tokens: Vec<String> =
            self.g.words(Role::Multiplier).filter(|e| e.value == value).map(|e| e.token.clone()).collect();
        for t in tokens {
            self.word(coef, &t, "", rest);
        }
        self.number(rest, to, k, true, true);
    }

    /// 1 to 99 (10 to 99 when `teens_up`), as two digits when `padded`.
    fn two_digits(&mut self, from: u32, to: u32, padded: bool, teens_up: bool) {
        let g = self.g;
        if !teens_up {
            for e in g.words(Role::Unit).filter(|e| e.value > 0) {
                let out = if padded { alloc::format!("0{}", e.value) } else { e.value.to_string() };
                self.word(from, &e.token, &out, to);
            }
        }
        for e in g.words(Role::Teen).chain(g.words(Role::Ten)) {
            self.word(from, &e.token, &e.value.to_string(), to);
        }
        let tens: Vec<&GrammarEntry> = g.words(Role::Ten).collect();
        for t in tens {
            let mid = self.fst.add_state();
            self.word(from, &t.token, &(t.value / 10).to_string(), mid);
            for u in g.words(Role::Unit).filter(|e| e.value > 0) {
                self.word(mid, &u.token, &u.value.to_string(), to);
            }
        }
    }
}

pub fn compile_number_grammar(language: &str) -> Result<Wfst, ItnError> {
    Ok(NumberGrammar::builtin(language)?.compile(GrammarOptions::default()))
}

/// Replaces each maximal run of tokens that reads as one number, scanning
/// leftmost first and taking the longest match, with its digits. Other
/// tokens pass through; tokens are rejoined with single spaces.
pub fn itn_text(text: &str, wfst: &Wfst) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let found = wfst.prefixes(&tokens[i..]).into_iter().enumerate().skip(1).filter_map(|(j, p)| Some((j, p?))).next_back();
        match found {
            Some((len, path)) => {
                out.push(path.output.concat());
                i += len;
            }
            None => {
                out.push(tokens[i].to_string());
                i += 1;
            }
        }
    }
    out.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en() -> Wfst {
        compile_number_grammar("en").unwrap()
    }

    fn read(fst: &Wfst, s: &str) -> Result<String, ItnError> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        fst.transduce(&tokens).map(|p| p.output.concat())
    }

    #[test]
    fn english_examples() {
        let fst = en();
        assert_eq!(read(&fst, "five thousand").unwrap(), "5000");
        assert_eq!(read(&fst, "zero").unwrap(), "0");
        assert_eq!(read(&fst, "two thousand twenty two").unwrap(), "2022");
        assert_eq!(read(&fst, "one hundred five").unwrap(), "105");
        assert_eq!(read(&fst, "nine hundred ninety nine million nine hundred ninety nine thousand nine hundred ninety nine").unwrap(), "999999999");
        assert_eq!(read(&fst, "twenty million three").unwrap(), "20000003");
        assert_eq!(read(&fst, "thousand"), Err(ItnError::NoParse));
        assert_eq!(read(&fst, "twenty twenty two"), Err(ItnError::NoParse));
        assert_eq!(read(&fst, "one thousand thousand"), Err(ItnError::NoParse));
        assert_eq!(read(&fst, "zero five"), Err(ItnError::NoParse));
        assert_eq!(read(&fst, "ten hundred"), Err(ItnError::NoParse));
    }

    #[test]
    fn hindi_examples() {
        let fst = compile_number_grammar("hi").unwrap();
        let g = NumberGrammar::builtin("hi").unwrap();
        assert_eq!(g.max_digits(), 9);
        assert_eq!(read(&fst, "एक लाख तेईस हज़ार").unwrap(), "123000");
        assert_eq!(read(&fst, "निन्यानबे करोड़ निन्यानबे लाख निन्यानबे हज़ार नौ सौ निन्यानबे").unwrap(), "999999999");
        assert_eq!(read(&fst, "दो हजार बाईस").unwrap(), "2022");
        assert_eq!(read(&fst, "सौ"), Err(ItnError::NoParse));
    }

    #[test]
    fn years_are_opt_in() {
        let g = NumberGrammar::builtin("en").unwrap();
        let fst = g.compile(GrammarOptions { years: true });
        assert_eq!(read(&fst, "twenty twenty two").unwrap(), "2022");
        assert_eq!(read(&fst, "nineteen ten").unwrap(), "1910");
        assert_eq!(read(&fst, "twenty two").unwrap(), "22");
    }

    #[test]
    fn sentences() {
        let fst = en();
        assert_eq!(itn_text("i have five thousand dollars", &fst), "i have 5000 dollars");
        assert_eq!(itn_text("hello world", &fst), "hello world");
        assert_eq!(itn_text("twenty twenty two", &fst), "20 22");
        assert_eq!(itn_text("", &fst), "");
        let hi = compile_number_grammar("hi").unwrap();
        assert_eq!(itn_text("एक लाख तेईस हज़ार", &hi), "123000");
    }

    #[test]
    fn min_weight_wins() {
        let mut f = Wfst::new();
        let (a, b) = (f.add_state(), f.add_state());
        f.add_arc(0, Some("x"), &["slow"], 0.3, a).unwrap();
        f.add_arc(0, Some("x"), &["fast"], 0.1, b).unwrap();
        f.set_final(a, 0.0).unwrap();
        f.set_final(b, 0.0).unwrap();
        assert_eq!(f.transduce(&["x"]).unwrap(), Path { output: vec!["fast".into()], weight: 0.1 });
        assert_eq!(f.transduce(&["y"]), Err(ItnError::NoParse));
        assert_eq!(f.add_arc(0, None, &[""], -1.0, a), Err(ItnError::BadWeight(-1.0)));
        assert_eq!(f.add_arc(0, None, &[""], 0.0, 9), Err(ItnError::NoState(9)));
    }

    #[test]
    fn identity() {
        let mut f = Wfst::new();
        for w in ["a", "b", "c"] {
            f.add_arc(0, Some(w), &[w], 0.0, 0).unwrap();
        }
        f.set_final(0, 0.0).unwrap();
        let p = f.transduce(&["c", "a", "b", "a"]).unwrap();
        assert_eq!(p.output, ["c", "a", "b", "a"]);
        assert_eq!(p.weight, 0.0);
    }

    #[test]
    fn grammar_errors() {
        assert!(matches!(NumberGrammar::builtin("fr"), Err(ItnError::UnsupportedLanguage(_))));
        assert!(matches!(NumberGrammar::parse("x", "one\t1"), Err(ItnError::Grammar { line: 1, .. })));
        assert!(matches!(NumberGrammar::parse("x", "# c\none\t11\tunit"), Err(ItnError::Grammar { line: 2, .. })));
        assert!(NumberGrammar::parse("x", "lots\t300\tmultiplier").is_err());
        assert!(NumberGrammar::parse("x", "one\t1\tunit\none\t2\tunit").is_err());
        assert_eq!(NumberGrammar::parse("x", "one\t1\tunit").unwrap().max_digits(), 2);
    }
}
