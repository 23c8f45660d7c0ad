use corpusforge_core::itn::{itn_text, GrammarOptions, ItnError, NumberGrammar, Role, Wfst};
use corpusforge_core::synth::rng;
use proptest::prelude::*;
use rand::Rng;

/// Spoken form of `n` built from the grammar's first token for each value.
fn verbalize(g: &NumberGrammar, n: u64) -> String {
    let word = |v: u64, roles: &[Role]| {
        g.entries().iter().find(|e| e.value == v && roles.contains(&e.role)).map(|e| e.token.clone())
    };
    if n == 0 {
        return word(0, &[Role::Unit]).unwrap();
    }
    let mut exps: Vec<u32> =
        g.entries().iter().filter(|e| e.role == Role::Multiplier).map(|e| e.value.ilog10()).collect();
    exps.sort_unstable();
    exps.dedup();
    fn go(g: &NumberGrammar, exps: &[u32], n: u64, out: &mut Vec<String>, word: &dyn Fn(u64, &[Role]) -> Option<String>) {
        if let Some(&k) = exps.iter().rev().find(|&&k| n >= 10u64.pow(k)) {
            let m = 10u64.pow(k);
            go(g, exps, n / m, out, word);
            out.push(word(m, &[Role::Multiplier]).unwrap());
            if !n.is_multiple_of(m) {
                go(g, exps, n % m, out, word);
            }
        } else if let Some(w) = word(n, &[Role::Unit, Role::Teen, Role::Ten]) {
            out.push(w);
        } else {
            out.push(word(n / 10 * 10, &[Role::Ten]).unwrap());
            out.push(word(n % 10, &[Role::Unit]).unwrap());
        }
    }
    let mut out = Vec::new();
    go(g, &exps, n, &mut out, &word);
    out.join(" ")
}

fn read(fst: &Wfst, s: &str) -> Result<String, ItnError> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    fst.transduce(&tokens).map(|p| p.output.concat())
}

#[test]
fn verbalizer_round_trip() {
    for lang in ["en", "hi"] {
        let g = NumberGrammar::builtin(lang).unwrap();
        let fst = g.compile(GrammarOptions::default());
        let mut r = rng(11);
        let limit = 10u64.pow(g.max_digits());
        let mut sample: Vec<u64> = (0..10_000).map(|_| r.random_range(0..10_000_000)).collect();
        sample.extend((0..1000).map(|_| r.random_range(0..limit)));
        sample.extend([0, 1, 9, 10, 99, 100, 101, 1000, 1001, 100_000, 10_000_000, limit - 1]);
        for n in sample {
            let spoken = verbalize(&g, n);
            assert_eq!(read(&fst, &spoken).as_deref(), Ok(n.to_string().as_str()), "{lang} {spoken:?}");
        }
        let too_big = verbalize(&g, limit * 10);
        assert!(read(&fst, &too_big).is_err(), "{lang} {too_big:?}");
    }
}

#[test]
fn separated_numbers_stay_whole() {
    for (lang, sep) in [("en", "and"), ("hi", "और")] {
        let g = NumberGrammar::builtin(lang).unwrap();
        let fst = g.compile(GrammarOptions::default());
        let mut r = rng(5);
        for _ in 0..300 {
            let (a, b) = (r.random_range(0..10_000_000u64), r.random_range(0..10_000_000u64));
            let text = format!("x {} {sep} {} y", verbalize(&g, a), verbalize(&g, b));
            assert_eq!(itn_text(&text, &fst), format!("x {a} {sep} {b} y"), "{text}");
        }
    }
}

#[derive(Debug, Clone)]
struct ArcSpec {
    from: u32,
    to: u32,
    input: Option<&'static str>,
    output: &'static str,
    weight: f64,
}

fn random_dag() -> impl Strategy<Value = (Vec<ArcSpec>, Vec<(u32, f64)>)> {
    let arc = (0u32..8, 1u32..8, prop::option::of(prop::sample::select(vec!["a", "b"])), prop::sample::select(vec!["x", "y", "z", ""]), 0.0f64..1.0)
        .prop_filter_map("forward arcs only", |(from, to, input, output, weight)| {
            (from < to).then_some(ArcSpec { from, to, input, output, weight })
        });
    (prop::collection::vec(arc, 0..24), prop::collection::vec((0u32..8, 0.0f64..1.0), 1..4))
}

fn build(arcs: &[ArcSpec], finals: &[(u32, f64)]) -> Wfst {
    let mut f = Wfst::new();
    for _ in 1..8 {
        f.add_state();
    }
    for a in arcs {
        let out: &[&str] = if a.output.is_empty() { &[] } else { &[a.output] };
        f.add_arc(a.from, a.input, out, a.weight, a.to).unwrap();
    }
    for &(s, w) in finals {
        f.set_final(s, w).unwrap();
    }
    f
}

/// Every accepting path's (weight, output), by depth-first enumeration.
fn all_paths(f: &Wfst, tokens: &[&str]) -> Vec<(f64, String)> {
    fn dfs(f: &Wfst, s: u32, pos: usize, tokens: &[&str], w: f64, out: &mut String, acc: &mut Vec<(f64, String)>) {
        if pos == tokens.len() {
            if let Some(fw) = f.final_weight(s) {
                acc.push((w + fw, out.clone()));
            }
        }
        for a in f.arcs(s) {
            let next = match a.input.as_deref() {
                None => pos,
                Some(l) if pos < tokens.len() && l == tokens[pos] => pos + 1,
                _ => continue,
            };
            let len = out.len();
            out.push_str(&a.output.concat());
            dfs(f, a.to, next, tokens, w + a.weight, out, acc);
            out.truncate(len);
        }
    }
    let mut acc = Vec::new();
    dfs(f, 0, 0, tokens, 0.0, &mut String::new(), &mut acc);
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn shortest_path_matches_enumeration(
        (arcs, finals) in random_dag(),
        tokens in prop::collection::vec(prop::sample::select(vec!["a", "b"]), 0..4),
    ) {
        let f = build(&arcs, &finals);
        let paths = all_paths(&f, &tokens);
        match f.transduce(&tokens) {
            Err(e) => {
                prop_assert_eq!(e, ItnError::NoParse);
                prop_assert!(paths.is_empty());
            }
            Ok(p) => {
                let best = paths.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
                prop_assert!((p.weight - best).abs() < 1e-9);
                let out = p.output.concat();
                prop_assert!(paths.iter().any(|(w, o)| (w - best).abs() < 1e-9 && *o == out));
            }
        }
    }

    #[test]
    fn arc_insertion_order_does_not_matter(
        (arcs, finals) in random_dag(),
        tokens in prop::collection::vec(prop::sample::select(vec!["a", "b"]), 0..4),
        seed in any::<u64>(),
    ) {
        let mut shuffled = arcs.clone();
        let mut r = rng(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let (f, g) = (build(&arcs, &finals), build(&shuffled, &finals));
        prop_assert_eq!(&f, &g);
        prop_assert_eq!(f.transduce(&tokens), g.transduce(&tokens));
    }
}
