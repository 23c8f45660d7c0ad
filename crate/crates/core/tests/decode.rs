use std::collections::BTreeMap;

use corpusforge_core::decode::{
    beam_decode, cer, char_errors, edit_distance, greedy_decode, wer, word_errors, DecoderConfig, EditCount,
    EmissionMatrix, MockAcousticModel, PrefixBeamSearch,
};
use corpusforge_core::lm::{build_vocab, train_ngram};
use corpusforge_core::synth::{rng, TextSource};
use proptest::prelude::*;

const SYMBOLS: [char; 3] = ['a', 'b', 'c'];

fn pure_ctc(beam_width: usize) -> DecoderConfig {
    DecoderConfig { beam_width, lm_weight: 0.0, word_penalty: 0.0, n_best: usize::MAX }
}

/// Rows of positive weights, normalized and logged.
fn matrix(symbols: &[char], weights: &[Vec<f64>]) -> EmissionMatrix {
    let rows = weights
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|w| (w / s).ln()).collect()
        })
        .collect();
    EmissionMatrix::new(symbols.to_vec(), rows).unwrap()
}

/// Probability of every collapsed prefix, by enumerating all `(V+1)^T` paths.
fn brute_force(em: &EmissionMatrix) -> BTreeMap<String, f64> {
    let width = em.width();
    let mut out = BTreeMap::new();
    let paths = width.pow(em.frames() as u32);
    for mut code in 0..paths {
        let mut p = 1.0;
        let mut text = String::new();
        let mut prev = None;
        for t in 0..em.frames() {
            let k = code % width;
            code /= width;
            p *= em.row(t)[k].exp();
            if k != em.blank() && prev != Some(k) {
                text.push(em.symbols()[k]);
            }
            prev = Some(k);
        }
        *out.entry(text).or_insert(0.0) += p;
    }
    out
}

fn instance(max_frames: usize, max_symbols: usize) -> impl Strategy<Value = EmissionMatrix> {
    (1..=max_frames, 1..=max_symbols).prop_flat_map(|(t, v)| {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, v + 1), t)
            .prop_map(move |rows| matrix(&SYMBOLS[..v], &rows))
    })
}

#[test]
fn unpruned_beam_equals_alignment_marginals_on_the_full_grid() {
    let mut r = rng(3);
    for t in 1..=4 {
        for v in 1..=3 {
            for _ in 0..20 {
                let rows: Vec<Vec<f64>> =
                    (0..t).map(|_| (0..=v).map(|_| 0.01 + rand::Rng::random::<f64>(&mut r)).collect()).collect();
                let em = matrix(&SYMBOLS[..v], &rows);
                let exact = brute_force(&em);
                let hyps = beam_decode(&em, None, &pure_ctc(1000)).unwrap();
                assert_eq!(hyps.len(), exact.len());
                for h in hyps {
                    let p = exact[&h.text];
                    assert!((h.acoustic.exp() - p).abs() < 1e-10, "T={t} V={v} {:?}", h.text);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn unpruned_beam_mass_is_one_at_every_frame(em in instance(5, 3)) {
        let mut search = PrefixBeamSearch::new(em.symbols(), None, &pure_ctc(10_000)).unwrap();
        for t in 0..em.frames() {
            search.step(em.row(t));
            let mass: f64 = search.hypotheses().iter().map(|h| h.acoustic.exp()).sum();
            prop_assert!((mass - 1.0).abs() < 1e-9, "frame {t}: {mass}");
        }
    }

    #[test]
    fn pruned_scores_never_exceed_the_best_marginal(em in instance(4, 3), k in 1usize..6) {
        let best = brute_force(&em).values().cloned().fold(0.0, f64::max);
        let found = beam_decode(&em, None, &pure_ctc(k)).unwrap();
        prop_assert!(found[0].acoustic.exp() <= best + 1e-12);
    }

    #[test]
    fn beam_of_one_matches_greedy_on_confident_frames(
        picks in prop::collection::vec((0usize..4, 0.8f64..0.99), 1..12),
        spread in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 12),
    ) {
        let rows: Vec<Vec<f64>> = picks
            .iter()
            .zip(&spread)
            .map(|(&(k, top), rest)| {
                let s: f64 = rest.iter().sum();
                let mut others = rest.iter().map(|w| w / s * (1.0 - top));
                (0..4).map(|j| if j == k { top } else { others.next().unwrap() }).collect()
            })
            .collect();
        let em = matrix(&SYMBOLS, &rows);
        let beam = beam_decode(&em, None, &pure_ctc(1)).unwrap();
        prop_assert_eq!(&beam[0].text, &greedy_decode(&em));
    }
}

// Greedy reads a,blank,a. A width-1 beam keeps only "a" after frame 1, so
// "aa" can only come from a blank-ending "a": 0.589*0.62*0.548 = 0.200,
// against 0.589*0.452 + 0.589*0.38*0.548 = 0.389 for staying at "a".
#[test]
fn beam_of_one_can_disagree_with_greedy() {
    let em = matrix(&['a'], &[vec![0.589, 0.411], vec![0.38, 0.62], vec![0.548, 0.452]]);
    assert_eq!(greedy_decode(&em), "aa");
    assert_eq!(beam_decode(&em, None, &pure_ctc(1)).unwrap()[0].text, "a");
}

#[test]
fn a_wider_beam_can_find_a_worse_best() {
    let em = matrix(
        &['a', 'b'],
        &[vec![2.0, 5.0, 6.0], vec![2.0, 1.0, 2.0], vec![4.0, 5.0, 8.0], vec![1.0, 1.0, 3.0]],
    );
    let two = beam_decode(&em, None, &pure_ctc(2)).unwrap()[0].acoustic;
    let four = beam_decode(&em, None, &pure_ctc(4)).unwrap()[0].acoustic;
    assert!(four < two - 0.03, "beam 2 {two}, beam 4 {four}");
    let exact = brute_force(&em).values().cloned().fold(0.0, f64::max);
    assert!(two.exp() <= exact + 1e-12);
}

#[test]
fn lm_weight_flips_an_acoustically_close_pair() {
    let symbols = ['c', 'f', 'o', ' '];
    let c = 0.45;
    let o = c * (-0.1f64).exp();
    let em = matrix(&symbols, &[vec![c, 0.02, o, 0.02, 1.0 - c - o - 0.04], vec![0.02, 0.94, 0.02, 0.01, 0.01]]);
    assert_eq!(beam_decode(&em, None, &DecoderConfig::default()).unwrap()[0].text, "cf");

    let corpus = ["of", "of", "of of"];
    let vocab = build_vocab(corpus, 10).unwrap();
    let lm = train_ngram(corpus, &vocab, 2).unwrap().model;
    let off = DecoderConfig { lm_weight: 0.0, word_penalty: 0.0, ..DecoderConfig::default() };
    assert_eq!(beam_decode(&em, Some(&lm), &off).unwrap()[0].text, "cf");
    let on = DecoderConfig { lm_weight: 2.0, word_penalty: 0.0, ..DecoderConfig::default() };
    let best = beam_decode(&em, Some(&lm), &on).unwrap();
    assert_eq!(best[0].text, "of");
}

#[test]
fn matched_lm_lowers_wer_and_mismatched_does_not_help() {
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz".chars().collect();
    let mut r = rng(42);
    let source = TextSource::new(&alphabet, 60, 3, &mut r);
    let other = TextSource::new(&alphabet, 60, 3, &mut r);
    let train = |s: &TextSource, r: &mut _| {
        let text: Vec<String> = (0..2000).map(|_| s.sentence(r)).collect();
        let vocab = build_vocab(&text, 500_000).unwrap();
        train_ngram(&text, &vocab, 5).unwrap().model
    };
    let matched = train(&source, &mut r);
    let mismatched = train(&other, &mut r);
    let mut symbols = alphabet.clone();
    symbols.push(' ');
    let am = MockAcousticModel::new(symbols, 1.5);
    let cfg = DecoderConfig::default();
    let zero = EditCount { distance: 0, reference_len: 0 };
    let (mut plain, mut fused, mut wrong) = (zero, zero, zero);
    for _ in 0..20 {
        let reference = source.sentence(&mut r);
        let em = am.emissions(&reference, &mut r).unwrap();
        let decode = |lm| beam_decode(&em, lm, &cfg).unwrap().remove(0).text;
        plain = plain + word_errors(&reference, &decode(None)).unwrap();
        fused = fused + word_errors(&reference, &decode(Some(&matched))).unwrap();
        wrong = wrong + word_errors(&reference, &decode(Some(&mismatched))).unwrap();
    }
    assert!(fused.rate() < plain.rate(), "fused {} plain {}", fused.rate(), plain.rate());
    assert!(wrong.rate() >= fused.rate());
}

fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_last(), b.split_last()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => (levenshtein(ra, rb) + usize::from(x != y))
            .min(levenshtein(ra, b) + 1)
            .min(levenshtein(a, rb) + 1),
    }
}

fn words() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(vec!["ek", "do", "teen", "char"]), 0..=6)
}

proptest! {
    #[test]
    fn edit_distance_matches_the_recursive_definition(a in words(), b in words()) {
        prop_assert_eq!(edit_distance(&a, &b), levenshtein(&a, &b));
        if !a.is_empty() {
            let e = word_errors(&a.join(" "), &b.join("  ")).unwrap();
            prop_assert_eq!(e.distance, levenshtein(&a, &b));
            prop_assert_eq!(e.reference_len, a.len());
        }
    }

    #[test]
    fn edit_distance_is_a_metric(a in words(), b in words(), c in words()) {
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        prop_assert_eq!(edit_distance(&a, &a), 0);
        prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
    }
}

#[test]
fn error_rates() {
    assert_eq!(wer("the cat sat", "the cat sat").unwrap(), 0.0);
    assert!((wer("the cat sat", "a cat").unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(wer("a", "a b c").unwrap(), 2.0);
    assert_eq!(cer("ab cd", "abcd").unwrap(), 0.0);
    assert_eq!(char_errors("नमस्ते", "नमसते").unwrap().distance, 1);
    assert!(wer("", "x").is_err());
}
