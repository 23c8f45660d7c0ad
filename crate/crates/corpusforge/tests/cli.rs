use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use corpusforge::formats::{load_embeddings, save_emissions};
use corpusforge::wav::write_wav;
use corpusforge_core::audio::AudioBuffer;
use corpusforge_core::decode::MockAcousticModel;
use corpusforge_core::synth::{gaussian_noise, rng, Voice};
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corpusforge")).args(args).output().unwrap()
}

fn cli_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_corpusforge"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&[]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["score", "--ref", "x"]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let o = cli(&["score", "--ref", p(&missing), "--hyp", p(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn score_prints_corpus_level_rates() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"));
    fs::write(&r, "a b c\nd e\n").unwrap();
    fs::write(&h, "a x c\nd e f\n").unwrap();
    let o = cli(&["score", "--ref", p(&r), "--hyp", p(&h)]);
    assert!(o.status.success());
    // 2 word edits over 5 reference words; 3 char edits over 8 reference chars
    assert_eq!(stdout(&o), "WER: 40.00%\nCER: 37.50%\n");

    fs::write(&h, "a b c\n").unwrap();
    assert_eq!(cli(&["score", "--ref", p(&r), "--hyp", p(&h)]).status.code(), Some(1));
}

#[test]
fn itn_reads_stdin_and_writes_stdout() {
    let o = cli_stdin(&["itn", "--lang", "en"], "I have five thousand dollars\nnothing here\n");
    assert!(o.status.success());
    assert_eq!(stdout(&o), "I have 5000 dollars\nnothing here\n");
    let o = cli_stdin(&["itn", "--lang", "hi"], "पाँच हज़ार\n");
    assert_eq!(stdout(&o), "5000\n");
    assert_eq!(cli_stdin(&["itn", "--lang", "xx"], "").status.code(), Some(2));
    let o = cli_stdin(&["itn", "--lang", "en", "--years"], "in nineteen ninety\n");
    assert_eq!(stdout(&o), "in 1990\n");
}

#[test]
fn pipeline_validate_reports_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("in")).unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "input_dir = \"in\"\noutput_dir = \"out\"\nstages = [\"vad\", \"split\"]\n[vad]\nagressiveness = 2\n").unwrap();
    let o = cli(&["pipeline", "validate", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("did you mean \"aggressiveness\""), "{text}");
    assert!(text.contains("split"), "{text}");

    fs::write(&cfg, "input_dir = \"in\"\noutput_dir = \"out\"\nstages = [\"vad\", \"snr\"]\n").unwrap();
    assert_eq!(cli(&["pipeline", "validate", "--config", p(&cfg)]).status.code(), Some(0));
    fs::write(&cfg, "input_dir = [").unwrap();
    assert_eq!(cli(&["pipeline", "validate", "--config", p(&cfg)]).status.code(), Some(2));
}

#[test]
fn template_validates_once_paths_exist() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["pipeline", "template"]);
    assert!(o.status.success());
    let text = stdout(&o).replace("\"gender\",\n", "").replace("[gender]\nmodel = \"gender.svm\"\n", "");
    fs::create_dir(dir.path().join("input")).unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, text).unwrap();
    let o = cli(&["pipeline", "validate", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

fn talk(seconds: f64, seed: u64) -> AudioBuffer {
    let mut r = rng(seed);
    let v = Voice::random(&mut r, seed.is_multiple_of(2));
    let mut s = vec![0.0f32; 8000];
    s.extend(v.speak_pulsed(seconds, 16_000, 0.8, &mut r));
    s.extend(vec![0.0f32; 8000]);
    let noise = gaussian_noise(s.len(), 0.002, &mut r);
    AudioBuffer::clamped(s.iter().zip(noise).map(|(a, b)| a + b as f32).collect(), 16_000).unwrap()
}

#[test]
fn vad_snr_embed_cluster_chain() {
    let dir = tempfile::tempdir().unwrap();
    let wavs = dir.path().join("wavs");
    fs::create_dir(&wavs).unwrap();
    for k in 0..3 {
        write_wav(&talk(4.0, k), wavs.join(format!("s{k}.wav"))).unwrap();
    }
    let out = dir.path().join("vad");
    let o = cli(&["vad", "--in", p(&wavs), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = jsonl(&out.join("manifest.jsonl"));
    assert_eq!(manifest.len(), 3);
    assert!(manifest.iter().all(|r| r["status"] == "vad_ok"));
    assert!(jsonl(&out.join("spans.jsonl")).len() >= 3);

    let report = dir.path().join("snr.jsonl");
    let o = cli(&["snr", "--in", p(&out.join("chunks")), "--report", p(&report)]);
    assert!(o.status.success());
    let rows = jsonl(&report);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let db = r["snr_db"].as_f64().unwrap();
        assert_eq!(r["kept"].as_bool().unwrap(), (20.0..=60.0).contains(&db), "{r}");
    }
    assert_eq!(cli(&["snr", "--in", p(&wavs), "--report", p(&report), "--min", "70"]).status.code(), Some(2));

    let emb = dir.path().join("e.bin");
    let o = cli(&["embed", "--in", p(&out.join("manifest.jsonl")), "--out", p(&emb), "--dim", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = load_embeddings(&emb).unwrap();
    assert_eq!(e.len(), 3);
    assert!(e.iter().all(|x| x.vector.len() == 64));

    let clusters = dir.path().join("c.jsonl");
    let o = cli(&["cluster", "--embeddings", p(&emb), "--min-cluster-size", "2", "--out", p(&clusters)]);
    assert!(o.status.success());
    let rows = jsonl(&clusters);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["cluster"].as_i64().unwrap() >= -1));
    assert_eq!(cli(&["cluster", "--embeddings", p(&emb), "--min-cluster-size", "1", "--out", p(&clusters)]).status.code(), Some(2));

    let o = cli(&["stats", "--in", p(&out.join("manifest.jsonl"))]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_utts"], 3);
}

#[test]
fn lm_train_then_decode() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "the cat sat\nthe cat ran\na cat sat\nthe dog sat\n").unwrap();
    let arpa = dir.path().join("lm.arpa");
    let o = cli(&["lm", "train", "--corpus", p(&corpus), "--order", "3", "--out", p(&arpa)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&arpa).unwrap().contains("\\data\\"));
    assert_eq!(cli(&["lm", "train", "--corpus", p(&corpus), "--order", "9", "--out", p(&arpa)]).status.code(), Some(2));

    let symbols: Vec<char> = "acdeghnorst ".chars().collect();
    let am = MockAcousticModel::new(symbols, 0.2);
    let mut r = rng(4);
    let refs = ["the cat sat", "the dog ran"];
    let ems: Vec<_> = refs.iter().map(|t| am.emissions(t, &mut r).unwrap()).collect();
    let em_path = dir.path().join("em.bin");
    save_emissions(&em_path, &ems).unwrap();
    let o = cli(&["decode", "--emissions", p(&em_path), "--lm", p(&arpa)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "the cat sat\nthe dog ran\n");
    let o = cli(&["decode", "--emissions", p(&em_path), "--beam", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn textclean_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    let mut text = String::new();
    let transcripts = ["hello world", "call 911 now", "naïve café", "good morning"];
    for (i, t) in transcripts.iter().enumerate() {
        text.push_str(&format!(
            "{{\"utt_id\":\"u{i}\",\"source\":\"s\",\"audio_path\":\"u{i}.wav\",\"duration_s\":2.0,\"speaker_cluster\":{},\"transcript\":\"{t}\",\"status\":\"selected\"}}\n",
            i % 2
        ));
    }
    fs::write(&m, text).unwrap();
    let (report, cleaned) = (dir.path().join("r.json"), dir.path().join("clean.jsonl"));
    let o = cli(&["textclean", "--vocab", "en", "--in", p(&m), "--report", p(&report), "--out", p(&cleaned)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r["kept"].as_u64(), r["dropped_numeric"].as_u64(), r["dropped_foreign"].as_u64()), (Some(2), Some(1), Some(1)));
    let rows = jsonl(&cleaned);
    assert_eq!(rows[1]["status"], "numeric_rejected");
    assert_eq!(rows[2]["status"], "foreign_rejected");

    let split_dir = dir.path().join("split");
    let o = cli(&["split", "--in", p(&cleaned), "--out", p(&split_dir), "--ratios", "0.5,0.5,0", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parts: Vec<Vec<Value>> = ["train", "dev", "test"].iter().map(|s| jsonl(&split_dir.join(format!("{s}.jsonl")))).collect();
    assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), 2);
    assert!(parts[2].is_empty());
    let o = cli(&["split", "--in", p(&cleaned), "--out", p(&split_dir), "--ratios", "0.5,0.6,0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(&["split", "--in", p(&cleaned), "--out", p(&split_dir), "--ratios", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn align_with_tone_code() {
    use corpusforge_core::align::{synthesize, TextFragment, ToneCode};
    use corpusforge_core::audio::MfccConfig;
    let dir = tempfile::tempdir().unwrap();
    let fragments = [TextFragment::new("a", "make"), TextFragment::new("b", "sure")];
    let audio = synthesize(&fragments, &ToneCode::default(), &MfccConfig::default()).unwrap().audio;
    let (wav, txt, out) = (dir.path().join("a.wav"), dir.path().join("a.txt"), dir.path().join("a.jsonl"));
    write_wav(&audio, &wav).unwrap();
    fs::write(&txt, "a\tmake\nb\tsure\n").unwrap();
    let o = cli(&["align", "--audio", p(&wav), "--text", p(&txt), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = jsonl(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["fragment_id"], "a");
    assert!(rows[0]["end_s"].as_f64().unwrap() <= rows[1]["start_s"].as_f64().unwrap() + 1e-9);
    let o = cli(&["align", "--audio", p(&wav), "--text", p(&txt), "--out", p(&out), "--provider", "espeak"]);
    assert_ne!(o.status.code(), Some(0));
}
