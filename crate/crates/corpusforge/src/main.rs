use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use corpusforge::config::{load_vocabulary, ConfigError, PipelineConfig};
use corpusforge::espeak::Espeak;
use corpusforge::formats::{load_embeddings, load_emissions, load_model, save_embeddings, save_model};
use corpusforge::manifest::{self, Row};
use corpusforge::pipeline::{
    self, clean_report_json, clean_rows, embed_audio, list_wavs, select_rows, snr_row, split_rows, thread_pool,
    vad_file, RunOptions,
};
use corpusforge::wav::read_wav;
use corpusforge_core::align::{align, AlignOptions, SynthesisProvider, TextFragment, ToneCode};
use corpusforge_core::audio::{MfccConfig, CANONICAL_RATE};
use corpusforge_core::corpus::{stats, SplitSpec, UtteranceRecord};
use corpusforge_core::decode::{beam_decode, check_symbols, edit_distance, DecoderConfig, EditCount};
use corpusforge_core::gender::{train_svm_smo, Gender, SvmParams, DEFAULT_C, DEFAULT_GAMMA};
use corpusforge_core::itn::{itn_text, GrammarOptions, NumberGrammar};
use corpusforge_core::lm::{build_vocab, train_ngram, NGramModel, DEFAULT_ORDER, DEFAULT_TOP_K};
use corpusforge_core::snr::{GainTable, SnrThresholds};
use corpusforge_core::speaker::{
    hdbscan, Embedding, HdbscanParams, DEFAULT_CAP_MINUTES, DEFAULT_EMBEDDING_DIM, DEFAULT_MIN_CLUSTER_SIZE,
};
use corpusforge_core::text::Cleaner;
use corpusforge_core::vad::VadConfig;
use rayon::prelude::*;
use serde_json::{json, Value};

/// Speech corpus curation and ASR post-processing.
#[derive(Parser)]
#[command(name = "corpusforge", version, about)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads for per-file work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut long recordings into voiced chunks.
    Vad(VadArgs),
    /// Estimate per-file SNR and apply thresholds.
    Snr(SnrArgs),
    /// MFCC-statistics embeddings for a directory or manifest.
    Embed(EmbedArgs),
    /// HDBSCAN speaker clustering of an embedding file.
    Cluster(ClusterArgs),
    /// Train or apply the RBF SVM gender classifier.
    #[command(subcommand)]
    Gender(GenderCommand),
    /// Keep the highest-SNR chunks of each speaker under a time cap.
    Select(SelectArgs),
    /// Align text fragments to audio through synthesis and DTW.
    Align(AlignArgs),
    /// Clean manifest transcripts against a character vocabulary.
    Textclean(TextcleanArgs),
    /// Speaker-disjoint train/dev/test split.
    Split(SplitArgs),
    /// Hours, utterances, speakers and vocabulary size of a manifest.
    Stats(StatsArgs),
    /// N-gram language models.
    #[command(subcommand)]
    Lm(LmCommand),
    /// CTC prefix beam search over an emissions file.
    Decode(DecodeArgs),
    /// WER and CER of hypotheses against references.
    Score(ScoreArgs),
    /// Rewrite spoken numbers as digits.
    Itn(ItnArgs),
    /// Config-driven end-to-end runs.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Args)]
struct VadArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    aggressiveness: u8,
    #[arg(long, default_value_t = 30)]
    frame_ms: u32,
    #[arg(long, default_value_t = 300)]
    padding_ms: u32,
    #[arg(long, default_value_t = 0.9)]
    trigger_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    min_chunk_s: f64,
    #[arg(long, default_value_t = 15.0)]
    max_chunk_s: f64,
}

#[derive(Args)]
struct SnrArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    min: f64,
    #[arg(long, default_value_t = 60.0)]
    max: f64,
    #[arg(long)]
    report: PathBuf,
    /// Tab-separated `g<TAB>snr_db` table replacing the built-in one.
    #[arg(long)]
    gain_table: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Directory of WAV files or a JSONL manifest.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
    dim: usize,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_CLUSTER_SIZE)]
    min_cluster_size: usize,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GenderCommand {
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSONL rows `{"utt_id": ..., "gender": "male"|"female"}`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Cluster rows from `cluster`; labels become the per-cluster majority.
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAP_MINUTES)]
    cap_minutes: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    ToneCode,
    Espeak,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    audio: PathBuf,
    /// One fragment per line, optionally `id<TAB>text`.
    #[arg(long)]
    text: PathBuf,
    #[arg(long, value_enum, default_value_t = Provider::ToneCode)]
    provider: Provider,
    /// espeak voice.
    #[arg(long, default_value = "hi")]
    voice: String,
    /// Sakoe-Chiba band half-width in frames.
    #[arg(long)]
    band: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TextcleanArgs {
    /// Vocabulary file, or a built-in language code.
    #[arg(long)]
    vocab: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Cleaned manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for train.jsonl, dev.jsonl and test.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// Train, dev and test shares, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Subcommand)]
enum LmCommand {
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    emissions: PathBuf,
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    beam: usize,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    lm_weight: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    word_penalty: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
}

#[derive(Args)]
struct ItnArgs {
    #[arg(long, default_value = "hi")]
    lang: String,
    /// Grammar file replacing the built-in one for `--lang`.
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Also read two-pair years such as "nineteen ninety".
    #[arg(long)]
    years: bool,
    /// Input text; stdin when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output text; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PipelineCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Re-run stages even when their inputs are unchanged.
        #[arg(long)]
        force: bool,
    },
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a configuration with every default filled in.
    Template,
}

/// Bad input from the user, as opposed to a failure while working.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli.command, cli.jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<ConfigError>().is_some() || e.downcast_ref::<Usage>().is_some();
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}

fn run(command: Command, jobs: Option<usize>) -> Result<()> {
    match command {
        Command::Vad(a) => vad(a, jobs),
        Command::Snr(a) => snr(a, jobs),
        Command::Embed(a) => embed(a, jobs),
        Command::Cluster(a) => cluster(a),
        Command::Gender(g) => gender(g),
        Command::Select(a) => select(a),
        Command::Align(a) => align_cmd(a),
        Command::Textclean(a) => textclean(a),
        Command::Split(a) => split(a),
        Command::Stats(a) => stats_cmd(a),
        Command::Lm(l) => lm(l),
        Command::Decode(a) => decode(a),
        Command::Score(a) => score(a),
        Command::Itn(a) => itn(a),
        Command::Pipeline(p) => pipeline_cmd(p, jobs),
    }
}

fn write_jsonl(path: &Path, rows: impl IntoIterator<Item = Value>) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(&r)?);
        text.push('\n');
    }
    manifest::write_bytes(path, text.as_bytes())?;
    Ok(())
}

fn read_jsonl(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn vad(a: VadArgs, jobs: Option<usize>) -> Result<()> {
    let config = VadConfig {
        aggressiveness: a.aggressiveness,
        frame_ms: a.frame_ms,
        padding_ms: a.padding_ms,
        trigger_ratio: a.trigger_ratio,
        min_chunk_s: a.min_chunk_s,
        max_chunk_s: a.max_chunk_s,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let files = list_wavs(&a.input)?;
    fs::create_dir_all(a.out.join(pipeline::CHUNK_DIR))?;
    let pool = thread_pool(jobs)?;
    let per_file: Vec<Result<Vec<Row>>> = pool.install(|| files.par_iter().map(|p| vad_file(p, &a.out, &config)).collect());
    let mut rows = Vec::new();
    for r in per_file {
        rows.extend(r?);
    }
    let spans = rows.iter().map(|r| {
        json!({
            "file": r.record.audio_path,
            "source": r.record.source,
            "start_s": r.extra["start_s"],
            "end_s": r.extra["end_s"],
            "kept": r.is_live(),
        })
    });
    write_jsonl(&a.out.join("spans.jsonl"), spans)?;
    let kept: Vec<Row> = rows.into_iter().filter(Row::is_live).collect();
    log::info!("{} chunk(s) from {} file(s)", kept.len(), files.len());
    manifest::write(a.out.join("manifest.jsonl"), &kept)?;
    Ok(())
}

fn snr(a: SnrArgs, jobs: Option<usize>) -> Result<()> {
    let thresholds = SnrThresholds { min_db: a.min, max_db: a.max };
    if !thresholds.is_valid() {
        return Err(usage(format!("--min {} must be below --max {}", a.min, a.max)));
    }
    let table = match &a.gain_table {
        Some(p) => GainTable::parse(&fs::read_to_string(p)?)?,
        None => GainTable::builtin(),
    };
    let files = list_wavs(&a.input)?;
    let pool = thread_pool(jobs)?;
    let rows: Vec<Result<Value>> = pool.install(|| {
        files
            .par_iter()
            .map(|p| {
                let audio = read_wav(p, CANONICAL_RATE)?;
                let rec = UtteranceRecord::new(pipeline::source_name(p), "", "", audio.duration_s());
                let row = snr_row(Row::new(rec), &audio, &table, &thresholds);
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let mut v = json!({ "file": name, "snr_db": row.record.snr_db, "kept": row.is_live() });
                if let Some(r) = row.record.reason {
                    v["reason"] = Value::from(r);
                }
                Ok(v)
            })
            .collect()
    });
    write_jsonl(&a.report, rows.into_iter().collect::<Result<Vec<_>>>()?)
}

fn embed(a: EmbedArgs, jobs: Option<usize>) -> Result<()> {
    if a.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    let items: Vec<(String, PathBuf)> = if a.input.is_dir() {
        list_wavs(&a.input)?.into_iter().map(|p| (pipeline::source_name(&p), p)).collect()
    } else {
        manifest::read(&a.input)?
            .into_iter()
            .filter(Row::is_live)
            .map(|r| (r.record.utt_id.clone(), manifest::resolve(&a.input, &r.record.audio_path)))
            .collect()
    };
    let pool = thread_pool(jobs)?;
    let embeddings: Vec<Result<Embedding>> = pool.install(|| {
        items.par_iter().map(|(id, p)| embed_audio(id, &read_wav(p, CANONICAL_RATE)?, a.dim)).collect()
    });
    let embeddings = embeddings.into_iter().collect::<Result<Vec<_>>>()?;
    save_embeddings(&a.out, &embeddings)?;
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let params = HdbscanParams {
        min_cluster_size: a.min_cluster_size,
        min_samples: a.min_samples.unwrap_or(a.min_cluster_size),
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let embeddings = load_embeddings(&a.embeddings)?;
    let assignment = hdbscan(&embeddings, &params)?;
    log::info!("{} cluster(s), {} noise", assignment.n_clusters, assignment.noise_count());
    write_jsonl(
        &a.out,
        assignment.labels.iter().map(|(id, l)| json!({ "utt_id": id, "cluster": l.map_or(-1, |c| c as i64) })),
    )
}

fn gender(g: GenderCommand) -> Result<()> {
    match g {
        GenderCommand::Train { data, labels, out, gamma, c } => {
            let embeddings = load_embeddings(&data)?;
            let mut by_id: BTreeMap<String, Gender> = BTreeMap::new();
            for v in read_jsonl(&labels)? {
                let id = v["utt_id"].as_str().ok_or_else(|| anyhow!("label row without utt_id"))?;
                let g = v["gender"].as_str().and_then(Gender::parse).ok_or_else(|| anyhow!("{id}: bad gender"))?;
                by_id.insert(id.to_string(), g);
            }
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for e in embeddings {
                if let Some(g) = by_id.get(&e.utt_id) {
                    xs.push(e.vector);
                    ys.push(*g);
                }
            }
            let params = SvmParams { gamma, c, ..SvmParams::default() };
            let t = train_svm_smo(&xs, &ys, &params)?;
            if !t.converged {
                log::warn!("SMO stopped after {} iterations without converging", t.iterations);
            }
            log::info!("{} support vector(s) from {} example(s)", t.model.support_vectors.len(), xs.len());
            save_model(&out, &t.model)?;
            Ok(())
        }
        GenderCommand::Predict { model, embeddings, clusters, out } => {
            let model = load_model(&model)?;
            let embeddings = load_embeddings(&embeddings)?;
            let mut rows: Vec<Row> = embeddings
                .iter()
                .map(|e| Row::new(UtteranceRecord::new(&e.utt_id, "", "", 1.0)))
                .collect();
            if let Some(p) = clusters {
                let labels: BTreeMap<String, i64> = read_jsonl(&p)?
                    .into_iter()
                    .filter_map(|v| Some((v["utt_id"].as_str()?.to_string(), v["cluster"].as_i64()?)))
                    .collect();
                for r in &mut rows {
                    r.record.speaker_cluster = labels.get(&r.record.utt_id).copied();
                }
            }
            let by_id = embeddings.into_iter().map(|e| (e.utt_id.clone(), e)).collect();
            pipeline::assign_gender(&mut rows, &by_id, &model)?;
            let out_rows = rows.iter().map(|r| {
                json!({ "utt_id": r.record.utt_id, "gender": r.record.gender, "margin": r.extra["gender_margin"] })
            });
            match out {
                Some(p) => write_jsonl(&p, out_rows),
                None => {
                    let mut stdout = io::stdout().lock();
                    for r in out_rows {
                        writeln!(stdout, "{r}")?;
                    }
                    Ok(())
                }
            }
        }
    }
}

fn select(a: SelectArgs) -> Result<()> {
    if !(a.cap_minutes > 0.0) {
        return Err(usage("--cap-minutes must be positive"));
    }
    let mut rows: Vec<Row> = manifest::read(&a.input)?.into_iter().filter(Row::is_live).collect();
    select_rows(&mut rows, a.cap_minutes);
    manifest::write(&a.out, &rows)?;
    Ok(())
}

fn read_fragments(path: &Path) -> Result<Vec<TextFragment>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| match l.split_once('\t') {
            Some((id, t)) => TextFragment::new(id, t.trim()),
            None => TextFragment::new(format!("f{:04}", i + 1), l.trim()),
        })
        .collect())
}

fn align_cmd(a: AlignArgs) -> Result<()> {
    let audio = read_wav(&a.audio, CANONICAL_RATE)?;
    let fragments = read_fragments(&a.text)?;
    let provider: Box<dyn SynthesisProvider> = match a.provider {
        Provider::ToneCode => Box::new(ToneCode::default()),
        Provider::Espeak => Box::new(Espeak::new(a.voice)),
    };
    let options = AlignOptions { band: a.band, ..AlignOptions::default() };
    let out = align(&audio, &fragments, &provider, &MfccConfig::default(), &options)?;
    write_jsonl(
        &a.out,
        out.iter().map(|f| {
            json!({ "fragment_id": f.fragment_id, "start_s": f.start_s, "end_s": f.end_s, "confidence": f.confidence })
        }),
    )
}

fn vocabulary(spec: &str) -> Result<corpusforge_core::text::CharVocabulary> {
    let p = Path::new(spec);
    if p.is_file() {
        let lang = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        load_vocabulary(&lang, Some(p))
    } else {
        load_vocabulary(spec, None).map_err(|e| usage(format!("{spec}: not a file and {e}")))
    }
}

fn textclean(a: TextcleanArgs) -> Result<()> {
    let cleaner = Cleaner::new(vocabulary(&a.vocab)?);
    let mut rows = manifest::read(&a.input)?;
    let report = clean_rows(&mut rows, &cleaner);
    let json = serde_json::to_string_pretty(&clean_report_json(&report))? + "\n";
    manifest::write_bytes(&a.report, json.as_bytes())?;
    if let Some(out) = a.out {
        manifest::write(out, &rows)?;
    }
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let [train, dev, test] = a.ratios[..] else {
        return Err(usage(format!("--ratios takes three values, got {}", a.ratios.len())));
    };
    let spec = SplitSpec { ratios: [train, dev, test], seed: a.seed };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let mut rows: Vec<Row> = manifest::read(&a.input)?.into_iter().filter(Row::is_live).collect();
    if rows.is_empty() {
        bail!("{}: no live records to split", a.input.display());
    }
    let (parts, warnings) = split_rows(&mut rows, &spec)?;
    for w in warnings {
        log::warn!("{w}");
    }
    fs::create_dir_all(&a.out)?;
    for (part, name) in parts.iter().zip(["train", "dev", "test"]) {
        manifest::write(a.out.join(format!("{name}.jsonl")), part)?;
    }
    Ok(())
}

fn stats_cmd(a: StatsArgs) -> Result<()> {
    let records: Vec<UtteranceRecord> = manifest::read(&a.input)?.into_iter().map(|r| r.record).collect();
    let s = stats(&records);
    let v = json!({
        "hours": s.hours,
        "n_utts": s.n_utts,
        "n_speakers": s.n_speakers,
        "gender_hours": s.gender_hours,
        "char_vocab_size": s.char_vocab_size,
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn lm(l: LmCommand) -> Result<()> {
    let LmCommand::Train { corpus, order, top_k, out } = l;
    let text = fs::read_to_string(&corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let lines: Vec<&str> = text.lines().collect();
    let vocab = build_vocab(&lines, top_k)?;
    let trained = train_ngram(&lines, &vocab, order).map_err(|e| match e {
        corpusforge_core::lm::LmError::Order(_) => usage(e.to_string()),
        other => other.into(),
    })?;
    for w in &trained.warnings {
        log::warn!("{w}");
    }
    manifest::write_bytes(&out, trained.model.to_arpa().as_bytes())?;
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let config = DecoderConfig { beam_width: a.beam, lm_weight: a.lm_weight, word_penalty: a.word_penalty, n_best: 1 };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let lm = match &a.lm {
        Some(p) => Some(NGramModel::from_arpa(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?),
        None => None,
    };
    let records = load_emissions(&a.emissions)?;
    let mut out = String::new();
    for em in &records {
        if let Some(m) = &lm {
            check_symbols(em.symbols(), m)?;
        }
        let best = beam_decode(em, lm.as_ref(), &config)?;
        out.push_str(best.first().map_or("", |h| h.text.as_str()));
        out.push('\n');
    }
    match a.out {
        Some(p) => manifest::write_bytes(&p, out.as_bytes())?,
        None => io::stdout().lock().write_all(out.as_bytes())?,
    }
    Ok(())
}

/// Corpus-level rates: edits summed over lines, divided by the summed
/// reference length.
fn score(a: ScoreArgs) -> Result<()> {
    let read = |p: &Path| -> Result<Vec<String>> {
        Ok(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?.lines().map(String::from).collect())
    };
    let (refs, hyps) = (read(&a.reference)?, read(&a.hyp)?);
    if refs.len() != hyps.len() {
        bail!("{} reference line(s) but {} hypothesis line(s)", refs.len(), hyps.len());
    }
    let zero = EditCount { distance: 0, reference_len: 0 };
    let (mut words, mut chars) = (zero, zero);
    for (r, h) in refs.iter().zip(&hyps) {
        let (rw, hw): (Vec<&str>, Vec<&str>) = (r.split_whitespace().collect(), h.split_whitespace().collect());
        words = words + EditCount { distance: edit_distance(&rw, &hw), reference_len: rw.len() };
        let (rc, hc): (Vec<char>, Vec<char>) = (rw.join(" ").chars().collect(), hw.join(" ").chars().collect());
        chars = chars + EditCount { distance: edit_distance(&rc, &hc), reference_len: rc.len() };
    }
    if words.reference_len == 0 {
        bail!("references are empty");
    }
    println!("WER: {:.2}%", 100.0 * words.rate());
    println!("CER: {:.2}%", 100.0 * chars.rate());
    Ok(())
}

fn itn(a: ItnArgs) -> Result<()> {
    let grammar = match &a.grammar {
        Some(p) => NumberGrammar::parse(&a.lang, &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => NumberGrammar::builtin(&a.lang).map_err(|e| usage(e.to_string()))?,
    };
    let wfst = grammar.compile(GrammarOptions { years: a.years });
    let mut input = String::new();
    match &a.input {
        Some(p) => input = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            io::stdin().lock().read_to_string(&mut input)?;
        }
    }
    let mut out = String::new();
    for line in input.lines() {
        out.push_str(&itn_text(line, &wfst));
        out.push('\n');
    }
    match &a.out {
        Some(p) => manifest::write_bytes(p, out.as_bytes())?,
        None => io::stdout().lock().write_all(out.as_bytes())?,
    }
    Ok(())
}

fn pipeline_cmd(p: PipelineCommand, jobs: Option<usize>) -> Result<()> {
    match p {
        PipelineCommand::Run { config, force } => {
            let (config, diags) = PipelineConfig::load(&config)?;
            if diags.has_errors() {
                return Err(ConfigError::Invalid(diags).into());
            }
            let report = pipeline::run_pipeline(&config, &RunOptions { force, jobs })?;
            pipeline::check_conservation(&report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        PipelineCommand::Validate { config } => {
            let (_, diags) = PipelineConfig::load(&config)?;
            print!("{diags}");
            if diags.has_errors() {
                return Err(ConfigError::Invalid(diags).into());
            }
            Ok(())
        }
        PipelineCommand::Template => {
            print!("{}", PipelineConfig::template());
            Ok(())
        }
    }
}
