//! Config-driven pipeline runner. Stages talk only through files: each
//! writes `<out>/NN_<stage>.jsonl` holding exactly the rows it received,
//! updated, so every manifest conserves its own input.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use corpusforge_core::audio::{mfcc, AudioBuffer, MfccConfig, CANONICAL_RATE};
use corpusforge_core::corpus::{split_by_speaker, SplitSpec, Status, UtteranceRecord, NOISE_CLUSTER};
use corpusforge_core::gender::{dominant_gender, Gender, SvmModel};
use corpusforge_core::snr::{filter_by_snr, wada_snr, GainTable, SnrError, SnrThresholds};
use corpusforge_core::speaker::{
    embed_mfcc_stats, hdbscan, select_budget, BudgetOutcome, BudgetRecord, ClusterAssignment, Embedding, HdbscanParams,
};
use corpusforge_core::text::{CleanOutcome, CleanReport, Cleaner};
use corpusforge_core::vad::{chunk, collect_spans, VadConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{hex, ConfigError, PipelineConfig, Stage};
use crate::formats::{load_embeddings, load_model, save_embeddings};
use crate::manifest::{self, Row};
use crate::wav::{read_wav, write_wav};

pub const CHUNK_DIR: &str = "chunks";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const REPORT_FILE: &str = "report.json";
pub const TEXTCLEAN_REPORT_FILE: &str = "textclean_report.json";
const STAMP_DIR: &str = ".stamps";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Worker threads; rayon's default when `None`.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub manifest: String,
    #[serde(rename = "in")]
    pub records_in: usize,
    pub kept: usize,
    pub rejected: BTreeMap<String, usize>,
    pub seconds: f64,
    pub skipped: bool,
}

impl StageReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub sources: usize,
    pub stages: Vec<StageReport>,
    pub seconds: f64,
}

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n.max(1));
    }
    Ok(b.build()?)
}

/// `*.wav` files directly inside `dir`, sorted by name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn source_name(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Rows for one source file: kept chunks (written to `<out>/chunks`) and
/// too-short pieces, which have no audio.
pub fn vad_file(path: &Path, out_dir: &Path, config: &VadConfig) -> Result<Vec<Row>> {
    let audio = read_wav(path, CANONICAL_RATE)?;
    let spans = collect_spans(&audio, config)?;
    let pieces = chunk(&audio, &spans, config);
    let source = source_name(path);
    let rate = audio.sample_rate() as f64;
    let span_extra = |row: &mut Row, start: usize, end: usize| {
        row.extra.insert("start_s".into(), Value::from(start as f64 / rate));
        row.extra.insert("end_s".into(), Value::from(end as f64 / rate));
    };
    let mut rows = Vec::new();
    for (i, c) in pieces.chunks.iter().enumerate() {
        let id = format!("{source}_{i:04}");
        let rel = format!("{CHUNK_DIR}/{id}.wav");
        write_wav(&c.audio, out_dir.join(&rel))?;
        let mut r = UtteranceRecord::new(&id, &source, rel, c.audio.duration_s());
        r.status = Status::VadOk;
        let mut row = Row::new(r);
        span_extra(&mut row, c.span.start_sample, c.span.end_sample);
        rows.push(row);
    }
    for (i, s) in pieces.too_short.iter().enumerate() {
        let mut r = UtteranceRecord::new(format!("{source}_short_{i:04}"), &source, "", s.len() as f64 / rate);
        r.reason = Some("too_short".into());
        let mut row = Row::new(r);
        span_extra(&mut row, s.start_sample, s.end_sample);
        rows.push(row);
    }
    Ok(rows)
}

/// Estimates SNR and applies the thresholds; silent audio is rejected.
pub fn snr_row(mut row: Row, audio: &AudioBuffer, table: &GainTable, thresholds: &SnrThresholds) -> Row {
    match wada_snr(audio, table) {
        Ok(est) => {
            row.record.snr_db = Some(est.db);
            let (_, rejected) = filter_by_snr(vec![((), est)], thresholds);
            if let Some((_, _, why)) = rejected.first() {
                row.record.status = Status::SnrRejected;
                row.record.reason = Some(why.reason().into());
            }
        }
        Err(SnrError::SilentInput) => {
            row.record.status = Status::SnrRejected;
            row.record.reason = Some("silent".into());
        }
        Err(e) => row.record.reason = Some(e.to_string()),
    }
    row
}

pub fn embed_audio(utt_id: &str, audio: &AudioBuffer, dim: usize) -> Result<Embedding> {
    Ok(embed_mfcc_stats(utt_id, &mfcc(audio, &MfccConfig::default()), dim)?)
}

/// Clusters each source separately; cluster ids are local to a source.
pub fn cluster_by_source(
    rows: &mut [Row],
    embeddings: &BTreeMap<String, Embedding>,
    params: &HdbscanParams,
    pool: &rayon::ThreadPool,
) -> Result<()> {
    let groups = group_by_source(rows);
    let results: Vec<Result<ClusterAssignment>> = pool.install(|| {
        groups
            .par_iter()
            .map(|(_, idx)| {
                let es: Vec<Embedding> = idx
                    .iter()
                    .map(|&i| {
                        let id = &rows[i].record.utt_id;
                        embeddings.get(id).cloned().ok_or_else(|| anyhow!("no embedding for {id}"))
                    })
                    .collect::<Result<_>>()?;
                Ok(hdbscan(&es, params)?)
            })
            .collect()
    });
    for ((_, idx), assignment) in groups.iter().zip(results) {
        let assignment = assignment?;
        for (&i, (_, label)) in idx.iter().zip(&assignment.labels) {
            rows[i].record.speaker_cluster = Some(label.map_or(NOISE_CLUSTER, |c| c as i64));
        }
    }
    Ok(())
}

fn group_by_source(rows: &[Row]) -> Vec<(String, Vec<usize>)> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.record.source.clone()).or_default().push(i);
    }
    groups.into_iter().collect()
}

/// Individual predictions, then the dominant label per clustered speaker;
/// noise and unclustered rows keep their own.
pub fn assign_gender(rows: &mut [Row], embeddings: &BTreeMap<String, Embedding>, model: &SvmModel) -> Result<()> {
    let mut predictions: Vec<(Gender, f64)> = Vec::with_capacity(rows.len());
    for r in rows.iter() {
        let id = &r.record.utt_id;
        let e = embeddings.get(id).ok_or_else(|| anyhow!("no embedding for {id}"))?;
        predictions.push(model.predict(&e.vector)?);
    }
    for (_, idx) in group_by_source(rows) {
        let labels = idx
            .iter()
            .map(|&i| {
                let c = rows[i].record.speaker_cluster.filter(|c| *c >= 0).map(|c| c as usize);
                (rows[i].record.utt_id.clone(), c)
            })
            .collect::<Vec<_>>();
        let n_clusters = labels.iter().filter_map(|(_, c)| *c).map(|c| c + 1).max().unwrap_or(0);
        let by_id: BTreeMap<String, (Gender, f64)> =
            idx.iter().map(|&i| (rows[i].record.utt_id.clone(), predictions[i])).collect();
        let dominant = dominant_gender(&ClusterAssignment { labels: labels.clone(), n_clusters }, &by_id);
        for (&i, (_, c)) in idx.iter().zip(&labels) {
            let (own, margin) = predictions[i];
            let g = c.and_then(|c| dominant.get(&c).copied()).unwrap_or(own);
            rows[i].record.gender = Some(g.as_str().into());
            rows[i].extra.insert("gender_margin".into(), Value::from(margin));
        }
    }
    Ok(())
}

/// Per source and speaker, keeps the highest-SNR chunks under the cap.
pub fn select_rows(rows: &mut [Row], cap_minutes: f64) {
    for (_, idx) in group_by_source(rows) {
        let budget: Vec<BudgetRecord> = idx
            .iter()
            .map(|&i| {
                let r = &rows[i].record;
                BudgetRecord {
                    utt_id: r.utt_id.clone(),
                    duration_s: r.duration_s,
                    snr_db: r.snr_db.unwrap_or(f64::NEG_INFINITY),
                    cluster: r.speaker_cluster.filter(|c| *c >= 0).map(|c| c as usize),
                }
            })
            .collect();
        for (&i, outcome) in idx.iter().zip(select_budget(&budget, cap_minutes)) {
            let r = &mut rows[i].record;
            match outcome {
                BudgetOutcome::Selected => r.status = Status::Selected,
                BudgetOutcome::OverBudget => r.reason = Some("over_budget".into()),
                BudgetOutcome::Unclustered => r.reason = Some("unclustered".into()),
            }
        }
    }
}

/// Cleans transcripts in place; rows without one pass untouched.
pub fn clean_rows(rows: &mut [Row], cleaner: &Cleaner) -> CleanReport {
    let mut report = CleanReport::default();
    for row in rows.iter_mut() {
        let Some(text) = row.record.transcript.clone() else { continue };
        match cleaner.clean(&text, &mut report) {
            CleanOutcome::Kept(t) => row.record.transcript = Some(t),
            CleanOutcome::Numeric(_) => {
                row.record.status = Status::NumericRejected;
                row.record.reason = Some("numeric".into());
            }
            CleanOutcome::Foreign { offending, .. } => {
                row.record.status = Status::ForeignRejected;
                row.record.reason = Some("foreign".into());
                let chars: String = offending.into_iter().collect();
                row.extra.insert("foreign_chars".into(), Value::from(chars));
            }
        }
    }
    report
}

pub fn clean_report_json(report: &CleanReport) -> Value {
    let chars = |m: &BTreeMap<char, usize>| -> serde_json::Map<String, Value> {
        m.iter().map(|(c, n)| (c.to_string(), Value::from(*n))).collect()
    };
    serde_json::json!({
        "kept": report.kept,
        "dropped_foreign": report.dropped_foreign,
        "dropped_numeric": report.dropped_numeric,
        "chars_removed": chars(&report.chars_removed),
        "foreign_chars": chars(&report.foreign_chars),
    })
}

/// Speaker-disjoint split, stored in each row's `split` field. Returns the
/// three subsets in train, dev, test order, plus warnings.
pub fn split_rows(rows: &mut [Row], spec: &SplitSpec) -> Result<([Vec<Row>; 3], Vec<String>)> {
    let mut parts: [Vec<Row>; 3] = Default::default();
    if rows.is_empty() {
        return Ok((parts, vec!["nothing to split".into()]));
    }
    let records: Vec<UtteranceRecord> = rows.iter().map(|r| r.record.clone()).collect();
    let result = split_by_speaker(&records, spec)?;
    for (row, s) in rows.iter_mut().zip(&result.assignment) {
        row.extra.insert("split".into(), Value::from(s.as_str()));
        parts[*s as usize].push(row.clone());
    }
    Ok((parts, result.warnings))
}

fn stage_report(stage: Stage, manifest: &Path, rows: &[Row], seconds: f64, skipped: bool) -> StageReport {
    let mut rejected = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_live()) {
        let why = r.record.reason.clone().unwrap_or_else(|| r.record.status.as_str().to_string());
        *rejected.entry(why).or_insert(0) += 1;
    }
    StageReport {
        stage: stage.as_str().into(),
        manifest: manifest.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        records_in: rows.len(),
        kept: rows.iter().filter(|r| r.is_live()).count(),
        rejected,
        seconds,
        skipped,
    }
}

struct Fingerprint(Sha256);

impl Fingerprint {
    fn new(stage: Stage, position: usize) -> Self {
        let mut h = Sha256::new();
        h.update(format!("{position}:{stage}\n"));
        Fingerprint(h)
    }

    fn value<T: Serialize>(&mut self, v: &T) {
        self.0.update(serde_json::to_vec(v).expect("serializable"));
        self.0.update(b"\n");
    }

    fn file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.0.update(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(Sha256::digest(&bytes));
        Ok(())
    }

    fn finish(self) -> String {
        hex(&self.0.finalize())
    }
}

/// Fails with the error after keeping whatever was produced as
/// `<manifest>.partial`.
fn fail_partial<T>(manifest: &Path, rows: &[Row], err: anyhow::Error) -> Result<T> {
    match manifest::write_partial(manifest, rows) {
        Ok(p) => Err(err.context(format!("partial output kept in {}", p.display()))),
        Err(e) => Err(err.context(format!("could not write partial output: {e}"))),
    }
}

fn embeddings_by_id(path: &Path) -> Result<BTreeMap<String, Embedding>> {
    Ok(load_embeddings(path)?.into_iter().map(|e| (e.utt_id.clone(), e)).collect())
}

fn read_audio(manifest_path: &Path, row: &Row) -> Result<AudioBuffer> {
    Ok(read_wav(manifest::resolve(manifest_path, &row.record.audio_path), CANONICAL_RATE)?)
}

/// Runs every configured stage in order. Validation problems surface as
/// [`ConfigError::Invalid`]; anything else is a runtime failure.
pub fn run_pipeline(config: &PipelineConfig, options: &RunOptions) -> Result<RunReport> {
    let diags = config.validate();
    for w in &diags.warnings {
        log::warn!("{w}");
    }
    if diags.has_errors() {
        return Err(ConfigError::Invalid(diags).into());
    }
    let started = Instant::now();
    let pool = thread_pool(options.jobs)?;
    let out = &config.output_dir;
    fs::create_dir_all(out.join(STAMP_DIR)).with_context(|| format!("creating {}", out.display()))?;
    let sources = list_wavs(&config.input_dir)?;
    let mut report = RunReport { config_hash: config.hash(), sources: sources.len(), stages: Vec::new(), seconds: 0.0 };
    let mut previous: Option<PathBuf> = None;
    // A manifest placeholder keyed by `out`: every relative audio path in a
    // stage manifest resolves against the output directory.
    let anchor = out.join("manifest");

    for (pos, stage) in config.stage_list().into_iter().enumerate() {
        let name = format!("{:02}_{stage}", pos + 1);
        let manifest_path = out.join(format!("{name}.jsonl"));
        let stamp_path = out.join(STAMP_DIR).join(&name);
        let t0 = Instant::now();

        let mut fp = Fingerprint::new(stage, pos);
        fp.value(&config.seed);
        match stage {
            Stage::Vad => {
                fp.value(&config.vad);
                for s in &sources {
                    fp.file(s)?;
                }
            }
            Stage::Snr => {
                fp.value(&config.snr);
                if let Some(t) = &config.snr.gain_table {
                    fp.file(t)?;
                }
            }
            Stage::Embed => fp.value(&config.embed),
            Stage::Cluster => {
                fp.value(&config.cluster);
                fp.file(&out.join(EMBEDDINGS_FILE))?;
            }
            Stage::Gender => {
                if let Some(m) = &config.gender.model {
                    fp.file(m)?;
                }
                fp.file(&out.join(EMBEDDINGS_FILE))?;
            }
            Stage::Select => fp.value(&config.select),
            Stage::Textclean => {
                fp.value(&config.textclean);
                if let Some(v) = &config.textclean.vocab {
                    fp.file(v)?;
                }
            }
            Stage::Split => fp.value(&config.split_spec().ratios),
        }
        if let Some(p) = &previous {
            fp.file(p)?;
        }
        let stamp = fp.finish();

        let aux_ok = match stage {
            Stage::Embed => out.join(EMBEDDINGS_FILE).is_file(),
            Stage::Split => ["train", "dev", "test"].iter().all(|s| out.join(format!("{s}.jsonl")).is_file()),
            Stage::Textclean => out.join(TEXTCLEAN_REPORT_FILE).is_file(),
            _ => true,
        };
        let fresh = !options.force
            && aux_ok
            && manifest_path.is_file()
            && fs::read_to_string(&stamp_path).is_ok_and(|s| s.trim() == stamp);
        if fresh {
            let rows = manifest::read(&manifest_path)?;
            log::info!("{name}: up to date, skipped");
            report.stages.push(stage_report(stage, &manifest_path, &rows, t0.elapsed().as_secs_f64(), true));
            previous = Some(manifest_path);
            continue;
        }
        let _ = fs::remove_file(&stamp_path);

        let input: Vec<Row> = match &previous {
            Some(p) => manifest::read(p)?.into_iter().filter(Row::is_live).collect(),
            None => Vec::new(),
        };
        log::info!("{name}: {} input record(s)", if stage == Stage::Vad { sources.len() } else { input.len() });

        let rows: Vec<Row> = match stage {
            Stage::Vad => {
                let chunk_dir = out.join(CHUNK_DIR);
                if chunk_dir.exists() {
                    fs::remove_dir_all(&chunk_dir)?;
                }
                fs::create_dir_all(&chunk_dir)?;
                let vad = config.vad.to_config();
                let per_file: Vec<Result<Vec<Row>>> =
                    pool.install(|| sources.par_iter().map(|p| vad_file(p, out, &vad)).collect());
                let mut rows = Vec::new();
                let mut first_err = None;
                for (p, r) in sources.iter().zip(per_file) {
                    match r {
                        Ok(mut v) => rows.append(&mut v),
                        Err(e) => {
                            first_err.get_or_insert(e.context(format!("vad on {}", p.display())));
                        }
                    }
                }
                if let Some(e) = first_err {
                    return fail_partial(&manifest_path, &rows, e);
                }
                rows
            }
            Stage::Snr => {
                let table = match &config.snr.gain_table {
                    Some(p) => GainTable::parse(&fs::read_to_string(p)?)?,
                    None => GainTable::builtin(),
                };
                let thresholds = config.snr.thresholds();
                let results: Vec<Result<Row>> = pool.install(|| {
                    input
                        .par_iter()
                        .map(|r| Ok(snr_row(r.clone(), &read_audio(&anchor, r)?, &table, &thresholds)))
                        .collect()
                });
                collect_or_partial(&manifest_path, results)?
            }
            Stage::Embed => {
                let dim = config.embed.dim;
                let results: Vec<Result<(Row, Option<Embedding>)>> = pool.install(|| {
                    input
                        .par_iter()
                        .map(|r| {
                            let audio = read_audio(&anchor, r)?;
                            let mut row = r.clone();
                            match embed_audio(&r.record.utt_id, &audio, dim) {
                                Ok(e) => Ok((row, Some(e))),
                                Err(e) => {
                                    log::warn!("{}: {e}", r.record.utt_id);
                                    row.record.reason = Some("too_few_frames".into());
                                    Ok((row, None))
                                }
                            }
                        })
                        .collect()
                });
                let mut rows = Vec::with_capacity(results.len());
                let mut embeddings = Vec::new();
                let mut first_err = None;
                for r in results {
                    match r {
                        Ok((row, e)) => {
                            rows.push(row);
                            embeddings.extend(e);
                        }
                        Err(e) => {
                            first_err.get_or_insert(e);
                        }
                    }
                }
                if let Some(e) = first_err {
                    return fail_partial(&manifest_path, &rows, e);
                }
                save_embeddings(out.join(EMBEDDINGS_FILE), &embeddings)?;
                rows
            }
            Stage::Cluster => {
                let mut rows = input;
                let embeddings = embeddings_by_id(&out.join(EMBEDDINGS_FILE))?;
                if let Err(e) = cluster_by_source(&mut rows, &embeddings, &config.cluster.params(), &pool) {
                    return fail_partial(&manifest_path, &[], e);
                }
                rows
            }
            Stage::Gender => {
                let mut rows = input;
                let model_path = config.gender.model.as_ref().expect("validated");
                let model = load_model(model_path).with_context(|| format!("loading {}", model_path.display()))?;
                let embeddings = embeddings_by_id(&out.join(EMBEDDINGS_FILE))?;
                if let Err(e) = assign_gender(&mut rows, &embeddings, &model) {
                    return fail_partial(&manifest_path, &[], e);
                }
                rows
            }
            Stage::Select => {
                let mut rows = input;
                select_rows(&mut rows, config.select.cap_minutes);
                rows
            }
            Stage::Textclean => {
                let mut rows = input;
                let cleaner = Cleaner::new(config.textclean.vocabulary()?);
                let r = clean_rows(&mut rows, &cleaner);
                let json = serde_json::to_string_pretty(&clean_report_json(&r))? + "\n";
                manifest::write_bytes(&out.join(TEXTCLEAN_REPORT_FILE), json.as_bytes())?;
                rows
            }
            Stage::Split => {
                let mut rows = input;
                let (parts, warnings) = match split_rows(&mut rows, &config.split_spec()) {
                    Ok(v) => v,
                    Err(e) => return fail_partial(&manifest_path, &[], e),
                };
                for w in warnings {
                    log::warn!("split: {w}");
                }
                for (part, label) in parts.iter().zip(["train", "dev", "test"]) {
                    manifest::write(out.join(format!("{label}.jsonl")), part)?;
                }
                rows
            }
        };

        manifest::write(&manifest_path, &rows)?;
        manifest::write_bytes(&stamp_path, format!("{stamp}\n").as_bytes())?;
        let sr = stage_report(stage, &manifest_path, &rows, t0.elapsed().as_secs_f64(), false);
        log::info!("{name}: in {} kept {} rejected {:?}", sr.records_in, sr.kept, sr.rejected);
        report.stages.push(sr);
        previous = Some(manifest_path);
    }

    report.seconds = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&report)? + "\n";
    manifest::write_bytes(&out.join(REPORT_FILE), json.as_bytes())?;
    Ok(report)
}

fn collect_or_partial(manifest_path: &Path, results: Vec<Result<Row>>) -> Result<Vec<Row>> {
    let mut rows = Vec::with_capacity(results.len());
    let mut first_err = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => fail_partial(manifest_path, &rows, e),
        None => Ok(rows),
    }
}

/// Checks that a finished run conserved records: inside every stage
/// `in = kept + rejected`, and each stage's input is the previous stage's
/// kept set.
pub fn check_conservation(report: &RunReport) -> Result<()> {
    for (i, s) in report.stages.iter().enumerate() {
        if s.records_in != s.kept + s.rejected_total() {
            bail!("{}: in {} != kept {} + rejected {}", s.stage, s.records_in, s.kept, s.rejected_total());
        }
        if i > 0 && report.stages[i - 1].kept != s.records_in {
            bail!("{}: in {} but previous stage kept {}", s.stage, s.records_in, report.stages[i - 1].kept);
        }
    }
    Ok(())
}
