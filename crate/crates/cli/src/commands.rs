use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use melodist_core::bleu::{evaluate_model, BleuReport, UnigramBaseline};
use melodist_core::corpus::{
    build_corpus, compute_stats, read_split, split_corpus, write_meta, write_split, CorpusMeta,
    CorpusStats, NoteStream, SplitRatios, Strategy, TOKEN_GRAMMAR_VERSION,
};
use melodist_core::musicxml::{
    emit_score_with, parse_score, validate_syllable, SkipEntry, TimeSignature,
};
use melodist_core::seq2seq::{
    build_vocabularies, load_params, save_params, train_observed, LogRecord, ModelConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::{align_syllables, CliError};

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
struct FileReport {
    file: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    notes: usize,
    skipped: Vec<SkipEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub streams: usize,
    /// `(file name, diagnostic)` for every file that could not be read.
    pub failures: Vec<(String, String)>,
    pub skipped_elements: usize,
    pub report: PathBuf,
}

fn is_musicxml(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()),
        Some("xml" | "musicxml")
    )
}

/// Parse every `.xml`/`.musicxml` file in `dir` into a JSON-lines archive
/// of note streams (one per readable file, sorted by file name) and a JSON
/// report of skipped elements and failures.
pub fn ingest(
    dir: &Path,
    archive: &Path,
    report: Option<&Path>,
) -> Result<IngestSummary, CliError> {
    require(dir, "input directory")?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_musicxml(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::NoScores(dir.to_path_buf()));
    }

    let parsed: Vec<(String, Result<NoteStream, String>, Vec<SkipEntry>)> = files
        .par_iter()
        .map(|p| {
            let name = p
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            match fs::read(p) {
                Err(e) => (name, Err(e.to_string()), vec![]),
                Ok(bytes) => match parse_score(&bytes) {
                    Ok(doc) => {
                        let skipped = doc.report.skipped.clone();
                        (
                            name.clone(),
                            Ok(NoteStream::from_document(name, &doc)),
                            skipped,
                        )
                    }
                    Err(e) => (name, Err(e.to_string()), vec![]),
                },
            }
        })
        .collect();

    let mut lines = String::new();
    let mut reports = Vec::with_capacity(parsed.len());
    let mut failures = Vec::new();
    let mut skipped_elements = 0;
    for (name, result, skipped) in parsed {
        skipped_elements += skipped.len();
        match result {
            Ok(stream) => {
                reports.push(FileReport {
                    file: name,
                    status: "ok",
                    error: None,
                    notes: stream.events.len(),
                    skipped,
                });
                lines.push_str(&serde_json::to_string(&stream).expect("streams serialize"));
                lines.push('\n');
            }
            Err(e) => {
                failures.push((name.clone(), e.clone()));
                reports.push(FileReport {
                    file: name,
                    status: "error",
                    error: Some(e),
                    notes: 0,
                    skipped,
                });
            }
        }
    }
    let report_path = report
        .map(Path::to_path_buf)
        .unwrap_or_else(|| archive.with_extension("report.json"));
    write_file(
        &report_path,
        serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
    )?;
    let streams = reports.len() - failures.len();
    if streams == 0 {
        return Err(CliError::AllScoresFailed {
            failed: failures.len(),
        });
    }
    write_file(archive, lines)?;
    Ok(IngestSummary {
        streams,
        failures,
        skipped_elements,
        report: report_path,
    })
}

pub fn read_archive(path: &Path) -> Result<Vec<NoteStream>, CliError> {
    require(path, "note-stream archive")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::BadInput {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub stats: CorpusStats,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

/// Segment the archived streams, split, and write `train`/`dev`/`test`
/// files plus `corpus.meta` into `out`.
pub fn corpus(
    archive: &Path,
    out: &Path,
    strategy: Strategy,
    seed: u64,
    ratios: SplitRatios,
) -> Result<CorpusSummary, CliError> {
    let streams = read_archive(archive)?;
    let all = build_corpus(&streams, strategy)?;
    let stats = compute_stats(&all).ok_or(melodist_core::corpus::CorpusError::EmptyCorpus)?;
    let (train, dev, test) = split_corpus(&all, ratios, seed)?;
    create_dir(out)?;
    write_split(out, "train", &train)?;
    write_split(out, "dev", &dev)?;
    write_split(out, "test", &test)?;
    write_meta(
        out,
        &CorpusMeta {
            strategy,
            grammar: TOKEN_GRAMMAR_VERSION,
            seed,
            ratios,
        },
    )?;
    Ok(CorpusSummary {
        stats,
        train: train.len(),
        dev: dev.len(),
        test: test.len(),
    })
}

/// Read a `key=value` config file on top of `base`.
pub fn load_config(path: &Path, base: ModelConfig) -> Result<ModelConfig, CliError> {
    require(path, "config file")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut c = base;
    c.apply_text(&text)?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
    pub log: PathBuf,
}

/// Default log location next to a checkpoint: `model.ckpt` → `model.log.jsonl`.
pub fn default_log_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("log.jsonl")
}

/// Train on `<corpus>/train.*`, select on `<corpus>/dev.*`, write the best
/// checkpoint and stream the training log.
pub fn train(
    corpus_dir: &Path,
    checkpoint: &Path,
    log: Option<&Path>,
    config: ModelConfig,
    progress: &mut dyn FnMut(&LogRecord),
) -> Result<TrainSummary, CliError> {
    require(corpus_dir, "corpus directory")?;
    let train = read_split(corpus_dir, "train")?;
    let dev = read_split(corpus_dir, "dev")?;
    let (src, tgt) = build_vocabularies(&train);

    let log_path = log
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_log_path(checkpoint));
    let file = fs::File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    let mut writer = BufWriter::new(file);
    let mut write_err = None;
    let trained = train_observed(&train, &dev, src, tgt, config, &mut |r| {
        if write_err.is_none() {
            let line = serde_json::to_string(r).expect("log records serialize");
            if let Err(e) = writeln!(writer, "{line}").and_then(|_| writer.flush()) {
                write_err = Some(e);
            }
        }
        progress(r);
    })?;
    if let Some(e) = write_err {
        return Err(CliError::io(&log_path, e));
    }
    save_params(&trained.model, checkpoint)?;
    Ok(TrainSummary {
        best_epoch: trained.best_epoch,
        best_dev_bleu: trained.best_dev_bleu,
        log: log_path,
    })
}

/// BLEU of the checkpoint on `<corpus>/<split>.*`. With `baseline`, score the
/// unigram-frequency baseline fitted on the train split instead.
pub fn evaluate(
    checkpoint: &Path,
    corpus_dir: &Path,
    split: &str,
    max_len: Option<usize>,
    baseline: bool,
) -> Result<BleuReport, CliError> {
    require(corpus_dir, "corpus directory")?;
    let data = read_split(corpus_dir, split)?;
    if baseline {
        let train = read_split(corpus_dir, "train")?;
        let b =
            UnigramBaseline::fit(&train).ok_or(melodist_core::corpus::CorpusError::EmptyCorpus)?;
        return Ok(b.evaluate(&data)?);
    }
    require(checkpoint, "checkpoint")?;
    let model = load_params(checkpoint)?;
    let max_len = max_len.unwrap_or(model.config.max_decode_len);
    Ok(evaluate_model(&model, &data, max_len)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub line: usize,
    pub path: PathBuf,
    pub notes: usize,
    /// Decoded reserved tokens that were not written.
    pub dropped: usize,
}

/// One MusicXML file per non-blank lyric line, named `<stem>-<line>.musicxml`.
/// Every line is validated and aligned before any file is written.
pub fn generate(
    checkpoint: &Path,
    lyrics: &Path,
    out: &Path,
    max_len: Option<usize>,
    time: TimeSignature,
) -> Result<Vec<Generated>, CliError> {
    require(checkpoint, "checkpoint")?;
    require(lyrics, "lyric file")?;
    let text = fs::read_to_string(lyrics).map_err(|e| CliError::io(lyrics, e))?;
    let mut lines: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let syllables = raw
            .split_whitespace()
            .map(validate_syllable)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::BadInput {
                path: lyrics.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        lines.push((i + 1, syllables));
    }
    if lines.is_empty() {
        return Err(CliError::BadInput {
            path: lyrics.to_path_buf(),
            line: 0,
            message: "no lyric lines".into(),
        });
    }

    let model = load_params(checkpoint)?;
    let max_len = max_len.unwrap_or(model.config.max_decode_len);
    let results: Vec<Result<_, CliError>> = lines
        .par_iter()
        .map(|(line, syl)| {
            let r = model.greedy_decode(syl, max_len)?;
            let (melody, dropped) = align_syllables(syl, &r.tokens)
                .map_err(|error| CliError::Alignment { line: *line, error })?;
            let xml = emit_score_with(&melody, &syl.join(" "), time).map_err(|error| {
                CliError::MusicXml {
                    path: lyrics.to_path_buf(),
                    error,
                }
            })?;
            Ok((*line, xml, melody.len(), dropped))
        })
        .collect();
    let decoded = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    create_dir(out)?;
    let stem = lyrics.file_stem().unwrap_or_default().to_string_lossy();
    let mut written = Vec::with_capacity(decoded.len());
    for (line, xml, notes, dropped) in decoded {
        let path = out.join(format!("{stem}-{line:03}.musicxml"));
        write_file(&path, xml)?;
        written.push(Generated {
            line,
            path,
            notes,
            dropped,
        });
    }
    Ok(written)
}
