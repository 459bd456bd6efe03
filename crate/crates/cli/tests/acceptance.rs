//! Acceptance checks. Prints one line per criterion and exits nonzero if any
//! criterion fails. Criteria that need the published score collection run
//! only when `MELODY_DATASET_DIR` points at a directory of its MusicXML files.

mod common;

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use melodist_core::bleu::{corpus_bleu, evaluate_model, UnigramBaseline};
use melodist_core::corpus::{
    compute_stats, read_split, segment_silence, MelodicSentence, ParallelCorpus, Vocabulary,
};
use melodist_core::musicxml::{emit_score, parse_score, Alter, NoteEvent, NoteType, Pitch, Step};
use melodist_core::seq2seq::{from_bytes, to_bytes, train, AttentionKind, ModelConfig, Seq2Seq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn dataset_dir() -> Option<std::path::PathBuf> {
    std::env::var_os("MELODY_DATASET_DIR").map(Into::into)
}

fn split(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

fn pair(syl: &str, notes: &str) -> MelodicSentence {
    MelodicSentence {
        syllables: split(syl),
        note_tokens: split(notes),
    }
}

// ---------------------------------------------------------------- 1

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let p = pair("go le san", "G-4-eighth A-4-eighth B-4-quarter");
    let src = Vocabulary::build(std::slice::from_ref(&p.syllables));
    let tgt = Vocabulary::build(std::slice::from_ref(&p.note_tokens));
    let cfg = ModelConfig {
        num_units: 8,
        num_layers: 1,
        attention: AttentionKind::Standard,
        seed: 3,
        ..ModelConfig::default()
    };
    let model = Seq2Seq::new(cfg, src, tgt).expect("valid config");
    let s = model.src_vocab.encode(&p.syllables);
    let t = model.tgt_vocab.encode(&p.note_tokens);
    let (_, grads) = model.loss_and_grads(&s, &t, None).expect("loss");

    let h = 1e-5;
    let mut worst = (0.0f64, String::new());
    let names = model.params.names();
    for (k, g) in grads.tensors().iter().enumerate() {
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..g.len() {
            let mut m = model.clone();
            m.params.tensors_mut()[k].data_mut()[i] += h;
            let plus = m.loss_ids(&s, &t).expect("loss");
            m.params.tensors_mut()[k].data_mut()[i] -= 2.0 * h;
            let minus = m.loss_ids(&s, &t).expect("loss");
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = g.data()[i];
            diff += (analytic - numeric).powi(2);
            na += analytic.powi(2);
            nn += numeric.powi(2);
        }
        // Blocks with no dependence on the loss compare in absolute terms.
        let rel = diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-4);
        if rel >= worst.0 {
            worst = (rel, names[k].clone());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst.0 <= 1e-4 && elapsed < Duration::from_secs(30),
        format!(
            "max blockwise rel err {:.2e} ({}), {} blocks, {:.1?}",
            worst.0,
            worst.1,
            names.len(),
            elapsed
        ),
    )
}

// ---------------------------------------------------------------- 2

const ROW1: (&str, &str) = (
    "go le san gam go le san gam",
    "G-4-eighth A-4-eighth B-4-quarter A-4-half A-4-eighth G-4-eighth A-4-quarter G-4-half",
);

fn toy_corpus() -> ParallelCorpus {
    let rows = [
        ROW1,
        (
            "Ci be gam az de le tan gam",
            "G-4-eighth A-4-eighth B-4-quarter A-4-half A-4-eighth G-4-eighth A-4-quarter G-4-half",
        ),
        (
            "me se Af tAb a ge bar man",
            "A-4-eighth B-4-eighth C-5-quarter B-4-half B-4-eighth A-4-eighth B-4-quarter A-4-half",
        ),
        (
            "na tA bi sar da mo bi ran gam",
            "A-4-eighth G-4-eighth A-4-quarter G-4-quarter F-4-eighth G-4-eighth A-4-quarter B-4-quarter A-4-half",
        ),
        // Shortened and recombined variants of the rows above.
        ("go le san gam", "G-4-eighth A-4-eighth B-4-quarter A-4-half"),
        ("me se Af tAb", "A-4-eighth B-4-eighth C-5-quarter B-4-half"),
        ("na tA bi sar", "A-4-eighth G-4-eighth A-4-quarter G-4-quarter"),
        (
            "Ci be gam az de le",
            "A-4-eighth B-4-eighth C-5-quarter B-4-half B-4-eighth A-4-eighth",
        ),
    ];
    let rows: Vec<(Vec<String>, Vec<String>)> =
        rows.iter().map(|(s, n)| (split(s), split(n))).collect();
    as_corpus(&rows)
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let toy = toy_corpus();
    let (src, tgt) = melodist_core::seq2seq::build_vocabularies(&toy);
    let cfg = ModelConfig {
        num_units: 32,
        num_layers: 2,
        keep_prob: 1.0,
        max_epochs: 4,
        steps_per_epoch: 500,
        seed: 7,
        ..ModelConfig::default()
    };
    let steps = cfg.max_epochs * cfg.steps_per_epoch;
    let trained = match train(&toy, &toy, src, tgt, cfg) {
        Ok(t) => t,
        Err(e) => return Fail(format!("training failed: {e}")),
    };
    let m = &trained.model;
    let loss = m.mean_token_loss(&toy).expect("loss");
    let decoded = m.decode_corpus(&toy, 50).expect("decode");
    let exact: Vec<bool> = decoded
        .iter()
        .zip(&toy.pairs)
        .map(|(d, p)| *d == p.note_tokens)
        .collect();
    let n_exact = exact.iter().filter(|&&e| e).count();
    let bleu = evaluate_model(m, &toy, 50).expect("bleu").bleu;
    let elapsed = start.elapsed();
    check(
        loss < 0.05 && n_exact >= 7 && exact[0] && elapsed < Duration::from_secs(300),
        format!(
            "loss {loss:.5} after {steps} steps, {n_exact}/8 exact (first row {}), BLEU {bleu:.4}, {:.1?}",
            if exact[0] { "exact" } else { "wrong" },
            elapsed
        ),
    )
}

// ---------------------------------------------------------------- 3

fn bleu_oracle() -> Outcome {
    let hyp = vec![split("a b c d")];
    let refs = vec![split("a b c d e")];
    let r = corpus_bleu(&hyp, &refs, 4).expect("bleu");
    let expected = (-0.25f64).exp();
    let ident: Vec<Vec<String>> = toy_corpus().targets();
    let id = corpus_bleu(&ident, &ident, 4).expect("bleu").bleu;
    check(
        (r.bleu - expected).abs() <= 1e-9 && r.precisions.iter().all(|&p| p == 1.0) && id == 1.0,
        format!(
            "hand case {:.10} vs exp(-0.25) {:.10}, identity {id}",
            r.bleu, expected
        ),
    )
}

// ---------------------------------------------------------------- 4

fn random_note(rng: &mut ChaCha8Rng) -> NoteEvent {
    let step =
        Step::from_char(['C', 'D', 'E', 'F', 'G', 'A', 'B'][rng.random_range(0..7)]).unwrap();
    let alter = Alter::from_semitones(rng.random_range(-1..=1)).unwrap();
    let t = NoteType::ALL[rng.random_range(0..NoteType::ALL.len())];
    NoteEvent::note(
        Pitch::new(step, alter, rng.random_range(2..=6)),
        t,
        rng.random_bool(0.3),
    )
}

/// Split on rests, drop everything before the first syllable, drop runs
/// without one.
fn silence_oracle(stream: &[NoteEvent]) -> Vec<(Vec<String>, Vec<String>)> {
    let mut runs: Vec<Vec<&NoteEvent>> = vec![vec![]];
    for e in stream {
        if e.is_rest() {
            runs.push(vec![]);
        } else {
            runs.last_mut().unwrap().push(e);
        }
    }
    let mut out = Vec::new();
    for run in runs {
        let mut started = false;
        let (mut syl, mut notes) = (vec![], vec![]);
        for e in run {
            started |= e.syllable.is_some();
            if !started {
                continue;
            }
            if let Some(s) = &e.syllable {
                syl.push(s.clone());
            }
            let p = e.pitch.unwrap();
            let mut tok = format!("{}", p.step.as_char());
            tok.push_str(match p.alter.semitones() {
                1 => "#",
                -1 => "b",
                _ => "",
            });
            tok.push_str(&format!("-{}-{}", p.octave, e.note_type.as_str()));
            if e.dotted {
                tok.push('.');
            }
            notes.push(tok);
        }
        if started {
            out.push((syl, notes));
        }
    }
    out
}

fn segmentation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut sentences = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=50);
        let stream: Vec<NoteEvent> = (0..len)
            .map(|_| {
                if rng.random_bool(0.2) {
                    NoteEvent::rest(NoteType::Quarter, false)
                } else {
                    let n = random_note(&mut rng);
                    if rng.random_bool(0.7) {
                        n.with_syllable(SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                    } else {
                        n
                    }
                }
            })
            .collect();
        let got: Vec<(Vec<String>, Vec<String>)> = segment_silence(&stream)
            .into_iter()
            .map(|s| (s.syllables, s.note_tokens))
            .collect();
        let want = silence_oracle(&stream);
        sentences += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over 1000 streams ({sentences} sentences)"),
    )
}

// ---------------------------------------------------------------- 5

fn ingest_dataset(dir: &Path, work: &Path) -> Result<ParallelCorpus, String> {
    let archive = work.join("streams.jsonl");
    let o = melodist(&["ingest", path_str(dir), "--out", path_str(&archive)]);
    if !o.status.success() {
        return Err(stderr(&o));
    }
    let corpus = work.join("corpus");
    let o = melodist(&["corpus", path_str(&archive), "--out", path_str(&corpus)]);
    if !o.status.success() {
        return Err(stderr(&o));
    }
    let mut all = ParallelCorpus::default();
    for s in ["train", "dev", "test"] {
        let c = read_split(&corpus, s).map_err(|e| e.to_string())?;
        all.pairs.extend(c.pairs);
        all.provenance.extend(c.provenance);
    }
    Ok(all)
}

fn statistics_dataset(dir: &Path) -> Outcome {
    let work = tempfile::tempdir().expect("tempdir");
    let all = match ingest_dataset(dir, work.path()) {
        Ok(c) => c,
        Err(e) => return Fail(format!("pipeline failed: {e}")),
    };
    let Some(s) = compute_stats(&all) else {
        return Fail("empty corpus".into());
    };
    check(
        s.sentence_count == 1521
            && (s.mean_syllables_per_sentence - 10.12).abs() <= 0.5
            && (s.mean_notes_per_sentence - 11.43).abs() <= 0.5
            && s.unique_syllables.abs_diff(775) <= 25
            && s.unique_notes.abs_diff(105) <= 10,
        format!(
            "sentences {}, syllables/sentence {:.2}, notes/sentence {:.2}, unique syllables {}, unique notes {}",
            s.sentence_count,
            s.mean_syllables_per_sentence,
            s.mean_notes_per_sentence,
            s.unique_syllables,
            s.unique_notes
        ),
    )
}

fn statistics_synthetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for round in 0..200 {
        let rows = songbook(rng.random_range(1..80), round);
        let c = as_corpus(&rows);
        let s = compute_stats(&c).expect("nonempty");
        let mut syl = Vec::new();
        let mut notes = Vec::new();
        for (a, b) in &rows {
            syl.extend(a.iter().cloned());
            notes.extend(b.iter().cloned());
        }
        let mut us = syl.clone();
        us.sort();
        us.dedup();
        let mut un = notes.clone();
        un.sort();
        un.dedup();
        let n = rows.len() as f64;
        let errs = [
            s.mean_syllables_per_sentence - syl.len() as f64 / n,
            s.mean_notes_per_sentence - notes.len() as f64 / n,
            s.syllable_vocab_variety - us.len() as f64 / syl.len() as f64,
            s.note_vocab_variety - un.len() as f64 / notes.len() as f64,
            (s.unique_syllables as f64) - us.len() as f64,
            (s.unique_notes as f64) - un.len() as f64,
            (s.sentence_count as f64) - n,
        ];
        worst = errs.iter().fold(worst, |w, e| w.max(e.abs()));
    }
    check(
        worst <= 1e-12,
        format!("synthetic corpora: max deviation from independent counts {worst:e}"),
    )
}

// ---------------------------------------------------------------- 6

fn bleu_range_dataset(dir: &Path) -> Outcome {
    let work = tempfile::tempdir().expect("tempdir");
    if let Err(e) = ingest_dataset(dir, work.path()) {
        return Fail(format!("pipeline failed: {e}"));
    }
    let corpus = work.path().join("corpus");
    let mut scores = Vec::new();
    for attention in ["standard", "none"] {
        let ckpt = work.path().join(format!("{attention}.ckpt"));
        let o = melodist(&[
            "train",
            path_str(&corpus),
            "--out",
            path_str(&ckpt),
            "--attention",
            attention,
            "--quiet",
        ]);
        if !o.status.success() {
            return Fail(format!("{attention}: {}", stderr(&o)));
        }
        let o = melodist(&[
            "evaluate",
            path_str(&ckpt),
            path_str(&corpus),
            "--split",
            "dev",
            "--json",
        ]);
        let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap_or_default();
        scores.push(v["bleu"].as_f64().unwrap_or(f64::NAN) * 100.0);
    }
    let o = melodist(&[
        "evaluate",
        "-",
        path_str(&corpus),
        "--split",
        "dev",
        "--baseline",
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap_or_default();
    let base = v["bleu"].as_f64().unwrap_or(f64::NAN) * 100.0;
    check(
        scores
            .iter()
            .all(|&s| (5.0..=25.0).contains(&s) && s > base),
        format!(
            "dev BLEU standard {:.2}, none {:.2}, unigram baseline {base:.2}",
            scores[0], scores[1]
        ),
    )
}

/// Held-out synthetic songbook where notes follow from syllables. Not the
/// criterion itself, only evidence that both variants learn past the baseline.
fn bleu_proxy() -> Outcome {
    let train_set = as_corpus(&songbook(200, 1));
    let dev = as_corpus(&songbook(25, 2));
    let base = UnigramBaseline::fit(&train_set)
        .expect("nonempty")
        .evaluate(&dev)
        .expect("bleu")
        .bleu;
    let mut parts = Vec::new();
    let mut ok = true;
    for attention in [AttentionKind::Standard, AttentionKind::None] {
        let (src, tgt) = melodist_core::seq2seq::build_vocabularies(&train_set);
        let cfg = ModelConfig {
            num_units: 32,
            num_layers: 1,
            attention,
            keep_prob: 1.0,
            learning_rate: 0.3,
            max_epochs: 6,
            steps_per_epoch: 500,
            ..ModelConfig::default()
        };
        match train(&train_set, &dev, src, tgt, cfg) {
            Ok(t) => {
                ok &= t.best_dev_bleu > base;
                parts.push(format!("{attention} {:.2}", t.best_dev_bleu * 100.0));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{attention} failed: {e}"));
            }
        }
    }
    check(
        ok,
        format!(
            "synthetic dev BLEU {}, unigram baseline {:.2}",
            parts.join(", "),
            base * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 7

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = 0;
    for i in 0..500 {
        let len = rng.random_range(1..=40);
        let melody: Vec<NoteEvent> = (0..len)
            .map(|k| {
                let n = random_note(&mut rng);
                if k == 0 || rng.random_bool(0.7) {
                    n.with_syllable(SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                } else {
                    n
                }
            })
            .collect();
        let ok = emit_score(&melody, &format!("melody {i}"))
            .ok()
            .and_then(|bytes| parse_score(&bytes).ok())
            .is_some_and(|doc| {
                doc.note_stream.len() == melody.len()
                    && doc
                        .note_stream
                        .iter()
                        .zip(&melody)
                        .all(|(a, b)| a.musical_tuple() == b.musical_tuple())
            });
        if !ok {
            failures += 1;
        }
    }

    let toy = toy_corpus();
    let (src, tgt) = melodist_core::seq2seq::build_vocabularies(&toy);
    let model = Seq2Seq::new(
        ModelConfig {
            num_units: 16,
            num_layers: 2,
            seed: 5,
            ..ModelConfig::default()
        },
        src,
        tgt,
    )
    .expect("model");
    let bytes = to_bytes(&model);
    let identical = from_bytes(&bytes).is_ok_and(|m| {
        m.params
            .tensors()
            .iter()
            .zip(model.params.tensors())
            .all(|(a, b)| {
                a.shape() == b.shape()
                    && a.data()
                        .iter()
                        .zip(b.data())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
            && m.config == model.config
            && to_bytes(&m) == bytes
    });
    check(
        failures == 0 && identical,
        format!(
            "{failures}/500 melodies differ after emit/parse; checkpoint {}",
            if identical {
                "bit-identical"
            } else {
                "differs"
            }
        ),
    )
}

// ---------------------------------------------------------------- 8

fn determinism() -> Outcome {
    let root = tempfile::tempdir().expect("tempdir");
    let corpus = prepared_corpus(root.path(), 3, 10);
    let cfg = root.path().join("small.cfg");
    fs::write(&cfg, SMALL_CONFIG).expect("write config");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let ckpt = root.path().join(format!("{run}.ckpt"));
        let log = root.path().join(format!("{run}.log.jsonl"));
        let o = melodist(&[
            "train",
            path_str(&corpus),
            "--out",
            path_str(&ckpt),
            "--config",
            path_str(&cfg),
            "--seed",
            "13",
            "--quiet",
        ]);
        if !o.status.success() {
            return Fail(format!("run {run}: {}", stderr(&o)));
        }
        outputs.push((
            fs::read(&log).expect("log"),
            fs::read(&ckpt).expect("checkpoint"),
        ));
    }
    let same_log = outputs[0].0 == outputs[1].0;
    let same_ckpt = outputs[0].1 == outputs[1].1;
    let lines = String::from_utf8_lossy(&outputs[0].0).lines().count();
    check(
        same_log && same_ckpt,
        format!(
            "log ({lines} records) {}, checkpoint ({} bytes) {}",
            if same_log { "identical" } else { "differs" },
            outputs[0].1.len(),
            if same_ckpt { "identical" } else { "differs" }
        ),
    )
}

fn main() -> ExitCode {
    let dataset = dataset_dir();
    let mut results: Vec<(&str, &str, Outcome)> = vec![
        ("1", "gradient check", gradient_check()),
        ("2", "overfit toy corpus", overfit()),
        ("3", "BLEU oracle", bleu_oracle()),
        ("4", "silence segmentation", segmentation()),
    ];
    match &dataset {
        Some(d) => {
            results.push(("5", "dataset statistics", statistics_dataset(d)));
            results.push(("5", "synthetic statistics", statistics_synthetic()));
            results.push(("6", "dataset BLEU range", bleu_range_dataset(d)));
        }
        None => {
            let why = "MELODY_DATASET_DIR not set".to_string();
            results.push(("5", "dataset statistics", NotRun(why.clone())));
            results.push(("5", "synthetic statistics", statistics_synthetic()));
            results.push(("6", "dataset BLEU range", NotRun(why)));
        }
    }
    results.push(("6", "synthetic BLEU above baseline (proxy)", bleu_proxy()));
    results.push(("7", "round trip", round_trip()));
    results.push(("8", "training determinism", determinism()));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            NotRun(d) => ("NOT RUN", d),
        };
        println!("[{tag}] {id} {name}: {detail}");
    }
    let seen: HashSet<&str> = results.iter().map(|r| r.0).collect();
    println!(
        "{} checks over {} criteria, {failed} failed",
        results.len(),
        seen.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
