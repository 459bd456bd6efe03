use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ModelConfig;
use super::model::Seq2Seq;
use super::network::Dropout;
use super::Seq2SeqError;
use crate::bleu::corpus_bleu;
use crate::corpus::{ParallelCorpus, Vocabulary};
use crate::tensor::TensorError;

const ORDER_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        optimizer: &'static str,
        init: &'static str,
        batch_size: usize,
        dropout: &'static str,
        /// What the SGD step differentiates; `loss` in step records is always
        /// the per-token mean.
        objective: &'static str,
        loss: &'static str,
        config: ModelConfig,
        train_pairs: usize,
        dev_pairs: usize,
        parameters: usize,
    },
    Step {
        epoch: usize,
        step: usize,
        loss: f64,
        grad_norm: f64,
        lr: f64,
    },
    Epoch {
        epoch: usize,
        mean_loss: f64,
        dev_bleu: f64,
        lr: f64,
    },
    Best {
        epoch: usize,
        dev_bleu: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    /// Parameters from the epoch with the highest dev BLEU.
    pub model: Seq2Seq,
    pub log: TrainingLog,
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
}

/// Source and target vocabularies of a training split.
pub fn build_vocabularies(train: &ParallelCorpus) -> (Vocabulary, Vocabulary) {
    (
        Vocabulary::build(&train.sources()),
        Vocabulary::build(&train.targets()),
    )
}

pub fn train(
    train: &ParallelCorpus,
    dev: &ParallelCorpus,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    config: ModelConfig,
) -> Result<Trained, Seq2SeqError> {
    train_observed(train, dev, src_vocab, tgt_vocab, config, &mut |_| {})
}

/// As [`train`], calling `observer` with each log record as it is produced.
pub fn train_observed(
    train: &ParallelCorpus,
    dev: &ParallelCorpus,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    config: ModelConfig,
    observer: &mut dyn FnMut(&LogRecord),
) -> Result<Trained, Seq2SeqError> {
    if train.is_empty() || dev.is_empty() {
        return Err(Seq2SeqError::EmptyCorpus);
    }
    let mut model = Seq2Seq::new(config, src_vocab, tgt_vocab)?;
    let cfg = model.config.clone();
    let data: Vec<(Vec<usize>, Vec<usize>)> = train
        .pairs
        .iter()
        .map(|p| {
            (
                model.src_vocab.encode(&p.syllables),
                model.tgt_vocab.encode(&p.note_tokens),
            )
        })
        .collect();
    if data.iter().any(|(s, _)| s.is_empty()) {
        return Err(Seq2SeqError::EmptySequence);
    }

    let mut log = TrainingLog::default();
    let mut emit = |r: LogRecord, log: &mut TrainingLog| {
        observer(&r);
        log.records.push(r);
    };
    emit(
        LogRecord::Header {
            optimizer: "sgd",
            init: "uniform(-0.1,0.1)",
            batch_size: 1,
            dropout: "lstm_inputs",
            objective: "sentence_summed_token_cross_entropy",
            loss: "mean_token_cross_entropy",
            config: cfg.clone(),
            train_pairs: train.len(),
            dev_pairs: dev.len(),
            parameters: model.params.parameter_count(),
        },
        &mut log,
    );

    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(ORDER_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let mut dropout = Dropout {
        keep: cfg.keep_prob,
        rng: dropout_rng,
    };

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut order_rng);
    let mut pos = 0;
    let mut step = 0;
    let mut best: Option<(usize, f64, super::ModelParams)> = None;

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.learning_rate_at(epoch);
        let mut loss_sum = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            if pos == order.len() {
                order.shuffle(&mut order_rng);
                pos = 0;
            }
            let (src, tgt) = &data[order[pos]];
            pos += 1;
            step += 1;
            let diverged = |loss: f64| Seq2SeqError::DivergedLoss { step, loss };
            let (loss, mut grads) = match model.loss_and_grads(src, tgt, Some(&mut dropout)) {
                Ok(v) => v,
                Err(Seq2SeqError::Tensor(
                    TensorError::NonFiniteValue { .. } | TensorError::NonFiniteGradient,
                )) => return Err(diverged(f64::NAN)),
                Err(e) => return Err(e),
            };
            // Step on the sentence's summed token loss; the mean is what gets logged.
            let tokens = (tgt.len() + 1) as f64;
            for g in grads.tensors_mut() {
                g.data_mut().iter_mut().for_each(|v| *v *= tokens);
            }
            let norm = grads
                .tensors()
                .iter()
                .map(|t| t.sum_squares())
                .sum::<f64>()
                .sqrt();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(diverged(loss));
            }
            let scale = if norm > cfg.clip_norm {
                cfg.clip_norm / norm
            } else {
                1.0
            };
            if lr > 0.0 {
                let rate = lr * scale;
                for (p, g) in model
                    .params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors_mut())
                {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= rate * gv;
                    }
                }
            }
            loss_sum += loss;
            emit(
                LogRecord::Step {
                    epoch,
                    step,
                    loss,
                    grad_norm: norm,
                    lr,
                },
                &mut log,
            );
        }

        let dev_bleu = dev_score(&model, dev)?;
        emit(
            LogRecord::Epoch {
                epoch,
                mean_loss: loss_sum / cfg.steps_per_epoch as f64,
                dev_bleu,
                lr,
            },
            &mut log,
        );
        if best.as_ref().is_none_or(|(_, b, _)| dev_bleu > *b) {
            best = Some((epoch, dev_bleu, model.params.clone()));
        }
    }

    let (best_epoch, best_dev_bleu, params) = best.expect("at least one epoch");
    emit(
        LogRecord::Best {
            epoch: best_epoch,
            dev_bleu: best_dev_bleu,
        },
        &mut log,
    );
    model.params = params;
    Ok(Trained {
        model,
        log,
        best_epoch,
        best_dev_bleu,
    })
}

fn dev_score(model: &Seq2Seq, dev: &ParallelCorpus) -> Result<f64, Seq2SeqError> {
    let hyps = model.decode_corpus(dev, model.config.max_decode_len)?;
    let refs = dev.targets();
    corpus_bleu(&hyps, &refs, 4)
        .map(|r| r.bleu)
        .map_err(|_| Seq2SeqError::EmptyCorpus)
}
