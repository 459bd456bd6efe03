use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use melodist_cli::commands;
use melodist_cli::CliError;
use melodist_core::corpus::{SplitRatios, Strategy};
use melodist_core::musicxml::TimeSignature;
use melodist_core::seq2seq::{AttentionKind, LogRecord, ModelConfig};

/// Lyric-to-melody translation pipeline.
///
/// Exit codes: 0 success, 1 internal error, 2 usage, 3 I/O failure,
/// 4 invalid input data, 5 nothing to work on, 6 bad model configuration,
/// 7 training diverged, 8 unreadable checkpoint, 9 alignment shortfall.
#[derive(Parser)]
#[command(name = "melodist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a directory of MusicXML files into a note-stream archive.
    Ingest {
        dir: PathBuf,
        /// Archive to write (JSON lines, one note stream per score).
        #[arg(short, long)]
        out: PathBuf,
        /// Parse report path [default: <out> with extension .report.json].
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Segment an archive into melodic sentences and write train/dev/test splits.
    Corpus {
        archive: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// silence, measures, fixed or fixed=K.
        #[arg(long, default_value = "silence")]
        strategy: Strategy,
        /// Split shuffle seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "80/10/10")]
        ratios: SplitRatios,
    },
    /// Train a model on <corpus>/train and select on <corpus>/dev.
    Train {
        corpus: PathBuf,
        /// Checkpoint to write.
        #[arg(short, long)]
        out: PathBuf,
        /// key=value config file; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training log [default: <out> with extension .log.jsonl].
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
        /// Only print the final summary.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Score a checkpoint on a corpus split with BLEU.
    Evaluate {
        checkpoint: PathBuf,
        corpus: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        max_len: Option<usize>,
        /// Score the unigram-frequency baseline fitted on the train split instead.
        #[arg(long)]
        baseline: bool,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write one MusicXML melody per line of a lyric file.
    Generate {
        checkpoint: PathBuf,
        lyrics: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long, default_value = "4/4")]
        time_signature: TimeSignature,
    },
}

#[derive(Args)]
struct ModelFlags {
    /// Model seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden units per layer [default: 128].
    #[arg(long)]
    units: Option<usize>,
    /// Layers in both encoder and decoder [default: 4].
    #[arg(long)]
    layers: Option<usize>,
    /// standard or none [default: standard].
    #[arg(long)]
    attention: Option<AttentionKind>,
    /// Decode length limit used for dev BLEU [default: 50].
    #[arg(long)]
    max_len: Option<usize>,
    /// Training epochs [default: 10].
    #[arg(long)]
    epochs: Option<usize>,
    /// Sentences per epoch (one SGD step each) [default: 1000].
    #[arg(long)]
    steps: Option<usize>,
}

impl ModelFlags {
    fn apply(&self, c: &mut ModelConfig) {
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.units {
            c.num_units = v;
        }
        if let Some(v) = self.layers {
            c.num_layers = v;
        }
        if let Some(v) = self.attention {
            c.attention = v;
        }
        if let Some(v) = self.max_len {
            c.max_decode_len = v;
        }
        if let Some(v) = self.epochs {
            c.max_epochs = v;
        }
        if let Some(v) = self.steps {
            c.steps_per_epoch = v;
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { dir, out, report } => {
            let s = commands::ingest(&dir, &out, report.as_deref())?;
            for (file, msg) in &s.failures {
                eprintln!("error: {file}: {msg}");
            }
            println!(
                "{} streams written to {} ({} failed, {} elements skipped; report {})",
                s.streams,
                out.display(),
                s.failures.len(),
                s.skipped_elements,
                s.report.display()
            );
        }
        Command::Corpus {
            archive,
            out,
            strategy,
            seed,
            ratios,
        } => {
            let s = commands::corpus(&archive, &out, strategy, seed, ratios)?;
            print!("{}", s.stats);
            println!("split train/dev/test: {}/{}/{}", s.train, s.dev, s.test);
        }
        Command::Train {
            corpus,
            out,
            config,
            log,
            model,
            quiet,
        } => {
            let mut cfg = match &config {
                Some(p) => commands::load_config(p, ModelConfig::default())?,
                None => ModelConfig::default(),
            };
            model.apply(&mut cfg);
            let s = commands::train(&corpus, &out, log.as_deref(), cfg, &mut |r| {
                if let (
                    false,
                    LogRecord::Epoch {
                        epoch,
                        mean_loss,
                        dev_bleu,
                        lr,
                    },
                ) = (quiet, r)
                {
                    eprintln!(
                        "epoch {epoch}: mean loss {mean_loss:.4}, dev BLEU {:.2}, lr {lr}",
                        dev_bleu * 100.0
                    );
                }
            })?;
            println!(
                "best epoch {} (dev BLEU {:.2}); checkpoint {}, log {}",
                s.best_epoch,
                s.best_dev_bleu * 100.0,
                out.display(),
                s.log.display()
            );
        }
        Command::Evaluate {
            checkpoint,
            corpus,
            split,
            max_len,
            baseline,
            json,
        } => {
            let r = commands::evaluate(&checkpoint, &corpus, &split, max_len, baseline)?;
            if json {
                println!("{}", serde_json::to_string(&r).expect("report serializes"));
            } else {
                println!("{r}");
            }
        }
        Command::Generate {
            checkpoint,
            lyrics,
            out,
            max_len,
            time_signature,
        } => {
            for g in commands::generate(&checkpoint, &lyrics, &out, max_len, time_signature)? {
                if g.dropped > 0 {
                    eprintln!("line {}: dropped {} non-note tokens", g.line, g.dropped);
                }
                println!("{} ({} notes)", g.path.display(), g.notes);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
