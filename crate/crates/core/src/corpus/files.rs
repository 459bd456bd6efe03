//! On-disk corpus layout: `<split>.syl` and `<split>.not` hold one sentence
//! per line with space-separated tokens, `<split>.src` holds the provenance
//! of each line, and `corpus.meta` records how the corpus was made.

use std::fs;
use std::path::{Path, PathBuf};

use super::{
    parse_note_token, CorpusError, MelodicSentence, ParallelCorpus, Provenance, SplitRatios,
    Strategy, TOKEN_GRAMMAR_VERSION,
};

pub const CORPUS_HEADER: &str = "#melody-corpus v1";
pub const META_FILE: &str = "corpus.meta";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusMeta {
    pub strategy: Strategy,
    pub grammar: u32,
    pub seed: u64,
    pub ratios: SplitRatios,
}

fn io_err(path: &Path, e: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write(path: PathBuf, body: String) -> Result<(), CorpusError> {
    fs::write(&path, body).map_err(|e| io_err(&path, e))
}

pub fn write_split(dir: &Path, name: &str, c: &ParallelCorpus) -> Result<(), CorpusError> {
    let mut syl = String::new();
    let mut not = String::new();
    let mut src = String::new();
    for (p, prov) in c.pairs.iter().zip(&c.provenance) {
        syl.push_str(&p.syllables.join(" "));
        syl.push('\n');
        not.push_str(&p.note_tokens.join(" "));
        not.push('\n');
        src.push_str(&format!("{}\t{}\n", prov.source, prov.segment));
    }
    write(dir.join(format!("{name}.syl")), syl)?;
    write(dir.join(format!("{name}.not")), not)?;
    write(dir.join(format!("{name}.src")), src)
}

fn read_lines(path: &Path) -> Result<Vec<Vec<String>>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if toks.is_empty() {
                return Err(CorpusError::BadCorpusFile {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "empty sentence".into(),
                });
            }
            Ok(toks)
        })
        .collect()
}

/// Read `<split>.syl` and `<split>.not` (both required) plus optional `<split>.src`.
pub fn read_split(dir: &Path, name: &str) -> Result<ParallelCorpus, CorpusError> {
    let syl_path = dir.join(format!("{name}.syl"));
    let not_path = dir.join(format!("{name}.not"));
    for (p, partner) in [(&syl_path, &not_path), (&not_path, &syl_path)] {
        if !p.exists() {
            return Err(if partner.exists() {
                CorpusError::MissingPartner(p.clone())
            } else {
                CorpusError::Io {
                    path: p.clone(),
                    message: "no such file".into(),
                }
            });
        }
    }
    let syl = read_lines(&syl_path)?;
    let not = read_lines(&not_path)?;
    if syl.len() != not.len() {
        return Err(CorpusError::BadCorpusFile {
            path: not_path,
            line: syl.len().min(not.len()) + 1,
            message: format!("{} syllable lines but {} note lines", syl.len(), not.len()),
        });
    }
    for (i, line) in not.iter().enumerate() {
        for tok in line {
            parse_note_token(tok).map_err(|e| CorpusError::BadCorpusFile {
                path: not_path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
    }

    let src_path = dir.join(format!("{name}.src"));
    let provenance = if src_path.exists() {
        let text = fs::read_to_string(&src_path).map_err(|e| io_err(&src_path, e))?;
        let provs: Vec<Provenance> = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let bad = || CorpusError::BadCorpusFile {
                    path: src_path.clone(),
                    line: i + 1,
                    message: "expected <source>\\t<segment>".into(),
                };
                let (s, seg) = l.rsplit_once('\t').ok_or_else(bad)?;
                Ok(Provenance {
                    source: s.to_string(),
                    segment: seg.parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<_, CorpusError>>()?;
        if provs.len() != syl.len() {
            return Err(CorpusError::BadCorpusFile {
                path: src_path,
                line: provs.len() + 1,
                message: "provenance line count differs from corpus".into(),
            });
        }
        provs
    } else {
        (0..syl.len())
            .map(|i| Provenance {
                source: name.to_string(),
                segment: i,
            })
            .collect()
    };

    Ok(ParallelCorpus {
        pairs: syl
            .into_iter()
            .zip(not)
            .map(|(syllables, note_tokens)| MelodicSentence {
                syllables,
                note_tokens,
            })
            .collect(),
        provenance,
    })
}

pub fn write_meta(dir: &Path, meta: &CorpusMeta) -> Result<(), CorpusError> {
    let body = format!(
        "{CORPUS_HEADER} strategy={}\ngrammar={}\nseed={}\nratios={}\n",
        meta.strategy, meta.grammar, meta.seed, meta.ratios
    );
    write(dir.join(META_FILE), body)
}

pub fn read_meta(dir: &Path) -> Result<CorpusMeta, CorpusError> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let bad = |line: usize, message: String| CorpusError::BadCorpusFile {
        path: path.clone(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let strategy = header
        .strip_prefix(CORPUS_HEADER)
        .and_then(|rest| rest.trim().strip_prefix("strategy="))
        .ok_or_else(|| bad(1, format!("expected header `{CORPUS_HEADER} strategy=<s>`")))?
        .parse::<Strategy>()
        .map_err(|e| bad(1, e.to_string()))?;

    let mut meta = CorpusMeta {
        strategy,
        grammar: TOKEN_GRAMMAR_VERSION,
        seed: 0,
        ratios: SplitRatios::default(),
    };
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(lineno, "expected key=value".into()))?;
        match k.trim() {
            "grammar" => {
                meta.grammar = v
                    .trim()
                    .parse()
                    .map_err(|_| bad(lineno, "bad grammar".into()))?;
                if meta.grammar != TOKEN_GRAMMAR_VERSION {
                    return Err(bad(
                        lineno,
                        format!("unsupported token grammar v{}", meta.grammar),
                    ));
                }
            }
            "seed" => {
                meta.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| bad(lineno, "bad seed".into()))?
            }
            "ratios" => {
                meta.ratios = v
                    .trim()
                    .parse()
                    .map_err(|e: CorpusError| bad(lineno, e.to_string()))?
            }
            other => return Err(bad(lineno, format!("unknown key {other:?}"))),
        }
    }
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParallelCorpus {
        ParallelCorpus {
            pairs: vec![
                MelodicSentence {
                    syllables: "go le san gam".split(' ').map(String::from).collect(),
                    note_tokens: "G-4-eighth A-4-eighth B-4-quarter A-4-half"
                        .split(' ')
                        .map(String::from)
                        .collect(),
                },
                MelodicSentence {
                    syllables: vec!["tAb".into()],
                    note_tokens: vec!["Bb-3-quarter.".into()],
                },
            ],
            provenance: vec![
                Provenance {
                    source: "a.musicxml".into(),
                    segment: 0,
                },
                Provenance {
                    source: "a.musicxml".into(),
                    segment: 1,
                },
            ],
        }
    }

    #[test]
    fn split_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", &sample()).unwrap();
        let text = fs::read_to_string(dir.path().join("train.syl")).unwrap();
        assert_eq!(text, "go le san gam\ntAb\n");
        assert_eq!(read_split(dir.path(), "train").unwrap(), sample());
    }

    #[test]
    fn missing_partner() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "dev", &sample()).unwrap();
        fs::remove_file(dir.path().join("dev.not")).unwrap();
        assert!(matches!(
            read_split(dir.path(), "dev"),
            Err(CorpusError::MissingPartner(p)) if p.ends_with("dev.not")
        ));
    }

    #[test]
    fn misaligned_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.syl"), "a b\nc\n").unwrap();
        fs::write(dir.path().join("x.not"), "C-4-half\n").unwrap();
        assert!(matches!(
            read_split(dir.path(), "x"),
            Err(CorpusError::BadCorpusFile { .. })
        ));
        fs::write(dir.path().join("x.syl"), "a\n").unwrap();
        fs::write(dir.path().join("x.not"), "C-4-rest\n").unwrap();
        assert!(read_split(dir.path(), "x").is_err());
    }

    #[test]
    fn meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let meta = CorpusMeta {
            strategy: "fixed=5".parse().unwrap(),
            grammar: TOKEN_GRAMMAR_VERSION,
            seed: 99,
            ratios: SplitRatios::default(),
        };
        write_meta(dir.path(), &meta).unwrap();
        let text = fs::read_to_string(dir.path().join(META_FILE)).unwrap();
        assert!(text.starts_with("#melody-corpus v1 strategy=fixed=5\n"));
        assert_eq!(read_meta(dir.path()).unwrap(), meta);
    }
}
