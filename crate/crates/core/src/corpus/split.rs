use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, ParallelCorpus};

/// Percentages for train/dev/test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios {
    pub train: u32,
    pub dev: u32,
    pub test: u32,
}

impl SplitRatios {
    pub fn new(train: u32, dev: u32, test: u32) -> Result<Self, CorpusError> {
        if train + dev + test != 100 {
            return Err(CorpusError::InvalidRatios(format!("{train}/{dev}/{test}")));
        }
        Ok(SplitRatios { train, dev, test })
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 80,
            dev: 10,
            test: 10,
        }
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.dev, self.test)
    }
}

impl FromStr for SplitRatios {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let nums: Vec<u32> = s
            .split('/')
            .map(|p| p.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| CorpusError::InvalidRatios(s.to_string()))?;
        match nums[..] {
            [a, b, c] => SplitRatios::new(a, b, c),
            _ => Err(CorpusError::InvalidRatios(s.to_string())),
        }
    }
}

/// Seeded shuffle, then contiguous slices. Dev and test sizes are
/// `floor(n * pct / 100)`; train takes the remainder (1521 → 1217/152/152).
pub fn split_corpus(
    c: &ParallelCorpus,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(ParallelCorpus, ParallelCorpus, ParallelCorpus), CorpusError> {
    let n = c.len();
    let n_dev = n * ratios.dev as usize / 100;
    let n_test = n * ratios.test as usize / 100;
    let n_train = n - n_dev - n_test;
    let too_small = (ratios.train > 0 && n_train == 0)
        || (ratios.dev > 0 && n_dev == 0)
        || (ratios.test > 0 && n_test == 0);
    if too_small {
        return Err(CorpusError::SplitTooSmall {
            pairs: n,
            ratios: ratios.to_string(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(n_train);
    let (dev, test) = rest.split_at(n_dev);
    Ok((c.select(train), c.select(dev), c.select(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MelodicSentence, Provenance};
    use std::collections::HashSet;

    fn corpus(n: usize) -> ParallelCorpus {
        ParallelCorpus {
            pairs: (0..n)
                .map(|i| MelodicSentence {
                    syllables: vec![format!("s{i}")],
                    note_tokens: vec!["C-4-quarter".into()],
                })
                .collect(),
            provenance: (0..n)
                .map(|i| Provenance {
                    source: format!("f{}", i / 7),
                    segment: i % 7,
                })
                .collect(),
        }
    }

    #[test]
    fn dataset_sized_split() {
        let (tr, dv, te) = split_corpus(&corpus(1521), SplitRatios::default(), 7).unwrap();
        assert_eq!((tr.len(), dv.len(), te.len()), (1217, 152, 152));
    }

    #[test]
    fn deterministic_for_seed() {
        let c = corpus(10);
        let a = split_corpus(&c, SplitRatios::default(), 42).unwrap();
        let b = split_corpus(&c, SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.0.len(), a.1.len(), a.2.len()), (8, 1, 1));
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            split_corpus(&corpus(2), SplitRatios::default(), 0),
            Err(CorpusError::SplitTooSmall { pairs: 2, .. })
        ));
    }

    #[test]
    fn partitions_by_provenance() {
        let c = corpus(137);
        let (tr, dv, te) = split_corpus(&c, SplitRatios::default(), 3).unwrap();
        let mut seen = HashSet::new();
        for p in tr
            .provenance
            .iter()
            .chain(&dv.provenance)
            .chain(&te.provenance)
        {
            assert!(seen.insert(p.clone()), "duplicate {p:?}");
        }
        let all: HashSet<_> = c.provenance.iter().cloned().collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!(
            "80/10/10".parse::<SplitRatios>().unwrap(),
            SplitRatios::default()
        );
        assert!("80/10".parse::<SplitRatios>().is_err());
        assert!("80/10/20".parse::<SplitRatios>().is_err());
    }
}
