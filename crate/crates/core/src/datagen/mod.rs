//! Labeled dataset construction from an unlabeled corpus.
//!
//! Incongruent examples keep a target's headline and implant a run of
//! paragraphs from a donor article. Congruent examples are untouched corpus
//! articles whose headlines never appear among the incongruent ones.

mod advert;
mod implant;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::textcorpus::{write_corpus_to, Article, InsertionMode, Label, SentenceSplitter, Token};
use crate::{sha256_hex, Error, Result};

pub use advert::{filter_advert, Blocklist};
pub use implant::{generate_incongruent, implant};
pub use synth::{make_synthetic_corpus, topic_word, HEADLINE_TOKENS, PARAGRAPHS, PARAGRAPH_TOKENS};

/// Which articles may donate paragraphs to a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DonorCategory {
    /// Same category as the target.
    #[default]
    Same,
    Any,
    /// Any category except the target's.
    Different,
}

impl std::str::FromStr for DonorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same" => Ok(DonorCategory::Same),
            "any" => Ok(DonorCategory::Any),
            "different" => Ok(DonorCategory::Different),
            other => Err(Error::Config(format!("donor category must be same, any or different, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub donor_min: usize,
    pub donor_max: usize,
    pub mode: InsertionMode,
    pub donor_category: DonorCategory,
    /// Train, dev and test fractions.
    pub split_fractions: [f64; 3],
    /// Incongruent (and congruent) articles to produce; half the corpus when
    /// unset.
    #[serde(default)]
    pub per_class: Option<usize>,
    #[serde(default)]
    pub advert_blocklist: Option<PathBuf>,
}

impl GenConfig {
    pub fn new(seed: u64) -> Self {
        GenConfig {
            seed,
            donor_min: 1,
            donor_max: 3,
            mode: InsertionMode::Insert,
            donor_category: DonorCategory::Same,
            split_fractions: [0.8, 0.1, 0.1],
            per_class: None,
            advert_blocklist: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.donor_min == 0 || self.donor_min > self.donor_max {
            return Err(Error::Config(format!(
                "need 1 <= donor_min <= donor_max, got {} and {}",
                self.donor_min, self.donor_max
            )));
        }
        let f = self.split_fractions;
        if f.iter().any(|&x| !(x > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must be positive and sum to 1, got {f:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub total: usize,
    pub incongruent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub train: Vec<Article>,
    pub dev: Vec<Article>,
    pub test: Vec<Article>,
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "dev", "test"];

impl LabeledDataset {
    pub fn splits(&self) -> [&[Article]; 3] {
        [&self.train, &self.dev, &self.test]
    }

    pub fn counts(&self) -> BTreeMap<String, SplitCounts> {
        SPLIT_NAMES
            .iter()
            .zip(self.splits())
            .map(|(name, s)| {
                let incongruent = s.iter().filter(|a| a.label == Some(Label::Incongruent)).count();
                (name.to_string(), SplitCounts { total: s.len(), incongruent })
            })
            .collect()
    }

    /// Canonical JSONL bytes of each split.
    pub fn split_bytes(&self) -> [Vec<u8>; 3] {
        self.splits().map(|s| {
            let mut buf = Vec::new();
            write_corpus_to(&mut buf, s).expect("in-memory write");
            buf
        })
    }
}

/// Sidecar describing how a dataset was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: GenConfig,
    pub seed: u64,
    pub counts: BTreeMap<String, SplitCounts>,
    /// SHA-256 of the train, dev and test files concatenated.
    pub content_hash: String,
    pub split_hashes: BTreeMap<String, String>,
}

/// Builds a label-balanced dataset: incongruent articles from shuffled
/// targets, congruent articles from the remaining pool, split per class by
/// the configured fractions.
pub fn build_dataset(corpus: &[Article], config: &GenConfig, blocklist: &Blocklist) -> Result<LabeledDataset> {
    config.validate()?;
    let n = config.per_class.unwrap_or(corpus.len() / 2);
    if n == 0 {
        return Err(Error::Shortfall { needed: 1, available: 0 });
    }
    if n > corpus.len() {
        return Err(Error::Shortfall {
            needed: n,
            available: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng);
    let (targets, pool) = order.split_at(n);

    let eligible_donors: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus[i].paragraphs.len() >= config.donor_min)
        .collect();
    let mut by_category: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &eligible_donors {
        by_category.entry(corpus[i].category.as_str()).or_default().push(i);
    }

    let mut incongruent = Vec::with_capacity(n);
    for &t in targets {
        let target = &corpus[t];
        let same = by_category.get(target.category.as_str()).map(Vec::as_slice).unwrap_or_default();
        let (candidates, excluded) = match config.donor_category {
            DonorCategory::Same => (same, same.contains(&t) as usize),
            DonorCategory::Any => (eligible_donors.as_slice(), eligible_donors.contains(&t) as usize),
            DonorCategory::Different => (eligible_donors.as_slice(), same.len()),
        };
        if candidates.len() == excluded {
            return Err(Error::DonorExhausted(format!(
                "no {:?}-category donor with {} paragraphs for {} (category {:?})",
                config.donor_category, config.donor_min, target.id, target.category
            )));
        }
        // rejection sampling keeps the draw uniform over allowed donors
        let d = loop {
            let d = candidates[rng.random_range(0..candidates.len())];
            let allowed = match config.donor_category {
                DonorCategory::Different => corpus[d].category != target.category,
                _ => d != t,
            };
            if allowed {
                break d;
            }
        };
        incongruent.push(generate_incongruent(
            target,
            &corpus[d],
            &mut rng,
            config.donor_min,
            config.donor_max,
            config.mode,
        )?);
    }

    let taken: HashSet<&[Token]> = incongruent.iter().map(|a| a.headline.as_slice()).collect();
    let eligible: Vec<&Article> = pool
        .iter()
        .map(|&i| &corpus[i])
        .filter(|a| !taken.contains(a.headline.as_slice()) && !filter_advert(a, blocklist))
        .collect();
    if eligible.len() < n {
        return Err(Error::Shortfall {
            needed: n,
            available: eligible.len(),
        });
    }
    let congruent: Vec<Article> = eligible[..n]
        .iter()
        .map(|&a| Article {
            label: Some(Label::Congruent),
            provenance: None,
            ..a.clone()
        })
        .collect();

    let [ft, fd, _] = config.split_fractions;
    let n_train = (n as f64 * ft).round() as usize;
    let n_dev = ((n as f64 * fd).round() as usize).min(n - n_train);
    let bounds = [0, n_train, n_train + n_dev, n];
    let mut splits: [Vec<Article>; 3] = Default::default();
    for (s, split) in splits.iter_mut().enumerate() {
        let range = bounds[s]..bounds[s + 1];
        split.extend(incongruent[range.clone()].iter().cloned());
        split.extend(congruent[range].iter().cloned());
        split.shuffle(&mut rng);
    }
    let [train, dev, test] = splits;
    Ok(LabeledDataset { train, dev, test })
}

/// Writes `train.jsonl`, `dev.jsonl`, `test.jsonl` and `manifest.json` into
/// `dir`.
/// Writes `train.jsonl`, `dev.jsonl`, `test.jsonl` and `manifest.json`.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &LabeledDataset, config: &GenConfig) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let manifest = write_dataset_splits(dir, dataset, config)?;
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Writes the three split files only; the manifest is returned.
pub fn write_dataset_splits(dir: impl AsRef<Path>, dataset: &LabeledDataset, config: &GenConfig) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = dataset.split_bytes();
    let mut split_hashes = BTreeMap::new();
    for (name, b) in SPLIT_NAMES.iter().zip(&bytes) {
        let path = dir.join(format!("{name}.jsonl"));
        std::fs::write(&path, b).map_err(|e| Error::io(&path, e))?;
        split_hashes.insert(name.to_string(), sha256_hex(b));
    }
    let manifest = DatasetManifest {
        config: config.clone(),
        seed: config.seed,
        counts: dataset.counts(),
        content_hash: sha256_hex(bytes.concat()),
        split_hashes,
    };
    Ok(manifest)
}

/// One article per (article, paragraph) pair, in article then paragraph
/// order. With a splitter the paragraph is broken into sentences, which
/// become the new article's paragraphs.
pub fn ip_transform(articles: &[Article], sentences: Option<&SentenceSplitter>) -> Vec<Article> {
    articles
        .iter()
        .flat_map(|a| {
            a.paragraphs.iter().enumerate().map(move |(i, p)| Article {
                id: format!("{}/p{i}", a.id),
                category: a.category.clone(),
                headline: a.headline.clone(),
                paragraphs: match sentences {
                    Some(s) => s.split(p),
                    None => vec![p.clone()],
                },
                label: a.label,
                provenance: None,
            })
        })
        .collect()
}
