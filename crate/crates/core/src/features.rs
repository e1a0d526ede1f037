//! Deterministic stylometric featurizer.
//!
//! Character n-grams are counted, hashed into a fixed number of buckets with a
//! sign bit taken from the same hash, optionally damped with `1 + ln(c)` and
//! L2-normalised. An optional word channel appends relative frequencies of the
//! most common training words.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the bucket hash, persisted with models and manifests.
pub const HASH_NAME: &str = "fnv1a64-fmix64";
/// Folded into the FNV offset basis.
pub const HASH_SEED: u64 = 0x6175_7468_6369_6c31;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^ (k >> 33)
}

/// Seeded FNV-1a over the bytes followed by the murmur3 finalizer.
pub fn feature_hash(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ HASH_SEED;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    fmix64(h)
}

/// Bucket index and sign (`+1.0` / `-1.0`) of an n-gram.
pub fn bucket_and_sign(ngram: &str, dim: usize) -> (usize, f64) {
    let h = feature_hash(ngram.as_bytes());
    let bucket = (h & (dim as u64 - 1)) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfMode {
    Raw,
    Sublinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    None,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    CharNgramHash,
    WordFreq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    /// Inclusive character n-gram lengths.
    pub ngram_range: (usize, usize),
    /// Hashed width; a power of two in `2^8..=2^20`.
    pub dim: usize,
    pub tf_mode: TfMode,
    pub normalize: Normalize,
    pub channels: Vec<Channel>,
    /// Width of the word-frequency channel.
    pub vocab_size: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            ngram_range: (2, 4),
            dim: 1 << 16,
            tf_mode: TfMode::Sublinear,
            normalize: Normalize::L2,
            channels: vec![Channel::CharNgramHash],
            vocab_size: 100,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ngram_range;
        if !(1 <= lo && lo <= hi && hi <= 8) {
            return Err(Error::InvalidFeaturizerConfig(alloc::format!(
                "ngram range ({lo}, {hi}) must satisfy 1 <= min <= max <= 8"
            )));
        }
        if !self.dim.is_power_of_two() || !(1 << 8..=1 << 20).contains(&self.dim) {
            return Err(Error::InvalidFeaturizerConfig(alloc::format!(
                "dim {} must be a power of two in [2^8, 2^20]",
                self.dim
            )));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidFeaturizerConfig("no channels enabled".into()));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].contains(c) {
                return Err(Error::InvalidFeaturizerConfig(alloc::format!(
                    "channel {c:?} listed twice"
                )));
            }
        }
        if self.channels.contains(&Channel::WordFreq) && self.vocab_size == 0 {
            return Err(Error::InvalidFeaturizerConfig(
                "word_freq channel needs vocab_size >= 1".into(),
            ));
        }
        Ok(())
    }

    fn channel_dim(&self, channel: Channel) -> usize {
        match channel {
            Channel::CharNgramHash => self.dim,
            Channel::WordFreq => self.vocab_size,
        }
    }

    /// Total output width.
    pub fn output_dim(&self) -> usize {
        self.channels.iter().map(|&c| self.channel_dim(c)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// A configured featurizer with its (possibly empty) word vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub config: FeaturizerConfig,
    pub vocabulary: Vec<String>,
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.chars().flat_map(char::to_lowercase).collect())
}

impl Featurizer {
    pub fn new(config: FeaturizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            vocabulary: Vec::new(),
        })
    }

    /// Picks the `vocab_size` most frequent words of `texts` (ties broken
    /// alphabetically). A no-op without the word channel.
    pub fn fit<S: AsRef<str>>(&mut self, texts: &[S]) {
        if !self.config.channels.contains(&Channel::WordFreq) {
            return;
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for t in texts {
            for w in words(t.as_ref()) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        self.vocabulary = ranked
            .into_iter()
            .take(self.config.vocab_size)
            .map(|(w, _)| w)
            .collect();
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        let mut values = Vec::with_capacity(self.output_dim());
        for &channel in &self.config.channels {
            match channel {
                Channel::CharNgramHash => values.extend(self.char_channel(text)),
                Channel::WordFreq => values.extend(self.word_channel(text)),
            }
        }
        if self.config.normalize == Normalize::L2 {
            let norm = libm::sqrt(values.iter().map(|v| v * v).sum());
            if norm > 0.0 {
                for v in &mut values {
                    *v /= norm;
                }
            }
        }
        FeatureVector { values }
    }

    pub fn featurize_batch<S: AsRef<str>>(&self, texts: &[S]) -> Vec<FeatureVector> {
        texts.iter().map(|t| self.featurize(t.as_ref())).collect()
    }

    fn char_channel(&self, text: &str) -> Vec<f64> {
        let dim = self.config.dim;
        let mut out = vec![0.0; dim];
        let mut bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        bounds.push(text.len());
        let n_chars = bounds.len() - 1;
        let (lo, hi) = self.config.ngram_range;
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for n in lo..=hi {
            if n > n_chars {
                break;
            }
            for i in 0..=n_chars - n {
                *counts.entry(&text[bounds[i]..bounds[i + n]]).or_insert(0) += 1;
            }
        }
        for (gram, c) in counts {
            let (bucket, sign) = bucket_and_sign(gram, dim);
            let weight = match self.config.tf_mode {
                TfMode::Raw => f64::from(c),
                TfMode::Sublinear => 1.0 + libm::log(f64::from(c)),
            };
            out[bucket] += sign * weight;
        }
        out
    }

    fn word_channel(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.config.vocab_size];
        let tokens: Vec<String> = words(text).collect();
        if tokens.is_empty() {
            return out;
        }
        let total = tokens.len() as f64;
        for (slot, word) in self.vocabulary.iter().enumerate() {
            let c = tokens.iter().filter(|t| *t == word).count();
            out[slot] = c as f64 / total;
        }
        out
    }
}

/// Featurizes with an unfitted featurizer (empty word vocabulary).
pub fn featurize(text: &str, cfg: &FeaturizerConfig) -> Result<FeatureVector> {
    Ok(Featurizer::new(cfg.clone())?.featurize(text))
}

pub fn featurize_batch<S: AsRef<str>>(texts: &[S], cfg: &FeaturizerConfig) -> Result<Vec<FeatureVector>> {
    Ok(Featurizer::new(cfg.clone())?.featurize_batch(texts))
}
