//! Separable synthetic corpus: every author writes from a private word list,
//! a fraction of which is drawn from a pool shared by all authors.

use std::collections::BTreeSet;

use authcil_core::{AuthorCorpus, SeededRng};
use serde::{Deserialize, Serialize};

use crate::corpus_io::CorpusRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub authors: usize,
    pub docs_per_author: usize,
    /// Distinct words per author.
    pub vocab_size: usize,
    /// Fraction of each author's words taken from the shared pool.
    pub overlap: f64,
    pub words_per_doc: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            authors: 20,
            docs_per_author: 40,
            vocab_size: 30,
            overlap: 0.1,
            words_per_doc: 40,
            seed: 0,
        }
    }
}

fn random_word(rng: &mut SeededRng) -> String {
    let len = 4 + rng.below(4) as usize;
    (0..len)
        .map(|_| (b'a' + rng.below(26) as u8) as char)
        .collect()
}

/// Draws `n` words not yet in `taken`.
fn fresh_words(rng: &mut SeededRng, n: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = random_word(rng);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.authors == 0 || self.docs_per_author == 0 || self.vocab_size == 0 || self.words_per_doc == 0 {
            return Err(Error::Usage("synthetic corpus sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Usage(format!("overlap {} outside [0, 1]", self.overlap)));
        }
        Ok(())
    }

    pub fn shared_words(&self) -> usize {
        (self.overlap * self.vocab_size as f64).round() as usize
    }

    pub fn generate(&self) -> Result<Vec<CorpusRecord>> {
        self.validate()?;
        let mut rng = SeededRng::new(self.seed);
        let mut taken = BTreeSet::new();
        let pool = fresh_words(&mut rng, self.vocab_size, &mut taken);
        let shared = self.shared_words();
        let mut records = Vec::with_capacity(self.authors * self.docs_per_author);
        for a in 0..self.authors {
            let mut vocab = fresh_words(&mut rng, self.vocab_size - shared, &mut taken);
            for i in rng.sample_indices(pool.len(), shared) {
                vocab.push(pool[i].clone());
            }
            let author_id = format!("author_{a:03}");
            for _ in 0..self.docs_per_author {
                let words: Vec<&str> = (0..self.words_per_doc)
                    .map(|_| vocab[rng.below(vocab.len() as u64) as usize].as_str())
                    .collect();
                records.push(CorpusRecord {
                    author_id: author_id.clone(),
                    text: words.join(" "),
                });
            }
        }
        Ok(records)
    }

    pub fn corpus(&self) -> Result<AuthorCorpus> {
        let records = self.generate()?;
        Ok(AuthorCorpus::from_documents(
            records.into_iter().map(|r| (r.author_id, r.text)),
        )?)
    }
}
