//! Growing exemplar memory: `k` randomly chosen training documents per author.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SessionData;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarPolicy {
    #[default]
    FixedPerClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorExemplars {
    pub iid: usize,
    pub author_id: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExemplarStore {
    pub policy: ExemplarPolicy,
    pub authors: Vec<AuthorExemplars>,
}

impl ExemplarStore {
    /// Total number of stored documents.
    pub fn len(&self) -> usize {
        self.authors.iter().map(|a| a.texts.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_authors(&self) -> usize {
        self.authors.len()
    }

    pub fn extend(&mut self, added: Vec<AuthorExemplars>) {
        self.authors.extend(added);
    }

    /// `(text, iid)` pairs in author order.
    pub fn items(&self) -> impl Iterator<Item = (&str, usize)> {
        self.authors
            .iter()
            .flat_map(|a| a.texts.iter().map(move |t| (t.as_str(), a.iid)))
    }
}

/// Draws `min(k, n)` of each author's training documents without replacement.
pub fn sample_exemplars(data: &SessionData, k: usize, rng: &mut SeededRng) -> Vec<AuthorExemplars> {
    data.authors
        .iter()
        .map(|a| {
            let picks = rng.sample_indices(a.texts.len(), k);
            AuthorExemplars {
                iid: a.iid,
                author_id: a.author_id.clone(),
                texts: picks.into_iter().map(|i| a.texts[i].clone()).collect(),
            }
        })
        .collect()
}
