//! Author corpora and their partition into class-incremental sessions.
//!
//! Authors are shuffled once with a seeded generator and consumed front to
//! back, one slice per session ratio. Each selected author's documents are
//! shuffled with the same generator and split train/val/test, and the author
//! receives the next incremental id (iid).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Below this a 60/20/20 split leaves the validation split empty.
pub const MIN_DOCUMENTS_PER_AUTHOR: usize = 5;

/// Slack added before flooring `fraction * count`, so that e.g. `0.29 * 100`
/// floors to 29 rather than 28.
const FLOOR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub author_id: String,
    pub text: String,
    /// Position within the author's document list.
    pub doc_index: usize,
}

/// Documents grouped by author, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorCorpus {
    authors: Vec<(String, Vec<DocumentRecord>)>,
}

impl AuthorCorpus {
    /// Groups `(author_id, text)` pairs, keeping input order as `doc_index`.
    pub fn from_documents<I, A, T>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, T)>,
        A: Into<String>,
        T: Into<String>,
    {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut authors: Vec<(String, Vec<DocumentRecord>)> = Vec::new();
        for (author, text) in docs {
            let author_id: String = author.into();
            let text: String = text.into();
            let slot = match index.get(&author_id) {
                Some(&i) => i,
                None => {
                    index.insert(author_id.clone(), authors.len());
                    authors.push((author_id.clone(), Vec::new()));
                    authors.len() - 1
                }
            };
            let list = &mut authors[slot].1;
            let doc_index = list.len();
            if text.trim().is_empty() {
                return Err(Error::BlankDocument {
                    author_id,
                    doc_index,
                });
            }
            list.push(DocumentRecord {
                author_id,
                text,
                doc_index,
            });
        }
        let corpus = Self { authors };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        if self.authors.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let short: Vec<(String, usize)> = self
            .authors
            .iter()
            .filter(|(_, docs)| docs.len() < MIN_DOCUMENTS_PER_AUTHOR)
            .map(|(a, docs)| (a.clone(), docs.len()))
            .collect();
        if !short.is_empty() {
            return Err(Error::TooFewDocuments {
                authors: short,
                minimum: MIN_DOCUMENTS_PER_AUTHOR,
            });
        }
        Ok(())
    }

    pub fn num_authors(&self) -> usize {
        self.authors.len()
    }

    pub fn num_documents(&self) -> usize {
        self.authors.iter().map(|(_, d)| d.len()).sum()
    }

    pub fn author_ids(&self) -> impl Iterator<Item = &str> {
        self.authors.iter().map(|(a, _)| a.as_str())
    }

    pub fn documents(&self, author_id: &str) -> Option<&[DocumentRecord]> {
        self.authors
            .iter()
            .find(|(a, _)| a == author_id)
            .map(|(_, d)| d.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[DocumentRecord])> {
        self.authors.iter().map(|(a, d)| (a.as_str(), d.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    /// Fraction of all authors placed in each session.
    pub ratios: Vec<f64>,
    pub seed: u64,
    /// (train, val, test).
    pub split_fractions: (f64, f64, f64),
}

impl SessionSpec {
    pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.6, 0.2, 0.2);

    pub fn new(ratios: Vec<f64>, seed: u64) -> Self {
        Self {
            ratios,
            seed,
            split_fractions: Self::DEFAULT_SPLIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::InvalidSessionSpec("no session ratios".into()));
        }
        for (i, &r) in self.ratios.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidSessionSpec(alloc::format!(
                    "ratio {r} of session {i} is outside (0, 1]"
                )));
            }
        }
        let total: f64 = self.ratios.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidSessionSpec(alloc::format!(
                "ratios sum to {total} > 1"
            )));
        }
        let (tr, va, te) = self.split_fractions;
        if [tr, va, te].iter().any(|f| !(0.0..=1.0).contains(f)) || (tr + va + te - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidSessionSpec(alloc::format!(
                "split fractions ({tr}, {va}, {te}) must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }
}

fn floor_count(fraction: f64, n: usize) -> usize {
    libm::floor(fraction * n as f64 + FLOOR_EPS) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One author's documents inside a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorSplit {
    pub iid: usize,
    pub author_id: String,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl AuthorSplit {
    pub fn documents(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn documents_mut(&mut self, split: Split) -> &mut Vec<String> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub index: usize,
    pub authors: Vec<AuthorSplit>,
}

impl Session {
    pub fn num_authors(&self) -> usize {
        self.authors.len()
    }

    pub fn num_documents(&self, split: Split) -> usize {
        self.authors.iter().map(|a| a.documents(split).len()).sum()
    }

    /// Global class range `[first iid, last iid + 1)` of this session.
    pub fn class_range(&self) -> core::ops::Range<usize> {
        match (self.authors.first(), self.authors.last()) {
            (Some(f), Some(l)) => f.iid..l.iid + 1,
            _ => 0..0,
        }
    }
}

/// The materialised session sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CilData {
    pub spec: SessionSpec,
    pub sessions: Vec<Session>,
}

/// A test entry of the cumulative evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CumulativeEntry<'a> {
    /// Session that introduced the author.
    pub session: usize,
    pub iid: usize,
    pub author_id: &'a str,
    pub documents: &'a [String],
}

/// Per-session counts in the layout of a dataset statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: usize,
    pub authors: usize,
    pub train_docs: usize,
    pub val_docs: usize,
    pub test_docs: usize,
    pub cumulative_test_authors: usize,
    pub cumulative_test_docs: usize,
}

impl CilData {
    pub fn num_sessions(&self) -> usize {
        self.sessions.len()
    }

    pub fn num_authors(&self) -> usize {
        self.sessions.iter().map(Session::num_authors).sum()
    }

    pub fn session(&self, t: usize) -> Result<&Session> {
        self.sessions.get(t).ok_or(Error::SessionOutOfRange {
            index: t,
            sessions: self.sessions.len(),
        })
    }

    /// author_id -> iid.
    pub fn iid_map(&self) -> BTreeMap<&str, usize> {
        self.sessions
            .iter()
            .flat_map(|s| s.authors.iter())
            .map(|a| (a.author_id.as_str(), a.iid))
            .collect()
    }

    /// iid -> author_id, indexed by iid.
    pub fn author_table(&self) -> Vec<String> {
        self.sessions
            .iter()
            .flat_map(|s| s.authors.iter())
            .map(|a| a.author_id.clone())
            .collect()
    }

    pub fn summary(&self) -> Vec<SessionSummary> {
        let mut cum_authors = 0;
        let mut cum_docs = 0;
        self.sessions
            .iter()
            .map(|s| {
                cum_authors += s.num_authors();
                cum_docs += s.num_documents(Split::Test);
                SessionSummary {
                    session: s.index,
                    authors: s.num_authors(),
                    train_docs: s.num_documents(Split::Train),
                    val_docs: s.num_documents(Split::Val),
                    test_docs: s.num_documents(Split::Test),
                    cumulative_test_authors: cum_authors,
                    cumulative_test_docs: cum_docs,
                }
            })
            .collect()
    }

    /// Checks session indices, author disjointness, iid numbering and
    /// non-empty test splits.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
        let mut next_iid = 0;
        for (t, session) in self.sessions.iter().enumerate() {
            if session.index != t {
                return Err(Error::InvalidIids(alloc::format!(
                    "session at position {t} is labelled {}",
                    session.index
                )));
            }
            if session.authors.is_empty() {
                return Err(Error::EmptySession {
                    session: t,
                    ratio: self.spec.ratios.get(t).copied().unwrap_or(0.0),
                });
            }
            for author in &session.authors {
                if let Some(prev) = owner.insert(author.author_id.as_str(), t) {
                    return Err(Error::DisjointnessViolated(alloc::format!(
                        "author {} appears in sessions {prev} and {t}",
                        author.author_id
                    )));
                }
                if author.iid != next_iid {
                    return Err(Error::InvalidIids(alloc::format!(
                        "author {} has iid {}, expected {next_iid}",
                        author.author_id,
                        author.iid
                    )));
                }
                if author.test.is_empty() {
                    return Err(Error::EmptyTestSplit {
                        author_id: author.author_id.clone(),
                        documents: author.train.len() + author.val.len(),
                    });
                }
                next_iid += 1;
            }
        }
        Ok(())
    }
}

/// Partitions `corpus` into sessions.
pub fn build_cil_data(corpus: &AuthorCorpus, spec: &SessionSpec) -> Result<CilData> {
    spec.validate()?;
    corpus.validate()?;
    let total = corpus.num_authors();
    let mut rng = SeededRng::new(spec.seed);
    let mut order: Vec<usize> = (0..total).collect();
    rng.shuffle(&mut order);

    let mut remaining = order.as_slice();
    let mut iid = 0;
    let mut sessions = Vec::with_capacity(spec.ratios.len());
    for (t, &ratio) in spec.ratios.iter().enumerate() {
        let count = floor_count(ratio, total);
        if count == 0 || count > remaining.len() {
            return Err(Error::EmptySession { session: t, ratio });
        }
        let (chosen, rest) = remaining.split_at(count);
        remaining = rest;

        let mut authors = Vec::with_capacity(count);
        for &a in chosen {
            let (author_id, records) = &corpus.authors[a];
            let mut texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
            rng.shuffle(&mut texts);
            let n = texts.len();
            let n_train = floor_count(spec.split_fractions.0, n);
            let n_val = floor_count(spec.split_fractions.1, n);
            if n_train + n_val >= n {
                return Err(Error::EmptyTestSplit {
                    author_id: author_id.clone(),
                    documents: n,
                });
            }
            let test = texts.split_off(n_train + n_val);
            let val = texts.split_off(n_train);
            authors.push(AuthorSplit {
                iid,
                author_id: author_id.clone(),
                train: texts,
                val,
                test,
            });
            iid += 1;
        }
        sessions.push(Session { index: t, authors });
    }
    Ok(CilData {
        spec: spec.clone(),
        sessions,
    })
}

/// Test splits of sessions `0..=t`, in session order.
pub fn cumulative_test(cil: &CilData, t: usize) -> Result<Vec<CumulativeEntry<'_>>> {
    cil.session(t)?;
    Ok(cil.sessions[..=t]
        .iter()
        .flat_map(|s| {
            s.authors.iter().map(move |a| CumulativeEntry {
                session: s.index,
                iid: a.iid,
                author_id: a.author_id.as_str(),
                documents: a.test.as_slice(),
            })
        })
        .collect())
}
