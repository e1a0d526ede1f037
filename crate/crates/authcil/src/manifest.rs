//! Session manifest: one JSON document holding every split of every session.

use std::fs;
use std::path::Path;

use authcil_core::rng::PRNG_NAME;
use authcil_core::{AuthorSplit, CilData, Session, SessionSpec, Split};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub iid: usize,
    pub author_id: String,
    pub split: Split,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSession {
    pub session_index: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub ratios: Vec<f64>,
    pub split_fractions: (f64, f64, f64),
    pub prng: String,
    pub config_hash: String,
    pub sessions: Vec<ManifestSession>,
    /// SHA-256 over all texts in file order, each followed by a NUL byte.
    pub sha256: String,
}

const SPLITS: [Split; 3] = [Split::Train, Split::Val, Split::Test];

fn checksum(sessions: &[ManifestSession]) -> String {
    let mut h = Sha256::new();
    for s in sessions {
        for e in &s.entries {
            for t in &e.texts {
                h.update(t.as_bytes());
                h.update([0u8]);
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn from_cil(cil: &CilData, config_hash: &str) -> Self {
        let sessions: Vec<ManifestSession> = cil
            .sessions
            .iter()
            .map(|s| ManifestSession {
                session_index: s.index,
                entries: s
                    .authors
                    .iter()
                    .flat_map(|a| {
                        SPLITS.iter().map(move |&split| ManifestEntry {
                            iid: a.iid,
                            author_id: a.author_id.clone(),
                            split,
                            texts: a.documents(split).to_vec(),
                        })
                    })
                    .collect(),
            })
            .collect();
        Self {
            version: MANIFEST_VERSION,
            seed: cil.spec.seed,
            ratios: cil.spec.ratios.clone(),
            split_fractions: cil.spec.split_fractions,
            prng: PRNG_NAME.to_string(),
            config_hash: config_hash.to_string(),
            sha256: checksum(&sessions),
            sessions,
        }
    }

    /// Rebuilds and validates the session data.
    pub fn to_cil(&self) -> Result<CilData> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Version {
                what: "manifest",
                found: self.version,
                expected: MANIFEST_VERSION,
            });
        }
        if self.prng != PRNG_NAME {
            return Err(Error::Data(format!(
                "manifest built with prng {:?}, this build uses {PRNG_NAME:?}",
                self.prng
            )));
        }
        let found = checksum(&self.sessions);
        if found != self.sha256 {
            return Err(Error::Checksum {
                expected: self.sha256.clone(),
                found,
            });
        }
        let mut sessions = Vec::with_capacity(self.sessions.len());
        for s in &self.sessions {
            let mut authors: Vec<AuthorSplit> = Vec::new();
            for e in &s.entries {
                let same = authors
                    .last()
                    .is_some_and(|a| a.iid == e.iid && a.author_id == e.author_id);
                if !same {
                    authors.push(AuthorSplit {
                        iid: e.iid,
                        author_id: e.author_id.clone(),
                        train: Vec::new(),
                        val: Vec::new(),
                        test: Vec::new(),
                    });
                }
                let author = authors.last_mut().expect("pushed above");
                let slot = author.documents_mut(e.split);
                if !slot.is_empty() {
                    return Err(Error::Data(format!(
                        "author {} has two {} entries in session {}",
                        e.author_id,
                        e.split.as_str(),
                        s.session_index
                    )));
                }
                slot.extend(e.texts.iter().cloned());
            }
            sessions.push(Session {
                index: s.session_index,
                authors,
            });
        }
        let cil = CilData {
            spec: SessionSpec {
                ratios: self.ratios.clone(),
                seed: self.seed,
                split_fractions: self.split_fractions,
            },
            sessions,
        };
        cil.validate()?;
        Ok(cil)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn save_manifest(cil: &CilData, config_hash: &str, path: &Path) -> Result<Manifest> {
    let m = Manifest::from_cil(cil, config_hash);
    fs::write(path, m.to_json()).map_err(|e| Error::io(path, e))?;
    Ok(m)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn load_manifest(path: &Path) -> Result<(CilData, Manifest)> {
    let m = read_manifest(path)?;
    Ok((m.to_cil()?, m))
}

/// Per-session author and document counts with cumulative test totals.
pub fn summary_table(cil: &CilData) -> String {
    let mut out = String::new();
    out.push_str("session  authors  train   val  test  | cumulative test authors  docs\n");
    for s in cil.summary() {
        out.push_str(&format!(
            "s{:<7} {:>7} {:>6} {:>5} {:>5}  | {:>23} {:>5}\n",
            s.session,
            s.authors,
            s.train_docs,
            s.val_docs,
            s.test_docs,
            s.cumulative_test_authors,
            s.cumulative_test_docs
        ));
    }
    out
}
