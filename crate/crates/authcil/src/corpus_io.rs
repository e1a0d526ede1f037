//! JSONL corpus reader and writer.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use authcil_core::AuthorCorpus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub author_id: String,
    pub text: String,
}

/// Reads `{"author_id": .., "text": ..}` lines. Blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", n + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

pub fn load_corpus(path: &Path) -> Result<AuthorCorpus> {
    let records = read_records(path)?;
    Ok(AuthorCorpus::from_documents(
        records.into_iter().map(|r| (r.author_id, r.text)),
    )?)
}

pub fn write_records(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::parse(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
