//! Document records and JSON-lines ingestion into record containers.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::store::{self, atomic_write, RecordContainer};

/// One publication's metadata.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub r#abstract: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default)]
    pub codes: Vec<String>,
    /// Publication year, used by citation scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u32>,
}

impl DocumentRecord {
    pub fn new(doc_id: impl Into<String>) -> Self {
        DocumentRecord {
            doc_id: doc_id.into(),
            ..Default::default()
        }
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        json::to_canonical_string(self)
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<DocumentRecord> {
    let doc: DocumentRecord = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
        line: lineno,
        reason: e.to_string(),
    })?;
    if doc.doc_id.is_empty() {
        return Err(Error::MalformedLine {
            line: lineno,
            reason: "empty doc_id".into(),
        });
    }
    Ok(doc)
}

/// Parse a JSON-lines file of document records. Blank lines are skipped;
/// line numbers in errors are 1-based.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<DocumentRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_line(&line, i + 1)?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocId(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Write documents to a container keyed by doc_id, sorted by key.
pub fn write_documents(docs: &[DocumentRecord], path: impl AsRef<Path>) -> Result<RecordContainer> {
    let mut records = docs
        .iter()
        .map(|d| Ok((d.doc_id.as_bytes().to_vec(), json::to_canonical_vec(d)?)))
        .collect::<Result<Vec<_>>>()?;
    records.sort();
    if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDocId(String::from_utf8_lossy(&w[0].0).into_owned()));
    }
    store::write_container(records, path)
}

/// Load every document from a corpus container.
pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<DocumentRecord>> {
    RecordContainer::open(path)?
        .records()?
        .map(|r| r.and_then(|(_, v)| json::from_slice(&v)))
        .collect()
}

/// JSON-lines file → corpus container keyed by doc_id.
pub fn import_corpus(json_path: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<RecordContainer> {
    let docs = read_jsonl(json_path)?;
    write_documents(&docs, output)
}

/// Corpus container → JSON-lines, one canonical record per line, sorted by
/// key. Returns the number of lines written.
pub fn export_corpus(container: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<usize> {
    let mut records = store::read_container(container)?;
    records.sort_by(|a, b| a.0.cmp(&b.0));
    let mut lines = Vec::with_capacity(records.len());
    for (_, v) in &records {
        let doc: DocumentRecord = json::from_slice(v)?;
        lines.push(doc.to_canonical_json()?);
    }
    atomic_write(json_path.as_ref(), |w| {
        for l in &lines {
            w.write_all(l.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    Ok(lines.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_import() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("in.jsonl");
        std::fs::write(
            &src,
            "{\"doc_id\":\"b\",\"title\":\"Second\"}\n\n{\"doc_id\":\"a\",\"title\":\"First\"}\n",
        )
        .unwrap();
        let c = import_corpus(&src, dir.path().join("corpus")).unwrap();
        let recs = c.read_all().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].0, b"a");
    }

    #[test]
    fn duplicate_id_named() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("in.jsonl");
        std::fs::write(&src, "{\"doc_id\":\"x\"}\n{\"doc_id\":\"x\"}\n").unwrap();
        match import_corpus(&src, dir.path().join("c")) {
            Err(Error::DuplicateDocId(id)) => assert_eq!(id, "x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_numbered() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("in.jsonl");
        std::fs::write(&src, "{\"doc_id\":\"x\"}\n{oops\n").unwrap();
        match import_corpus(&src, dir.path().join("c")) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn export_empty_and_single() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c");
        write_documents(&[], &c).unwrap();
        let out = dir.path().join("out.jsonl");
        assert_eq!(export_corpus(&c, &out).unwrap(), 0);
        assert_eq!(std::fs::read(&out).unwrap(), b"");

        let mut d = DocumentRecord::new("only");
        d.year = Some(2013);
        write_documents(&[d.clone()], &c).unwrap();
        assert_eq!(export_corpus(&c, &out).unwrap(), 1);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("{\"abstract\":\"\",\"authors\":[]"));
        let back: DocumentRecord = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, d);
    }
}
