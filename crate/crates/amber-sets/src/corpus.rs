//! Document corpus ingestion and the answer-in-prefix test used for
//! gold-document alignment.
//!
//! Corpus lines are JSON objects with `doc_id`, `title`, optional `qid`
//! linking the document to an entity, and the full `text`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// Number of leading whitespace-delimited tokens searched for an answer
/// during gold-document alignment.
pub const PREFIX_TOKEN_LIMIT: usize = 350;

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    /// Corpus-unique document identifier.
    pub doc_id: String,
    /// Document title.
    pub title: String,
    /// Entity the document is about, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qid: Option<String>,
    /// Full document text.
    pub text: String,
}

/// Parse one corpus line. `line_no` is 1-based for error reporting.
pub fn parse_document(line: &str, line_no: usize) -> Result<DocumentRecord> {
    let mut doc: DocumentRecord = serde_json::from_str(line)
        .map_err(|e| Error::parse(line_no, format!("bad document record: {e}")))?;
    if doc.doc_id.is_empty() {
        return Err(Error::parse(line_no, "document record has empty \"doc_id\""));
    }
    if doc.text.is_empty() {
        return Err(Error::parse(
            line_no,
            format!("document {} has empty \"text\"", doc.doc_id),
        ));
    }
    if doc.qid.as_deref() == Some("") {
        doc.qid = None;
    }
    Ok(doc)
}

/// In-memory corpus, with a secondary index from qid to documents about
/// that entity.
#[derive(Debug, Default, Clone)]
pub struct DocumentIndex {
    docs: BTreeMap<String, DocumentRecord>,
    by_qid: BTreeMap<String, BTreeSet<String>>,
}

impl DocumentIndex {
    /// Load a corpus file. Duplicate doc_ids are an error; blank lines are
    /// skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut index = DocumentIndex::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc = parse_document(&line, i + 1).map_err(|e| e.with_path(path))?;
            index.insert(doc).map_err(|e| e.with_path(path))?;
        }
        Ok(index)
    }

    /// Add a document, rejecting duplicate identifiers.
    pub fn insert(&mut self, doc: DocumentRecord) -> Result<()> {
        if self.docs.contains_key(&doc.doc_id) {
            return Err(Error::Validation(format!(
                "duplicate document id {}",
                doc.doc_id
            )));
        }
        if let Some(qid) = &doc.qid {
            self.by_qid
                .entry(qid.clone())
                .or_default()
                .insert(doc.doc_id.clone());
        }
        self.docs.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    /// Fetch a document by id.
    pub fn get(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.docs.get(doc_id)
    }

    /// Documents linked to an entity. Empty when the entity has none.
    pub fn docs_for_entity(&self, qid: &str) -> BTreeSet<String> {
        self.by_qid.get(qid).cloned().unwrap_or_default()
    }

    /// All documents in doc_id order.
    pub fn iter(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.docs.values()
    }

    /// Number of documents.
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    /// True when the corpus is empty.
    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Case-insensitive test for `value` inside the first `limit` whitespace
/// tokens of `text`.
///
/// The prefix tokens are re-joined with single spaces before the substring
/// test, so a value may span token boundaries but only within the prefix.
pub fn value_in_prefix(text: &str, value: &str, limit: usize) -> bool {
    if value.is_empty() {
        return false;
    }
    let prefix = text
        .split_whitespace()
        .take(limit)
        .collect::<Vec<_>>()
        .join(" ");
    prefix.to_lowercase().contains(&value.to_lowercase())
}
