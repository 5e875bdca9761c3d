//! Corpus ingestion: tokenization, vocabulary, and the JSON-lines loader.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::{SemanticGraph, SemanticTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    /// Reserved id for tokens missing from a frozen vocabulary. Never a valid
    /// vocabulary index.
    pub const UNKNOWN: TokenId = TokenId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between token strings and dense ids `0..len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    pub fn intern(&mut self, token: &str) -> TokenId {
        if let Some(id) = self.ids.get(token) {
            return *id;
        }
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (TokenId(i as u32), t.as_str()))
    }

    /// Id of the sentence terminator, or `UNKNOWN` when the corpus never used one.
    pub fn period(&self) -> TokenId {
        self.get(".").unwrap_or(TokenId::UNKNOWN)
    }
}

/// Lowercases and splits on whitespace; every non-alphanumeric character
/// becomes a token of its own.
pub fn split_tokens(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in raw.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if ch.is_alphanumeric() {
                current.extend(ch.to_lowercase());
            } else {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                out.push(ch.to_lowercase().collect());
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

/// Tokenizes `raw_text` against `vocab`. With `frozen` set, unseen tokens map
/// to [`TokenId::UNKNOWN`]; otherwise they are appended to the vocabulary.
pub fn tokenize(raw_text: &str, vocab: &mut Vocabulary, frozen: bool) -> Result<Vec<TokenId>> {
    if raw_text.trim().is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(split_tokens(raw_text)
        .iter()
        .map(|t| {
            if frozen {
                vocab.get(t).unwrap_or(TokenId::UNKNOWN)
            } else {
                vocab.intern(t)
            }
        })
        .collect())
}

/// Space-joined surface form. Unknown ids render as `<unk>`.
pub fn detokenize(tokens: &[TokenId], vocab: &Vocabulary) -> String {
    tokens
        .iter()
        .map(|t| vocab.token(*t).unwrap_or("<unk>"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn count_occurrences(tokens: &[TokenId], target: TokenId) -> usize {
    tokens.iter().filter(|t| **t == target).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<TokenId>,
    pub entity_count: usize,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDocument {
    pub document: Document,
    pub graph: SemanticGraph,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub documents: Vec<AnnotatedDocument>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn find(&self, id: &str) -> Option<&AnnotatedDocument> {
        self.documents.iter().find(|d| d.document.id == id)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawTriple {
    pub head: Vec<String>,
    pub relation: Vec<String>,
    pub tail: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub triples: Vec<RawTriple>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = File::open(path.as_ref())?;
    parse_corpus(BufReader::new(file))
}

/// Parses JSON-lines records. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn parse_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        let doc = ingest_record(&record, &mut corpus.vocab, line_no)?;
        corpus.documents.push(doc);
    }
    Ok(corpus)
}

/// Builds a corpus from in-memory records, applying the same checks as the
/// file loader (record index `i` is reported as line `i + 1`).
pub fn from_records(records: &[RawRecord]) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    for (i, record) in records.iter().enumerate() {
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id.clone()));
        }
        let doc = ingest_record(record, &mut corpus.vocab, i + 1)?;
        corpus.documents.push(doc);
    }
    Ok(corpus)
}

pub fn write_jsonl(records: &[RawRecord], mut out: impl std::io::Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn ingest_record(
    record: &RawRecord,
    vocab: &mut Vocabulary,
    line: usize,
) -> Result<AnnotatedDocument> {
    let schema = |message: String| Error::Schema { line, message };
    let tokens = tokenize(&record.text, vocab, false).map_err(|_| schema("empty text".into()))?;
    let present: HashSet<TokenId> = tokens.iter().copied().collect();

    let part = |words: &[String], role: &str, t: usize| -> Result<Vec<TokenId>> {
        let mut ids = Vec::new();
        for w in words {
            for tok in split_tokens(w) {
                let id = vocab
                    .get(&tok)
                    .filter(|id| present.contains(id))
                    .ok_or_else(|| {
                        schema(format!("triple {t} {role} token `{tok}` not in text"))
                    })?;
                ids.push(id);
            }
        }
        Ok(ids)
    };

    let mut triples = Vec::with_capacity(record.triples.len());
    for (t, raw) in record.triples.iter().enumerate() {
        if raw.relation.len() != 2 {
            return Err(schema(format!(
                "triple {t} relation has {} elements, expected 2",
                raw.relation.len()
            )));
        }
        let head = part(&raw.head, "head", t)?;
        let relation = part(&raw.relation, "relation", t)?;
        let tail = part(&raw.tail, "tail", t)?;
        let triple = SemanticTriple::new(head, relation, tail)
            .map_err(|e| schema(format!("triple {t}: {e}")))?;
        triples.push(triple);
    }

    let entities: HashSet<&[TokenId]> = triples
        .iter()
        .flat_map(|t| [t.head.as_slice(), t.tail.as_slice()])
        .collect();
    let entity_count = entities.len();
    Ok(AnnotatedDocument {
        document: Document {
            id: record.id.clone(),
            tokens,
            entity_count,
        },
        graph: SemanticGraph::new(triples),
    })
}
