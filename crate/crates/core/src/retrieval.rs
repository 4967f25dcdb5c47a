//! Relevant-sentence retrieval: BM25 ranking of body sentences against the
//! table's word sequence, and table-indicator matching against the caption.
//!
//! Scores follow the Okapi BM25 form with a non-negative IDF:
//!
//! ```text
//! score(q, s) = Σ_{t ∈ q} IDF(t) · tf(t, s)·(k1 + 1) / (tf(t, s) + k1·(1 − b + b·|s| / avglen))
//! IDF(t)      = ln((N − df(t) + 0.5) / (df(t) + 0.5) + 1)
//! ```
//!
//! The sum runs over query token occurrences, so a word repeated in the
//! table counts once per repetition.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docbank::PageRecord;
use crate::table::{linearize, LinearizationVariant, Table};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("no sentences")]
    NoSentences,
    #[error("unknown sentence id {id} (index holds {len})")]
    UnknownSentence { id: usize, len: usize },
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("top-n retrieval needs n >= 1")]
    ZeroN,
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k1.is_finite() && self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b) {
            Ok(())
        } else {
            Err(RetrievalError::InvalidParams { k1: self.k1, b: self.b })
        }
    }
}

/// Term statistics over one page's body sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceIndex {
    sentences: Vec<String>,
    term_freqs: Vec<HashMap<String, u32>>,
    lengths: Vec<usize>,
    doc_freqs: HashMap<String, u32>,
    postings: HashMap<String, Vec<usize>>,
    avg_len: f64,
}

impl SentenceIndex {
    pub fn build<S: AsRef<str>>(sentences: &[S]) -> Result<Self, RetrievalError> {
        if sentences.is_empty() {
            return Err(RetrievalError::NoSentences);
        }
        let mut term_freqs = Vec::with_capacity(sentences.len());
        let mut lengths = Vec::with_capacity(sentences.len());
        let mut doc_freqs: HashMap<String, u32> = HashMap::new();
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (id, sentence) in sentences.iter().enumerate() {
            let tokens = tokenize(sentence.as_ref());
            lengths.push(tokens.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for token in tokens {
                *tf.entry(token).or_default() += 1;
            }
            for term in tf.keys() {
                *doc_freqs.entry(term.clone()).or_default() += 1;
                postings.entry(term.clone()).or_default().push(id);
            }
            term_freqs.push(tf);
        }
        let avg_len = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
        Ok(Self {
            sentences: sentences.iter().map(|s| s.as_ref().to_string()).collect(),
            term_freqs,
            lengths,
            doc_freqs,
            postings,
            avg_len,
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence(&self, id: usize) -> Option<&str> {
        self.sentences.get(id).map(String::as_str)
    }

    pub fn sentence_len(&self, id: usize) -> Option<usize> {
        self.lengths.get(id).copied()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.doc_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn term_freq(&self, id: usize, term: &str) -> u32 {
        self.term_freqs.get(id).and_then(|tf| tf.get(term)).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = f64::from(self.doc_freq(term));
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }
}

pub fn build_index<S: AsRef<str>>(sentences: &[S]) -> Result<SentenceIndex, RetrievalError> {
    SentenceIndex::build(sentences)
}

/// BM25 relevance of sentence `id` to `query` (already tokenized).
pub fn bm25_score<S: AsRef<str>>(
    query: &[S],
    id: usize,
    index: &SentenceIndex,
    params: &Bm25Params,
) -> Result<f64, RetrievalError> {
    let len = index.sentence_len(id).ok_or(RetrievalError::UnknownSentence { id, len: index.len() })?;
    let norm = if index.avg_len > 0.0 { len as f64 / index.avg_len } else { 1.0 };
    let mut parts: Vec<f64> = query
        .iter()
        .filter_map(|term| {
            let term = term.as_ref();
            let tf = f64::from(index.term_freq(id, term));
            (tf > 0.0).then(|| {
                index.idf(term) * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
            })
        })
        .collect();
    // summing in sorted order makes equal sets of contributions tie exactly
    parts.sort_by(f64::total_cmp);
    Ok(parts.iter().sum())
}

/// A retrieved sentence with its position in the page and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub id: usize,
    pub score: f64,
    pub sentence: String,
}

/// The `n` best-scoring sentences, highest first; equal scores keep document
/// order and zero-score sentences are never returned.
pub fn top_n<S: AsRef<str>>(
    query: &[S],
    n: usize,
    index: &SentenceIndex,
    params: &Bm25Params,
) -> Result<Vec<Ranked>, RetrievalError> {
    if n == 0 {
        return Err(RetrievalError::ZeroN);
    }
    let mut candidates: Vec<usize> = query
        .iter()
        .filter_map(|t| index.postings.get(t.as_ref()))
        .flatten()
        .copied()
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut ranked = Vec::with_capacity(candidates.len());
    for id in candidates {
        let score = bm25_score(query, id, index, params)?;
        if score > 0.0 {
            ranked.push((id, score));
        }
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    Ok(ranked
        .into_iter()
        .map(|(id, score)| Ranked { id, score, sentence: index.sentences[id].clone() })
        .collect())
}

static INDICATOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*Table\s+(\d+|[IVXLCDM]+)").expect("indicator pattern"));

/// The "Table N" / "Table IV" indicator at the start of a caption, without
/// its trailing punctuation.
pub fn table_indicator(caption: &str) -> Option<String> {
    let caps = INDICATOR.captures(caption)?;
    let label = caps.get(1)?;
    // "Table In ..." must not read as roman numeral I
    if caption[label.end()..].chars().next().is_some_and(char::is_alphanumeric) {
        return None;
    }
    Some(format!("Table {}", label.as_str()))
}

/// Body sentences that cite the caption's table indicator; at most the first one.
pub fn author_match<S: AsRef<str>>(caption_first: &str, sentences: &[S]) -> Vec<String> {
    let Some(indicator) = table_indicator(caption_first) else {
        return Vec::new();
    };
    let number = indicator.trim_start_matches("Table ");
    let pattern = Regex::new(&format!(r"\bTable\s+{}\b", regex::escape(number))).expect("escaped indicator");
    sentences
        .iter()
        .map(AsRef::as_ref)
        .find(|s| pattern.is_match(s))
        .map(|s| vec![s.to_string()])
        .unwrap_or_default()
}

/// How relevant sentences are chosen for a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMethod {
    None,
    TopN(usize),
    Author,
}

impl RetrievalMethod {
    pub fn code(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::TopN(n) => format!("top{n}"),
            Self::Author => "author".into(),
        }
    }

    pub fn column_label(&self) -> String {
        match self {
            Self::None => "None".into(),
            Self::TopN(n) => format!("Top-{n} BM25"),
            Self::Author => "Author".into(),
        }
    }
}

impl fmt::Display for RetrievalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for RetrievalMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "author" => Ok(Self::Author),
            _ => s
                .strip_prefix("top")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(Self::TopN)
                .ok_or_else(|| format!("unknown retrieval method {s:?} (expected none, topN or author)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub method: RetrievalMethod,
    pub params: Bm25Params,
}

impl RetrievalConfig {
    pub fn new(method: RetrievalMethod) -> Self {
        Self { method, params: Bm25Params::default() }
    }
}

/// The retrieval query for a table: every word of every cell, tokenized,
/// numerals included.
pub fn table_query(table: &Table) -> Vec<String> {
    linearize(table, LinearizationVariant::Whole).iter().flat_map(|w| tokenize(w)).collect()
}

/// Relevant sentences for one record under `config`.
pub fn retrieve(record: &PageRecord, config: &RetrievalConfig) -> Result<Vec<String>, RetrievalError> {
    config.params.validate()?;
    match config.method {
        RetrievalMethod::None => Ok(Vec::new()),
        RetrievalMethod::Author => {
            Ok(record.caption.first().map(|c| author_match(c, &record.sentences)).unwrap_or_default())
        }
        RetrievalMethod::TopN(n) => {
            if record.sentences.is_empty() {
                return Ok(Vec::new());
            }
            let table = Table::new(record.table.clone()).map_err(|_| RetrievalError::NoSentences)?;
            let index = build_index(&record.sentences)?;
            Ok(top_n(&table_query(&table), n, &index, &config.params)?.into_iter().map(|r| r.sentence).collect())
        }
    }
}
