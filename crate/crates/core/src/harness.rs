//! The experiment grid: every (prompt style, condition) pair runs the full
//! per-record pipeline and contributes five metric cells to a result matrix.
//! The CSV puts one row per (style, metric) and one column per condition.
//!
//! Per record: linearize the table for the condition's variant, strip
//! numerals, retrieve relevant sentences, split the caption, assemble the
//! prompt, generate, and score the continuation against the caption
//! remainder.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::docbank::PageRecord;
use crate::generation::{Decode, GenError, GenRequest, GenerationClient, DEFAULT_MAX_NEW_TOKENS};
use crate::metrics::{evaluate_corpus, Metric, MetricConfig, PairInput};
use crate::prompt::{split_caption, CaptionSplit, PromptError, PromptSpec, PromptStyle};
use crate::retrieval::{retrieve, Bm25Params, RetrievalConfig, RetrievalError, RetrievalMethod};
use crate::table::{linearize_with, strip_numerals, HeaderMode, LinearizationVariant, Table};

/// One column of the results table: a retrieval method plus, for BM25
/// methods, the part of the table fed to the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    pub method: RetrievalMethod,
    /// `None` for the no-retrieval and author-sentence conditions, which
    /// follow [`GridConfig::fallback_tabular`].
    pub variant: Option<LinearizationVariant>,
}

impl Condition {
    pub const fn none() -> Self {
        Self { method: RetrievalMethod::None, variant: None }
    }

    pub const fn author() -> Self {
        Self { method: RetrievalMethod::Author, variant: None }
    }

    pub const fn top(n: usize, variant: LinearizationVariant) -> Self {
        Self { method: RetrievalMethod::TopN(n), variant: Some(variant) }
    }

    /// None; Top-1/2/3 × {row header, others, whole}; Author.
    pub fn canonical() -> Vec<Condition> {
        let mut grid = vec![Self::none()];
        for n in 1..=3 {
            grid.extend(LinearizationVariant::ALL.map(|v| Self::top(n, v)));
        }
        grid.push(Self::author());
        grid
    }

    /// Short identifier such as `none`, `top2-ro` or `author`.
    pub fn code(&self) -> String {
        match self.variant {
            Some(v) => format!("{}-{}", self.method.code(), v.code()),
            None => self.method.code(),
        }
    }

    /// Header used in the CSV table, e.g. `Top-1 BM25 T_r.h`.
    pub fn column_label(&self) -> String {
        match self.variant {
            Some(v) => format!("{} {}", self.method.column_label(), v.column_label()),
            None => self.method.column_label(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('-') {
            Some((method, variant)) => {
                Ok(Self { method: method.parse()?, variant: Some(variant.parse()?) })
            }
            None => {
                let method: RetrievalMethod = s.parse()?;
                match method {
                    RetrievalMethod::TopN(_) => Ok(Self { method, variant: Some(LinearizationVariant::Whole) }),
                    _ => Ok(Self { method, variant: None }),
                }
            }
        }
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a comma-separated condition list; `all` expands to the canonical grid.
pub fn parse_conditions(list: &str) -> Result<Vec<Condition>, String> {
    if list.trim() == "all" {
        return Ok(Condition::canonical());
    }
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

/// Tabular input for conditions without a structure variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackTabular {
    /// Feed the whole table.
    #[default]
    Whole,
    /// Feed no tabular text at all.
    Omit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub conditions: Vec<Condition>,
    pub styles: Vec<PromptStyle>,
    pub bm25: Bm25Params,
    pub fallback_tabular: FallbackTabular,
    pub header_mode: HeaderMode,
    pub strip_numerals: bool,
    pub sep_budget: usize,
    pub plain_budget: usize,
    pub max_new_tokens: u32,
    pub decode: Decode,
    pub metrics: MetricConfig,
    /// Records with fewer caption sentences are left out of the grid.
    pub min_caption_sentences: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            conditions: Condition::canonical(),
            styles: PromptStyle::ALL.to_vec(),
            bm25: Bm25Params::default(),
            fallback_tabular: FallbackTabular::Whole,
            header_mode: HeaderMode::FirstCell,
            strip_numerals: true,
            sep_budget: PromptStyle::Separator.default_budget(),
            plain_budget: PromptStyle::Plain.default_budget(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            decode: Decode::Greedy,
            metrics: MetricConfig::default(),
            min_caption_sentences: 2,
        }
    }
}

impl GridConfig {
    pub fn budget(&self, style: PromptStyle) -> usize {
        match style {
            PromptStyle::Separator => self.sep_budget,
            PromptStyle::Plain => self.plain_budget,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PrepareError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("record table is invalid: {0}")]
    Table(String),
}

/// A prompt ready to send, with the text it should be scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedPrompt {
    pub record_id: String,
    pub prompt: String,
    pub target: String,
}

/// Tabular tokens for the prompt under `condition`.
pub fn prompt_tabular(table: &Table, condition: &Condition, config: &GridConfig) -> Vec<String> {
    let variant = match (condition.variant, config.fallback_tabular) {
        (Some(v), _) => v,
        (None, FallbackTabular::Whole) => LinearizationVariant::Whole,
        (None, FallbackTabular::Omit) => return Vec::new(),
    };
    let words = linearize_with(table, variant, config.header_mode);
    if config.strip_numerals {
        strip_numerals(&words)
    } else {
        words
    }
}

/// Run every stage up to prompt assembly for one record.
pub fn prepare(
    record: &PageRecord,
    condition: &Condition,
    style: PromptStyle,
    config: &GridConfig,
) -> Result<PreparedPrompt, PrepareError> {
    let table = Table::new(record.table.clone()).map_err(|e| PrepareError::Table(e.to_string()))?;
    let CaptionSplit { first, rest } = split_caption(&record.caption)?;
    let relevant = retrieve(record, &RetrievalConfig { method: condition.method, params: config.bm25 })?;
    let spec = PromptSpec {
        tabular_tokens: prompt_tabular(&table, condition, config),
        relevant_sentences: relevant,
        first_caption_sentence: first,
        style,
        max_length: config.budget(style),
    };
    Ok(PreparedPrompt { record_id: record.page_id.clone(), prompt: spec.render()?, target: rest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellValue {
    Score(f64),
    Error(String),
}

impl CellValue {
    pub fn score(&self) -> Option<f64> {
        match self {
            CellValue::Score(v) => Some(*v),
            CellValue::Error(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub style: PromptStyle,
    pub condition: Condition,
    pub metric: Metric,
    pub value: CellValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 over the corpus records as JSON lines.
    pub corpus_hash: String,
    pub records_used: usize,
    pub records_skipped: usize,
    pub backend_id: String,
    pub meteor_matching: String,
    pub config: GridConfig,
}

/// Scores indexed by (style, condition, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMatrix {
    pub styles: Vec<PromptStyle>,
    pub conditions: Vec<Condition>,
    pub cells: Vec<Cell>,
    pub provenance: Provenance,
}

impl ResultMatrix {
    pub fn get(&self, style: PromptStyle, condition: &Condition, metric: Metric) -> Option<&CellValue> {
        self.cells
            .iter()
            .find(|c| c.style == style && c.condition == *condition && c.metric == metric)
            .map(|c| &c.value)
    }

    /// Expected cells with no entry, as `style/condition/metric` strings.
    pub fn missing_cells(&self) -> Vec<String> {
        let mut missing = Vec::new();
        for &style in &self.styles {
            for condition in &self.conditions {
                for metric in Metric::ALL {
                    if self.get(style, condition, metric).is_none() {
                        missing.push(format!("{style}/{condition}/{metric}"));
                    }
                }
            }
        }
        missing
    }

    pub fn is_complete(&self) -> bool {
        self.missing_cells().is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// One generated continuation and what it is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub record_id: String,
    pub prompt: String,
    pub continuation: Option<String>,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRun {
    pub style: PromptStyle,
    pub condition: Condition,
    pub generations: Vec<GenerationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub matrix: ResultMatrix,
    pub runs: Vec<ConditionRun>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no record has at least {0} caption sentences")]
    NoUsableRecords(usize),
    #[error("backend unreachable: every request of {condition} failed ({cause})")]
    BackendUnreachable { condition: String, cause: GenError },
    #[error("incomplete matrix, missing {} cell(s): {}", .0.len(), .0.join(", "))]
    Incomplete(Vec<String>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn corpus_hash(corpus: &[PageRecord]) -> String {
    let mut hasher = Sha256::new();
    for record in corpus {
        hasher.update(record.to_json_line().as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

fn condition_cells(
    style: PromptStyle,
    condition: Condition,
    generations: &[GenerationRecord],
    config: &GridConfig,
) -> Vec<Cell> {
    let cell = |metric, value| Cell { style, condition, metric, value };
    let failed: Vec<&GenerationRecord> = generations.iter().filter(|g| g.continuation.is_none()).collect();
    if let Some(first) = failed.first() {
        let message = format!(
            "{} of {} generations failed; first: {}",
            failed.len(),
            generations.len(),
            first.error.as_deref().unwrap_or("unknown error")
        );
        return Metric::ALL.iter().map(|&m| cell(m, CellValue::Error(message.clone()))).collect();
    }
    let pairs: Vec<PairInput> = generations
        .iter()
        .map(|g| PairInput { candidate: g.continuation.clone().unwrap_or_default(), reference: g.reference.clone() })
        .collect();
    match evaluate_corpus(&pairs, &config.metrics) {
        Ok(report) => Metric::ALL
            .iter()
            .map(|&m| {
                let value = report
                    .aggregate
                    .get(m)
                    .map(CellValue::Score)
                    .unwrap_or_else(|| CellValue::Error(format!("{m} undefined for every reference")));
                cell(m, value)
            })
            .collect(),
        Err(e) => Metric::ALL.iter().map(|&m| cell(m, CellValue::Error(e.to_string()))).collect(),
    }
}

/// Run the grid over `corpus` with `client`.
///
/// Records with too few caption sentences are skipped. A failed generation
/// turns its (style, condition) cells into error cells instead of stopping
/// the run; only a backend that fails every request of the first condition
/// aborts it.
pub fn run_grid(corpus: &[PageRecord], client: &GenerationClient, config: &GridConfig) -> Result<GridRun, GridError> {
    if corpus.is_empty() {
        return Err(GridError::EmptyCorpus);
    }
    let usable: Vec<&PageRecord> =
        corpus.iter().filter(|r| r.caption.len() >= config.min_caption_sentences.max(2)).collect();
    if usable.is_empty() {
        return Err(GridError::NoUsableRecords(config.min_caption_sentences.max(2)));
    }

    let mut cells = Vec::new();
    let mut runs = Vec::new();
    let mut first_condition = true;
    for &style in &config.styles {
        for condition in &config.conditions {
            let prepared: Vec<Result<PreparedPrompt, PrepareError>> =
                usable.iter().map(|r| prepare(r, condition, style, config)).collect();
            let requests: Vec<GenRequest> = prepared
                .iter()
                .flatten()
                .map(|p| GenRequest {
                    style,
                    prompt: p.prompt.clone(),
                    max_new_tokens: config.max_new_tokens,
                    decode: config.decode,
                })
                .collect();
            let mut responses = client.generate_batch(&requests).into_iter();

            if first_condition && !requests.is_empty() {
                let all_down = responses.as_slice().iter().all(|r| r.as_ref().is_err_and(|e| e.root().is_transient()));
                if all_down {
                    let cause = responses.as_slice()[0].clone().unwrap_err();
                    return Err(GridError::BackendUnreachable { condition: format!("{style}/{condition}"), cause });
                }
            }
            first_condition = false;

            let generations: Vec<GenerationRecord> = usable
                .iter()
                .zip(prepared)
                .map(|(record, prepared)| match prepared {
                    Ok(p) => {
                        let response = responses.next().expect("one response per request");
                        let (continuation, error) = match response {
                            Ok(r) => (Some(r.continuation), None),
                            Err(e) => (None, Some(e.to_string())),
                        };
                        GenerationRecord { record_id: p.record_id, prompt: p.prompt, continuation, reference: p.target, error }
                    }
                    Err(e) => GenerationRecord {
                        record_id: record.page_id.clone(),
                        prompt: String::new(),
                        continuation: None,
                        reference: split_caption(&record.caption).map(|s| s.rest).unwrap_or_default(),
                        error: Some(e.to_string()),
                    },
                })
                .collect();

            cells.extend(condition_cells(style, *condition, &generations, config));
            runs.push(ConditionRun { style, condition: *condition, generations });
        }
    }

    let matrix = ResultMatrix {
        styles: config.styles.clone(),
        conditions: config.conditions.clone(),
        cells,
        provenance: Provenance {
            corpus_hash: corpus_hash(corpus),
            records_used: usable.len(),
            records_skipped: corpus.len() - usable.len(),
            backend_id: client.backend_id().to_string(),
            meteor_matching: crate::metrics::METEOR_MATCHING.into(),
            config: config.clone(),
        },
    };
    Ok(GridRun { matrix, runs })
}

/// Display name of a style in the results table.
pub fn model_label(style: PromptStyle) -> &'static str {
    style.code()
}

/// The matrix as CSV: one row per (model style, metric), one column per
/// condition in the matrix's condition order. Error cells read `ERR`.
pub fn emit_csv(matrix: &ResultMatrix) -> Result<String, GridError> {
    let missing = matrix.missing_cells();
    if !missing.is_empty() {
        return Err(GridError::Incomplete(missing));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string(), "metric".to_string()];
    header.extend(matrix.conditions.iter().map(Condition::column_label));
    writer.write_record(&header)?;
    for &style in &matrix.styles {
        for metric in Metric::ALL {
            let mut row = vec![model_label(style).to_string(), metric.name().to_string()];
            for condition in &matrix.conditions {
                row.push(match matrix.get(style, condition, metric) {
                    Some(CellValue::Score(v)) => format!("{v:.4}"),
                    _ => "ERR".to_string(),
                });
            }
            writer.write_record(&row)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The best condition(s) for one (style, metric) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub style: PromptStyle,
    pub metric: Metric,
    /// Every condition attaining the maximum.
    pub conditions: Vec<Condition>,
    pub value: Option<f64>,
    /// Some cells of the row were errors, so the maximum covers only the rest.
    pub partial: bool,
}

/// Highest-scoring condition per (style, metric), with ties kept together.
pub fn compare_best(matrix: &ResultMatrix) -> Vec<Best> {
    let mut out = Vec::new();
    for &style in &matrix.styles {
        for metric in Metric::ALL {
            let scores: Vec<(Condition, Option<f64>)> = matrix
                .conditions
                .iter()
                .map(|c| (*c, matrix.get(style, c, metric).and_then(CellValue::score)))
                .collect();
            let partial = scores.iter().any(|(_, v)| v.is_none());
            let value = scores.iter().filter_map(|(_, v)| *v).max_by(f64::total_cmp);
            let conditions = match value {
                Some(max) => scores.iter().filter(|(_, v)| *v == Some(max)).map(|(c, _)| *c).collect(),
                None => Vec::new(),
            };
            out.push(Best { style, metric, conditions, value, partial });
        }
    }
    out
}

/// Group generation records by `style/condition` for writing to disk.
pub fn runs_by_key(runs: &[ConditionRun]) -> BTreeMap<(String, String), &ConditionRun> {
    runs.iter().map(|r| ((r.style.code().to_string(), r.condition.code()), r)).collect()
}
