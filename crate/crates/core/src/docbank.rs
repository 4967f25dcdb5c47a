//! DocBank-style token annotations: parsing, reading order, page filtering
//! and DocBank-TB record construction.
//!
//! An annotation file carries one token per line with ten tab-separated
//! fields: `text x0 y0 x1 y1 r g b font label`. Coordinates are normalized to
//! the 0–1000 range with the origin at the top-left corner of the page.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sentences::{is_complete, segment_sentences};
use crate::table::{reconstruct_table, TableConfig};
use crate::text::normalize_whitespace;

pub const COORD_MAX: u16 = 1000;
const FIELD_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u16,
    pub y0: u16,
    pub x1: u16,
    pub y1: u16,
}

impl BBox {
    pub fn new(x0: u16, y0: u16, x1: u16, y1: u16) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Self { x0, y0, x1, y1 }
    }

    pub fn height(&self) -> u16 {
        self.y1 - self.y0
    }

    pub fn mid_x(&self) -> f64 {
        (f64::from(self.x0) + f64::from(self.x1)) / 2.0
    }

    /// Length of the shared vertical interval, or `None` when the intervals are disjoint.
    pub fn vertical_overlap(&self, other: &BBox) -> Option<u16> {
        let top = self.y0.max(other.y0);
        let bottom = self.y1.min(other.y1);
        (top <= bottom).then(|| bottom - top)
    }

    /// Vertical distance between the two boxes, zero when they overlap.
    pub fn vertical_gap(&self, other: &BBox) -> u16 {
        other.y0.saturating_sub(self.y1).max(self.y0.saturating_sub(other.y1))
    }

    /// Two boxes share a line band when their vertical intervals overlap by at
    /// least `ratio` of the smaller height.
    pub fn shares_band(&self, other: &BBox, ratio: f64) -> bool {
        match self.vertical_overlap(other) {
            Some(overlap) => {
                let smaller = self.height().min(other.height());
                f64::from(overlap) >= ratio * f64::from(smaller)
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Color {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Paragraph,
    Table,
    Caption,
    Section,
    Title,
    Abstract,
    Figure,
    List,
    Footer,
    Reference,
    Equation,
    Author,
    Date,
    Other,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Paragraph => "paragraph",
            Label::Table => "table",
            Label::Caption => "caption",
            Label::Section => "section",
            Label::Title => "title",
            Label::Abstract => "abstract",
            Label::Figure => "figure",
            Label::List => "list",
            Label::Footer => "footer",
            Label::Reference => "reference",
            Label::Equation => "equation",
            Label::Author => "author",
            Label::Date => "date",
            Label::Other => "other",
        }
    }
}

impl FromStr for Label {
    type Err = std::convert::Infallible;

    /// Unknown labels map to [`Label::Other`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "paragraph" => Label::Paragraph,
            "table" => Label::Table,
            "caption" => Label::Caption,
            "section" => Label::Section,
            "title" => Label::Title,
            "abstract" => Label::Abstract,
            "figure" => Label::Figure,
            "list" => Label::List,
            "footer" => Label::Footer,
            "reference" => Label::Reference,
            "equation" => Label::Equation,
            "author" => Label::Author,
            "date" => Label::Date,
            _ => Label::Other,
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotated token of a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticToken {
    pub text: String,
    pub bbox: BBox,
    pub color: Color,
    pub font: String,
    pub label: Label,
}

impl SemanticToken {
    /// Render the token back into its annotation line.
    pub fn to_line(&self) -> String {
        let BBox { x0, y0, x1, y1 } = self.bbox;
        let Color { r, g, b } = self.color;
        format!("{}\t{x0}\t{y0}\t{x1}\t{y1}\t{r}\t{g}\t{b}\t{}\t{}", self.text, self.font, self.label)
    }
}

/// Tokens of one page in reading order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageLayout {
    pub page_id: String,
    pub tokens: Vec<SemanticToken>,
}

impl PageLayout {
    pub fn tokens_with(&self, label: Label) -> impl Iterator<Item = &SemanticToken> {
        self.tokens.iter().filter(move |t| t.label == label)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected {FIELD_COUNT} tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field `{field}` is not an integer: {value:?}")]
    NotInteger { line: usize, field: &'static str, value: String },
    #[error("line {line}: field `{field}` value {value} outside {min}..={max}")]
    OutOfRange { line: usize, field: &'static str, value: i64, min: i64, max: i64 },
    #[error("line {line}: inverted bounding box ({x0},{y0},{x1},{y1})")]
    InvertedBox { line: usize, x0: u16, y0: u16, x1: u16, y1: u16 },
}

/// Thresholds that turn token geometry into structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// Fraction of the smaller token height two tokens must share to sit on one line band.
    pub band_overlap: f64,
    /// Minimum empty horizontal span between paragraph midpoints that separates two columns.
    pub column_gap: f64,
    /// Share of paragraph tokens required on each side of a column gap.
    pub column_mass: f64,
    /// Table tokens within this vertical distance belong to the same table.
    pub table_gap: u16,
    /// Horizontal gap below which adjacent table tokens merge into one cell.
    pub cell_gap: u16,
    /// Complete body sentences a page needs to be kept.
    pub min_sentences: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self { band_overlap: 0.5, column_gap: 150.0, column_mass: 0.2, table_gap: 30, cell_gap: 15, min_sentences: 3 }
    }
}

impl LayoutConfig {
    pub fn table_config(&self) -> TableConfig {
        TableConfig { band_overlap: self.band_overlap, cell_gap: self.cell_gap }
    }
}

fn parse_int(line: usize, field: &'static str, raw: &str, max: i64) -> Result<i64, ParseError> {
    let value: i64 =
        raw.trim().parse().map_err(|_| ParseError::NotInteger { line, field, value: raw.to_string() })?;
    if !(0..=max).contains(&value) {
        return Err(ParseError::OutOfRange { line, field, value, min: 0, max });
    }
    Ok(value)
}

/// Parse a single annotation line. `line` is the 1-based line number used in errors.
pub fn parse_token(line: usize, raw: &str) -> Result<SemanticToken, ParseError> {
    let fields: Vec<&str> = raw.split('\t').collect();
    if fields.len() != FIELD_COUNT {
        return Err(ParseError::FieldCount { line, found: fields.len() });
    }
    let coord = |i: usize, name| parse_int(line, name, fields[i], i64::from(COORD_MAX)).map(|v| v as u16);
    let channel = |i: usize, name| parse_int(line, name, fields[i], 255).map(|v| v as u8);

    let (x0, y0, x1, y1) = (coord(1, "x0")?, coord(2, "y0")?, coord(3, "x1")?, coord(4, "y1")?);
    if x0 > x1 || y0 > y1 {
        return Err(ParseError::InvertedBox { line, x0, y0, x1, y1 });
    }
    Ok(SemanticToken {
        text: fields[0].to_string(),
        bbox: BBox { x0, y0, x1, y1 },
        color: Color { r: channel(5, "r")?, g: channel(6, "g")?, b: channel(7, "b")? },
        font: fields[8].to_string(),
        label: fields[9].parse().unwrap_or(Label::Other),
    })
}

/// Parse a page's annotation lines and return its tokens in reading order.
///
/// Blank lines are skipped; the input line order is not trusted.
pub fn parse_page<I, S>(page_id: &str, lines: I, band_overlap: f64) -> Result<PageLayout, ParseError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut tokens = Vec::new();
    for (idx, raw) in lines.into_iter().enumerate() {
        let raw = raw.as_ref().trim_end_matches(['\r', '\n']);
        if raw.trim().is_empty() {
            continue;
        }
        tokens.push(parse_token(idx + 1, raw)?);
    }
    Ok(PageLayout { page_id: page_id.to_string(), tokens: reading_order(tokens, band_overlap) })
}

/// Group token indices into horizontal line bands.
///
/// Bands are the connected components of the "shares a band" relation,
/// ordered by their top edge; ties keep the order of each band's earliest
/// input token. Indices inside a band are sorted left to right, ties by input
/// order.
pub fn line_bands(boxes: &[BBox], band_overlap: f64) -> Vec<Vec<usize>> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    let mut by_top: Vec<usize> = (0..n).collect();
    by_top.sort_by_key(|&i| (boxes[i].y0, i));
    for (pos, &i) in by_top.iter().enumerate() {
        for &j in &by_top[pos + 1..] {
            if boxes[j].y0 > boxes[i].y1 {
                break;
            }
            if boxes[i].shares_band(&boxes[j], band_overlap) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut bands: Vec<Vec<usize>> = groups.into_values().collect();
    for band in &mut bands {
        band.sort_by_key(|&i| (boxes[i].x0, i));
    }
    bands.sort_by_key(|band| {
        let top = band.iter().map(|&i| boxes[i].y0).min().unwrap_or(0);
        let first = band.iter().copied().min().unwrap_or(0);
        (top, first)
    });
    bands
}

/// Sort tokens top-to-bottom by line band, then left-to-right within a band.
pub fn reading_order(tokens: Vec<SemanticToken>, band_overlap: f64) -> Vec<SemanticToken> {
    let boxes: Vec<BBox> = tokens.iter().map(|t| t.bbox).collect();
    let order: Vec<usize> = line_bands(&boxes, band_overlap).into_iter().flatten().collect();
    let mut slots: Vec<Option<SemanticToken>> = tokens.into_iter().map(Some).collect();
    order.into_iter().filter_map(|i| slots[i].take()).collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("page has no paragraph tokens; column count is indeterminate")]
    NoParagraphs,
}

/// Number of text columns, judged from the horizontal midpoints of paragraph tokens.
///
/// Returns 2 when a gap of at least `column_gap` units splits the sorted
/// midpoints with at least `column_mass` of them on each side, 1 otherwise.
pub fn detect_columns(layout: &PageLayout, config: &LayoutConfig) -> Result<usize, LayoutError> {
    let mut mids: Vec<f64> = layout.tokens_with(Label::Paragraph).map(|t| t.bbox.mid_x()).collect();
    if mids.is_empty() {
        return Err(LayoutError::NoParagraphs);
    }
    mids.sort_by(f64::total_cmp);
    let n = mids.len() as f64;
    let split = mids.windows(2).enumerate().any(|(i, w)| {
        let left = (i + 1) as f64;
        w[1] - w[0] >= config.column_gap && left >= config.column_mass * n && n - left >= config.column_mass * n
    });
    Ok(if split { 2 } else { 1 })
}

/// Single-linkage vertical clustering: tokens end up in one group when a
/// chain of tokens links them with gaps of at most `max_gap`.
pub(crate) fn vertical_groups<'a>(tokens: &[&'a SemanticToken], max_gap: u16) -> Vec<Vec<&'a SemanticToken>> {
    let mut sorted: Vec<&SemanticToken> = tokens.to_vec();
    sorted.sort_by_key(|t| t.bbox.y0);
    let mut groups: Vec<Vec<&SemanticToken>> = Vec::new();
    let mut bottom = 0u16;
    for token in sorted {
        match groups.last_mut() {
            Some(group) if token.bbox.y0 <= bottom.saturating_add(max_gap) => {
                group.push(token);
                bottom = bottom.max(token.bbox.y1);
            }
            _ => {
                bottom = token.bbox.y1;
                groups.push(vec![token]);
            }
        }
    }
    groups
}

/// Number of distinct table blocks on the page.
pub fn count_tables(layout: &PageLayout, table_gap: u16) -> usize {
    let tables: Vec<&SemanticToken> = layout.tokens_with(Label::Table).collect();
    vertical_groups(&tables, table_gap).len()
}

/// Body sentences of the page, from paragraph tokens in reading order.
pub fn body_sentences(layout: &PageLayout) -> Vec<String> {
    let words: Vec<&str> = layout.tokens_with(Label::Paragraph).map(|t| t.text.as_str()).collect();
    segment_sentences(&words)
}

/// Which of the three page criteria failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("two-column layout")]
    MultiColumn,
    #[error("column count indeterminate: no paragraph text")]
    NoParagraphs,
    #[error("no table")]
    NoTable,
    #[error("multiple tables ({0})")]
    MultipleTables(usize),
    #[error("too few complete sentences ({found} < {required})")]
    TooFewSentences { found: usize, required: usize },
}

/// Check a page against the three corpus criteria: one column, exactly one
/// table, and enough complete body sentences.
pub fn check_filter(layout: &PageLayout, config: &LayoutConfig) -> Result<(), Rejection> {
    match detect_columns(layout, config) {
        Err(LayoutError::NoParagraphs) => return Err(Rejection::NoParagraphs),
        Ok(1) => {}
        Ok(_) => return Err(Rejection::MultiColumn),
    }
    match count_tables(layout, config.table_gap) {
        0 => return Err(Rejection::NoTable),
        1 => {}
        n => return Err(Rejection::MultipleTables(n)),
    }
    let found = body_sentences(layout).iter().filter(|s| is_complete(s)).count();
    if found < config.min_sentences {
        return Err(Rejection::TooFewSentences { found, required: config.min_sentences });
    }
    Ok(())
}

pub fn apply_filter(layout: &PageLayout, config: &LayoutConfig) -> bool {
    check_filter(layout, config).is_ok()
}

/// One DocBank-TB record: body sentences, caption sentences and table rows of a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub page_id: String,
    pub sentences: Vec<String>,
    pub caption: Vec<String>,
    pub table: Vec<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record {page_id}: {message}")]
    Invalid { page_id: String, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PageRecord {
    /// Check the record invariants: non-empty sentences and a non-empty ragged grid.
    pub fn validate(&self) -> Result<(), RecordError> {
        let invalid = |message: &str| RecordError::Invalid { page_id: self.page_id.clone(), message: message.into() };
        if self.sentences.iter().chain(&self.caption).any(|s| normalize_whitespace(s).is_empty()) {
            return Err(invalid("empty sentence"));
        }
        if self.table.is_empty() || self.table.iter().any(|row| row.is_empty()) {
            return Err(invalid("table needs at least one row and one cell per row"));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }

    pub fn from_json_line(line: &str) -> Result<Self, RecordError> {
        let record: PageRecord = serde_json::from_str(line)?;
        record.validate()?;
        Ok(record)
    }
}

/// Caption tokens of the caption block vertically nearest to the table block.
fn nearest_caption<'a>(layout: &'a PageLayout, config: &LayoutConfig) -> Vec<&'a SemanticToken> {
    let tables: Vec<&SemanticToken> = layout.tokens_with(Label::Table).collect();
    let Some(table_box) = enclosing_box(&tables) else {
        return Vec::new();
    };
    let captions: Vec<&SemanticToken> = layout.tokens_with(Label::Caption).collect();
    let groups = vertical_groups(&captions, config.table_gap);
    let Some(best) = groups
        .into_iter()
        .min_by_key(|g| enclosing_box(g).map_or(u16::MAX, |b| b.vertical_gap(&table_box)))
    else {
        return Vec::new();
    };
    // keep reading order, not the clustering order
    layout.tokens.iter().filter(|t| best.iter().any(|b| std::ptr::eq(*b, *t))).collect()
}

fn enclosing_box(tokens: &[&SemanticToken]) -> Option<BBox> {
    let first = tokens.first()?.bbox;
    Some(tokens.iter().fold(first, |acc, t| BBox {
        x0: acc.x0.min(t.bbox.x0),
        y0: acc.y0.min(t.bbox.y0),
        x1: acc.x1.max(t.bbox.x1),
        y1: acc.y1.max(t.bbox.y1),
    }))
}

/// Build the DocBank-TB record for a page that passes the filter.
pub fn build_record(layout: &PageLayout, config: &LayoutConfig) -> Result<PageRecord, Rejection> {
    check_filter(layout, config)?;
    let caption_words: Vec<&str> = nearest_caption(layout, config).iter().map(|t| t.text.as_str()).collect();
    let table_tokens: Vec<SemanticToken> = layout.tokens_with(Label::Table).cloned().collect();
    let table = reconstruct_table(&table_tokens, &config.table_config()).map_err(|_| Rejection::NoTable)?;
    Ok(PageRecord {
        page_id: layout.page_id.clone(),
        sentences: body_sentences(layout),
        caption: segment_sentences(&caption_words),
        table: table.rows,
    })
}
