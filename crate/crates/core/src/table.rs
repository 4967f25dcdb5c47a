//! Table grids rebuilt from table-labeled tokens, the three row-based
//! linearizations, and numeral stripping.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docbank::{line_bands, BBox, SemanticToken};
use crate::text::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub band_overlap: f64,
    pub cell_gap: u16,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self { band_overlap: 0.5, cell_gap: 15 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("empty table")]
    Empty,
    #[error("row {0} has no cells")]
    EmptyRow(usize),
}

/// A ragged row/column grid of whitespace-normalized cell texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        if rows.is_empty() {
            return Err(TableError::Empty);
        }
        if let Some(i) = rows.iter().position(Vec::is_empty) {
            return Err(TableError::EmptyRow(i));
        }
        let rows = rows.into_iter().map(|row| row.iter().map(|c| normalize_whitespace(c)).collect()).collect();
        Ok(Self { rows })
    }

    pub fn row_header(&self, i: usize) -> Option<&str> {
        self.rows.get(i).and_then(|row| row.first()).map(String::as_str)
    }
}

/// Rebuild a grid from table tokens: line bands become rows and, within a
/// row, tokens closer than `cell_gap` horizontally merge into one cell.
pub fn reconstruct_table(tokens: &[SemanticToken], config: &TableConfig) -> Result<Table, TableError> {
    if tokens.is_empty() {
        return Err(TableError::Empty);
    }
    let boxes: Vec<BBox> = tokens.iter().map(|t| t.bbox).collect();
    let mut rows = Vec::new();
    for band in line_bands(&boxes, config.band_overlap) {
        let mut cells: Vec<String> = Vec::new();
        let mut right_edge: Option<u16> = None;
        for i in band {
            let token = &tokens[i];
            let joins = right_edge.is_some_and(|edge| i32::from(token.bbox.x0) - i32::from(edge) < i32::from(config.cell_gap));
            match cells.last_mut() {
                Some(cell) if joins => {
                    cell.push(' ');
                    cell.push_str(&token.text);
                }
                _ => cells.push(token.text.clone()),
            }
            right_edge = Some(right_edge.filter(|_| joins).map_or(token.bbox.x1, |e| e.max(token.bbox.x1)));
        }
        let cells: Vec<String> =
            cells.iter().map(|c| normalize_whitespace(c)).filter(|c| !c.is_empty()).collect();
        if !cells.is_empty() {
            rows.push(cells);
        }
    }
    Table::new(rows)
}

/// Which part of the table feeds the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinearizationVariant {
    /// Row headers only.
    #[serde(rename = "rh")]
    RowHeader,
    /// Everything except the row headers.
    #[serde(rename = "ro")]
    Others,
    /// The whole table.
    #[serde(rename = "rw")]
    Whole,
}

impl LinearizationVariant {
    pub const ALL: [LinearizationVariant; 3] = [Self::RowHeader, Self::Others, Self::Whole];

    pub fn code(&self) -> &'static str {
        match self {
            Self::RowHeader => "rh",
            Self::Others => "ro",
            Self::Whole => "rw",
        }
    }

    /// Table-style column label: `T_r.h`, `T_r.o`, `T_r.w`.
    pub fn column_label(&self) -> &'static str {
        match self {
            Self::RowHeader => "T_r.h",
            Self::Others => "T_r.o",
            Self::Whole => "T_r.w",
        }
    }
}

impl fmt::Display for LinearizationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LinearizationVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rh" | "T_r.h" => Ok(Self::RowHeader),
            "ro" | "T_r.o" => Ok(Self::Others),
            "rw" | "T_r.w" => Ok(Self::Whole),
            other => Err(format!("unknown linearization variant {other:?} (expected rh, ro or rw)")),
        }
    }
}

/// What counts as the row header.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderMode {
    /// The first cell of every row.
    #[default]
    FirstCell,
    /// The whole first row.
    FirstRow,
}

fn words(cell: &str) -> impl Iterator<Item = String> + '_ {
    cell.split_whitespace().map(str::to_string)
}

/// Flatten the selected part of the table into a word sequence, row-major.
pub fn linearize(table: &Table, variant: LinearizationVariant) -> Vec<String> {
    linearize_with(table, variant, HeaderMode::FirstCell)
}

pub fn linearize_with(table: &Table, variant: LinearizationVariant, header: HeaderMode) -> Vec<String> {
    let is_header = |row: usize, col: usize| match header {
        HeaderMode::FirstCell => col == 0,
        HeaderMode::FirstRow => row == 0,
    };
    let keep = |row: usize, col: usize| match variant {
        LinearizationVariant::Whole => true,
        LinearizationVariant::RowHeader => is_header(row, col),
        LinearizationVariant::Others => !is_header(row, col),
    };
    table
        .rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().filter(move |&(c, _)| keep(r, c)).map(|(_, cell)| cell))
        .flat_map(|cell| words(cell))
        .collect()
}

static NUMERAL: LazyLock<Regex> = LazyLock::new(|| {
    let number = r"[+\-−–]?(?:\d+(?:,\d{3})*(?:\.\d+)?|\.\d+)(?:[eE][+\-−]?\d+)?%?";
    let joined = format!(r"{number}(?:(?:--|×|±|/){number})*");
    Regex::new(&format!(r"^[(\[]?{joined}[)\]]?[,;:]?$")).expect("numeral pattern")
});

/// True when `token` is a numeral: signed, comma-grouped, decimal, scientific,
/// percentage, bracketed, or several numbers joined by `--`, `×`, `±` or `/`.
pub fn is_numeral(token: &str) -> bool {
    NUMERAL.is_match(token)
}

/// Drop numeral tokens, keeping the rest in order.
pub fn strip_numerals<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(AsRef::as_ref).filter(|t| !is_numeral(t)).map(str::to_string).collect()
}
