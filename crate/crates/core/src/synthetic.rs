//! Seeded generator of DocBank-style annotation pages.
//!
//! Pages are laid out on the 0–1000 grid with flowing paragraph text, a
//! caption block and one or more tables. The line order of the output is
//! shuffled, since parsers must not rely on it. Used by the tests, the
//! examples and the benchmark corpus.

use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngExt, SeedableRng};

use crate::docbank::{build_record, parse_page, BBox, Color, Label, LayoutConfig, PageRecord, SemanticToken};

const WORDS: &[&str] = &[
    "radiation", "energy", "refractivity", "atmosphere", "shower", "geometry", "zenith", "angle", "simulation",
    "detector", "signal", "measurement", "uncertainty", "deviation", "model", "baseline", "accuracy", "dataset",
    "table", "caption", "generation", "retrieval", "sentence", "document", "layout", "token", "value", "method",
    "result", "experiment", "parameter", "estimate", "density", "profile", "spectrum", "frequency", "amplitude",
    "the", "of", "and", "for", "with", "in", "on", "from", "at", "by", "each", "all", "mean", "normalized", "shows",
    "reports", "compares", "describes", "observed", "expected", "higher", "lower", "different", "random", "seeds",
];

const HEADER_WORDS: &[&str] =
    &["method", "energy", "error", "score", "refractivity", "model", "setting", "variant", "level", "ratio"];

const NUMBERS: &[&str] = &["10.97", "(0.21)", "2.04e-4", "+5%", "0.03", "11.29", "(-10%)", "9.84", "1,024", "3/4"];

const LINE_HEIGHT: u16 = 10;
const LINE_STEP: u16 = 14;
const WORD_GAP: u16 = 6;

/// What to put on a synthetic page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageSpec {
    pub page_id: String,
    pub columns: usize,
    pub tables: usize,
    pub body_sentences: usize,
    pub caption_sentences: usize,
    pub table_rows: usize,
    pub table_cols: usize,
    /// Put "Table N" into one body sentence so author matching has a target.
    pub cite_table: bool,
    pub table_number: usize,
}

impl PageSpec {
    /// A page that satisfies every corpus criterion.
    pub fn valid(page_id: impl Into<String>) -> Self {
        Self {
            page_id: page_id.into(),
            columns: 1,
            tables: 1,
            body_sentences: 5,
            caption_sentences: 3,
            table_rows: 4,
            table_cols: 3,
            cite_table: true,
            table_number: 2,
        }
    }
}

/// Generated annotation lines plus the structure they encode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPage {
    pub spec: PageSpec,
    pub lines: Vec<String>,
    pub body: Vec<String>,
    pub caption: Vec<String>,
    pub table: Vec<Vec<String>>,
}

impl SyntheticPage {
    pub fn text(&self) -> String {
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}

fn word_width(word: &str) -> u16 {
    (word.chars().count() as u16 * 6).max(6)
}

fn sentence(rng: &mut StdRng, min_words: usize, max_words: usize) -> Vec<String> {
    let n = rng.random_range(min_words..=max_words);
    let mut words: Vec<String> = (0..n).map(|_| WORDS.choose(rng).expect("vocabulary").to_string()).collect();
    let mut first = words[0].chars();
    if let Some(c) = first.next() {
        words[0] = c.to_uppercase().chain(first).collect();
    }
    if let Some(last) = words.last_mut() {
        last.push('.');
    }
    words
}

struct Canvas {
    tokens: Vec<SemanticToken>,
    left: u16,
    right: u16,
    y: u16,
}

impl Canvas {
    fn push(&mut self, text: &str, bbox: BBox, label: Label) {
        self.tokens.push(SemanticToken {
            text: text.to_string(),
            bbox,
            color: Color { r: 0, g: 0, b: 0 },
            font: "NimbusRomNo9L-Regu".to_string(),
            label,
        });
    }

    /// Flow words left to right, wrapping at the right margin.
    fn flow(&mut self, words: &[String], label: Label) {
        let mut x = self.left;
        for word in words {
            let w = word_width(word);
            if x > self.left && x + w > self.right {
                x = self.left;
                self.y += LINE_STEP;
            }
            self.push(word, BBox::new(x, self.y, x + w, self.y + LINE_HEIGHT), label);
            x += w + WORD_GAP;
        }
        self.y += LINE_STEP;
    }

    fn table(&mut self, rows: &[Vec<String>]) {
        let cols = rows.iter().map(Vec::len).max().unwrap_or(1) as u16;
        let col_width = (self.right - self.left) / cols;
        for row in rows {
            for (j, cell) in row.iter().enumerate() {
                let mut x = self.left + j as u16 * col_width;
                for word in cell.split_whitespace() {
                    let w = word_width(word);
                    self.push(word, BBox::new(x, self.y, x + w, self.y + LINE_HEIGHT), Label::Table);
                    x += w + WORD_GAP;
                }
            }
            self.y += LINE_STEP + 2;
        }
    }
}

fn table_rows(rng: &mut StdRng, rows: usize, cols: usize) -> Vec<Vec<String>> {
    let mut out = Vec::with_capacity(rows);
    let header: Vec<String> = (0..cols)
        .map(|_| {
            let n = rng.random_range(1..=2);
            (0..n).map(|_| *HEADER_WORDS.choose(rng).expect("header words")).collect::<Vec<_>>().join(" ")
        })
        .collect();
    out.push(header);
    for _ in 1..rows {
        let mut row = vec![WORDS[..37].choose(rng).expect("vocabulary").to_string()];
        row.extend((1..cols).map(|_| NUMBERS.choose(rng).expect("numbers").to_string()));
        out.push(row);
    }
    out
}

/// Lay out a page according to `spec`. The same seed always yields the same page.
pub fn synthesize_page(spec: &PageSpec, seed: u64) -> SyntheticPage {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut body: Vec<Vec<String>> = (0..spec.body_sentences).map(|_| sentence(&mut rng, 8, 16)).collect();
    if spec.cite_table && !body.is_empty() {
        let at = rng.random_range(0..body.len());
        let mut cited = vec!["Results".to_string(), "are".into(), "listed".into(), "in".into(), "Table".into()];
        cited.push(format!("{}.", spec.table_number));
        body[at] = cited;
    }
    let mut caption: Vec<Vec<String>> = (0..spec.caption_sentences).map(|_| sentence(&mut rng, 6, 12)).collect();
    if let Some(first) = caption.first_mut() {
        first.insert(0, format!("{}.", spec.table_number));
        first.insert(0, "Table".into());
    }
    let tables: Vec<Vec<Vec<String>>> =
        (0..spec.tables).map(|_| table_rows(&mut rng, spec.table_rows.max(1), spec.table_cols.max(1))).collect();

    let body_words: Vec<String> = body.iter().flatten().cloned().collect();
    let caption_words: Vec<String> = caption.iter().flatten().cloned().collect();

    let mut tokens = Vec::new();
    if spec.columns >= 2 {
        // two columns with a wide gutter; the table sits below both
        let half = body_words.len() / 2;
        let mut left = Canvas { tokens: Vec::new(), left: 50, right: 400, y: 80 };
        left.flow(&body_words[..half], Label::Paragraph);
        let mut right = Canvas { tokens: Vec::new(), left: 600, right: 950, y: 80 };
        right.flow(&body_words[half..], Label::Paragraph);
        let mut bottom = Canvas { tokens: Vec::new(), left: 100, right: 900, y: left.y.max(right.y) + 30 };
        bottom.flow(&caption_words, Label::Caption);
        bottom.y += 4;
        for table in &tables {
            bottom.table(table);
            bottom.y += 60;
        }
        tokens.extend(left.tokens);
        tokens.extend(right.tokens);
        tokens.extend(bottom.tokens);
    } else {
        let mut page = Canvas { tokens: Vec::new(), left: 100, right: 900, y: 80 };
        let split = body.len().div_ceil(2);
        let before: Vec<String> = body[..split].iter().flatten().cloned().collect();
        let after: Vec<String> = body[split..].iter().flatten().cloned().collect();
        page.flow(&before, Label::Paragraph);
        page.y += 30;
        page.flow(&caption_words, Label::Caption);
        page.y += 4;
        for (i, table) in tables.iter().enumerate() {
            page.table(table);
            page.y += 30;
            if i + 1 < tables.len() {
                // keep the next table well apart
                page.flow(&sentence(&mut rng, 10, 14), Label::Paragraph);
                page.y += 180;
            }
        }
        page.flow(&after, Label::Paragraph);
        tokens = page.tokens;
    }

    let mut lines: Vec<String> = tokens.iter().map(SemanticToken::to_line).collect();
    lines.shuffle(&mut rng);

    let join = |s: &Vec<String>| s.join(" ");
    SyntheticPage {
        spec: spec.clone(),
        lines,
        body: body.iter().map(join).collect(),
        caption: caption.iter().map(join).collect(),
        table: tables.into_iter().next().unwrap_or_default(),
    }
}

/// Random valid page spec: one column, one table, cited in the body about half the time.
pub fn random_valid_spec(page_id: impl Into<String>, rng: &mut StdRng) -> PageSpec {
    PageSpec {
        page_id: page_id.into(),
        columns: 1,
        tables: 1,
        body_sentences: rng.random_range(3..=9),
        caption_sentences: rng.random_range(2..=4),
        table_rows: rng.random_range(2..=6),
        table_cols: rng.random_range(2..=4),
        cite_table: rng.random_bool(0.5),
        table_number: rng.random_range(1..=9),
    }
}

/// `n` records built by running generated pages through the parser and the
/// record builder.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<PageRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    let config = LayoutConfig::default();
    (0..n)
        .map(|i| {
            let spec = random_valid_spec(format!("synthetic-{i:04}"), &mut rng);
            let page = synthesize_page(&spec, rng.random());
            let layout = parse_page(&spec.page_id, &page.lines, config.band_overlap).expect("generated lines parse");
            build_record(&layout, &config).expect("generated valid page is accepted")
        })
        .collect()
}
