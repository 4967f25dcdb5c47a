//! Caption scoring: BLEU, ROUGE-1/2/L and METEOR over the shared tokenizer.
//!
//! BLEU uses clipped n-gram precision up to 4-grams, the brevity penalty and
//! add-one smoothing for higher-order precisions with no matches; it is
//! reported on the 0–100 scale. ROUGE scores are recall by default, with an
//! F1 mode available. METEOR matches exact words then stems; there is no
//! synonym stage.

pub mod meteor;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::tokenize;

pub use meteor::{align, meteor, meteor_from_counts, meteor_tokens, Alignment, MeteorParams};

pub const MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "BLEU")]
    Bleu,
    #[serde(rename = "ROUGE-1")]
    Rouge1,
    #[serde(rename = "ROUGE-2")]
    Rouge2,
    #[serde(rename = "ROUGE-L")]
    RougeL,
    #[serde(rename = "METEOR")]
    Meteor,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Bleu, Metric::Rouge1, Metric::Rouge2, Metric::RougeL, Metric::Meteor];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Bleu => "BLEU",
            Metric::Rouge1 => "ROUGE-1",
            Metric::Rouge2 => "ROUGE-2",
            Metric::RougeL => "ROUGE-L",
            Metric::Meteor => "METEOR",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RougeMode {
    #[default]
    Recall,
    F1,
}

impl FromStr for RougeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recall" => Ok(Self::Recall),
            "f1" => Ok(Self::F1),
            other => Err(format!("unknown ROUGE mode {other:?} (expected recall or f1)")),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("{metric} undefined: reference has {len} token(s), needs at least {needed}")]
    UndefinedScore { metric: Metric, len: usize, needed: usize },
    #[error("no pairs to evaluate")]
    EmptyCorpus,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches between candidate and reference.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> usize {
    let reference = ngram_counts(reference, n);
    ngram_counts(candidate, n).into_iter().map(|(gram, count)| count.min(reference.get(gram).copied().unwrap_or(0))).sum()
}

fn ngram_total(tokens: &[String], n: usize) -> usize {
    tokens.len().saturating_sub(n - 1)
}

/// Sufficient statistics for BLEU; summing them pools a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [usize; MAX_NGRAM],
    pub totals: [usize; MAX_NGRAM],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn from_tokens(candidate: &[String], reference: &[String]) -> Self {
        let mut stats = Self { candidate_len: candidate.len(), reference_len: reference.len(), ..Default::default() };
        for n in 1..=MAX_NGRAM {
            stats.matches[n - 1] = clipped_matches(candidate, reference, n);
            stats.totals[n - 1] = ngram_total(candidate, n);
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for i in 0..MAX_NGRAM {
            self.matches[i] += other.matches[i];
            self.totals[i] += other.totals[i];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// Smoothed n-gram precisions, unigram first.
    pub fn precisions(&self) -> [f64; MAX_NGRAM] {
        std::array::from_fn(|i| {
            let (m, t) = (self.matches[i], self.totals[i]);
            if i > 0 && m == 0 {
                1.0 / (t as f64 + 1.0)
            } else if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            }
        })
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if c == 0.0 {
            0.0
        } else if c > r {
            1.0
        } else {
            (1.0 - r / c).exp()
        }
    }

    /// BLEU on the 0–100 scale.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let log_mean = self.precisions().iter().map(|p| p.ln()).sum::<f64>() / MAX_NGRAM as f64;
        (100.0 * self.brevity_penalty() * log_mean.exp()).clamp(0.0, 100.0)
    }
}

pub fn bleu_tokens(candidate: &[String], reference: &[String]) -> f64 {
    BleuStats::from_tokens(candidate, reference).score()
}

/// Sentence-level BLEU in [0, 100]. An empty candidate scores 0.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    bleu_tokens(&tokenize(candidate), &tokenize(reference))
}

fn combine(matches: usize, cand_total: usize, ref_total: usize, mode: RougeMode) -> f64 {
    let recall = matches as f64 / ref_total as f64;
    match mode {
        RougeMode::Recall => recall,
        RougeMode::F1 => {
            if matches == 0 || cand_total == 0 {
                return 0.0;
            }
            let precision = matches as f64 / cand_total as f64;
            2.0 * precision * recall / (precision + recall)
        }
    }
}

pub fn rouge_n_tokens(candidate: &[String], reference: &[String], n: usize, mode: RougeMode) -> Result<f64, MetricError> {
    let metric = if n == 2 { Metric::Rouge2 } else { Metric::Rouge1 };
    if n == 0 || reference.len() < n {
        return Err(MetricError::UndefinedScore { metric, len: reference.len(), needed: n.max(1) });
    }
    let matches = clipped_matches(candidate, reference, n);
    Ok(combine(matches, ngram_total(candidate, n), ngram_total(reference, n), mode))
}

/// ROUGE-N recall: clipped n-gram matches over reference n-grams.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<f64, MetricError> {
    rouge_n_tokens(&tokenize(candidate), &tokenize(reference), n, RougeMode::Recall)
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l_tokens(candidate: &[String], reference: &[String], mode: RougeMode) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::UndefinedScore { metric: Metric::RougeL, len: 0, needed: 1 });
    }
    Ok(combine(lcs_len(candidate, reference), candidate.len(), reference.len(), mode))
}

/// ROUGE-L recall: LCS length over reference length.
pub fn rouge_l(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference), RougeMode::Recall)
}

/// Per-pair scores. ROUGE entries are `None` when the reference is too short.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub bleu: f64,
    pub rouge_1: Option<f64>,
    pub rouge_2: Option<f64>,
    pub rouge_l: Option<f64>,
    pub meteor: f64,
}

impl MetricScores {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Bleu => Some(self.bleu),
            Metric::Rouge1 => self.rouge_1,
            Metric::Rouge2 => self.rouge_2,
            Metric::RougeL => self.rouge_l,
            Metric::Meteor => Some(self.meteor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    pub candidate: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub candidate: String,
    pub reference: String,
    pub scores: MetricScores,
}

/// Settings that shape the numbers in a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub rouge_mode: RougeMode,
    pub meteor: MeteorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: MetricConfig,
    /// How METEOR matched unigrams.
    pub meteor_matching: String,
    pub pairs: Vec<ScoredPair>,
    /// Corpus BLEU from pooled statistics; other metrics are means over the
    /// pairs where they are defined.
    pub aggregate: MetricScores,
}

pub const METEOR_MATCHING: &str = "exact+stem (no synonym stage)";

pub fn score_pair(candidate: &str, reference: &str, config: &MetricConfig) -> (MetricScores, BleuStats) {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    let stats = BleuStats::from_tokens(&c, &r);
    let scores = MetricScores {
        bleu: stats.score(),
        rouge_1: rouge_n_tokens(&c, &r, 1, config.rouge_mode).ok(),
        rouge_2: rouge_n_tokens(&c, &r, 2, config.rouge_mode).ok(),
        rouge_l: rouge_l_tokens(&c, &r, config.rouge_mode).ok(),
        meteor: meteor_tokens(&c, &r, &config.meteor),
    };
    (scores, stats)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Score every pair and aggregate. Pairs are scored in parallel; the
/// aggregation order is the input order.
pub fn evaluate_corpus(pairs: &[PairInput], config: &MetricConfig) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let scored: Vec<(MetricScores, BleuStats)> =
        pairs.par_iter().map(|p| score_pair(&p.candidate, &p.reference, config)).collect();

    let mut pooled = BleuStats::default();
    for (_, stats) in &scored {
        pooled.add(stats);
    }
    let aggregate = MetricScores {
        bleu: pooled.score(),
        rouge_1: mean(scored.iter().map(|(s, _)| s.rouge_1)),
        rouge_2: mean(scored.iter().map(|(s, _)| s.rouge_2)),
        rouge_l: mean(scored.iter().map(|(s, _)| s.rouge_l)),
        meteor: mean(scored.iter().map(|(s, _)| Some(s.meteor))).unwrap_or(0.0),
    };
    Ok(MetricReport {
        config: *config,
        meteor_matching: METEOR_MATCHING.into(),
        pairs: pairs
            .iter()
            .zip(scored)
            .map(|(p, (scores, _))| ScoredPair { candidate: p.candidate.clone(), reference: p.reference.clone(), scores })
            .collect(),
        aggregate,
    })
}

/// Per-pair scores as CSV; undefined ROUGE values are left empty.
pub fn pairs_csv(report: &MetricReport) -> Result<String, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    writer.write_record(&header)?;
    for (i, pair) in report.pairs.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(Metric::ALL.iter().map(|&m| pair.scores.get(m).map(|v| format!("{v:.6}")).unwrap_or_default()));
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn perfect_and_disjoint_bleu() {
        assert_eq!(bleu("the cat sat on the mat", "the cat sat on the mat"), 100.0);
        assert_eq!(bleu("alpha beta gamma", "delta epsilon zeta"), 0.0);
        assert_eq!(bleu("", "delta epsilon zeta"), 0.0);
    }

    #[test]
    fn bleu_counts_for_cat_example() {
        let stats = BleuStats::from_tokens(&toks("the cat sat on the mat"), &toks("the cat is on the mat"));
        assert_eq!(stats.matches, [5, 3, 1, 0]);
        assert_eq!(stats.totals, [6, 5, 4, 3]);
        assert_eq!(stats.brevity_penalty(), 1.0);
        assert_eq!(stats.precisions()[3], 0.25);
    }

    #[test]
    fn brevity_penalty_applies_to_short_candidates() {
        let stats = BleuStats::from_tokens(&toks("the cat"), &toks("the cat sat on"));
        assert!((stats.brevity_penalty() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_n("the cat sat", "the cat slept well", 1), Ok(0.5));
        assert_eq!(rouge_n("a b c", "a b c", 2), Ok(1.0));
        assert_eq!(rouge_n("a b c", "x y z", 1), Ok(0.0));
        assert!(matches!(rouge_n("a b", "a", 2), Err(MetricError::UndefinedScore { metric: Metric::Rouge2, .. })));
    }

    #[test]
    fn rouge_l_examples() {
        assert_eq!(rouge_l("a b c d", "a c b d"), Ok(0.75));
        assert_eq!(rouge_l("d c b a", "a b c d"), Ok(0.25));
        assert_eq!(rouge_l("a b", "a b"), Ok(1.0));
        assert!(rouge_l("a", "").is_err());
    }

    #[test]
    fn f1_mode() {
        let c = toks("the cat");
        let r = toks("the cat slept well");
        let f1 = rouge_n_tokens(&c, &r, 1, RougeMode::F1).unwrap();
        assert!((f1 - 2.0 * 1.0 * 0.5 / 1.5).abs() < 1e-15);
        assert_eq!(rouge_l_tokens(&[], &r, RougeMode::F1), Ok(0.0));
    }

    #[test]
    fn corpus_single_pair_matches_pair_scores() {
        let pairs = vec![PairInput { candidate: "the cat sat on the mat".into(), reference: "the cat is on the mat".into() }];
        let report = evaluate_corpus(&pairs, &MetricConfig::default()).unwrap();
        assert_eq!(report.aggregate, report.pairs[0].scores);
    }

    #[test]
    fn corpus_perfect_pairs() {
        let pairs: Vec<PairInput> = ["one two three four", "five six seven eight nine"]
            .iter()
            .map(|s| PairInput { candidate: s.to_string(), reference: s.to_string() })
            .collect();
        let report = evaluate_corpus(&pairs, &MetricConfig::default()).unwrap();
        assert_eq!(report.aggregate.bleu, 100.0);
        assert_eq!(report.aggregate.rouge_1, Some(1.0));
        assert_eq!(report.aggregate.rouge_2, Some(1.0));
        assert_eq!(report.aggregate.rouge_l, Some(1.0));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(evaluate_corpus(&[], &MetricConfig::default()).unwrap_err(), MetricError::EmptyCorpus);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let pairs = vec![PairInput { candidate: "a b".into(), reference: "a".into() }];
        let report = evaluate_corpus(&pairs, &MetricConfig::default()).unwrap();
        let csv = pairs_csv(&report).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "pair,BLEU,ROUGE-1,ROUGE-2,ROUGE-L,METEOR");
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[1].split(',').nth(3), Some(""));
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
    }
}
