//! Independent reference implementations and fixture builders shared by the
//! integration tests. Nothing here calls into the scoring code it checks.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::RngExt;
use tabcap::docbank::Label;
use tabcap::synthetic::{synthesize_page, PageSpec, SyntheticPage};

pub const TOLERANCE: f64 = 1e-9;

/// Four-symbol alphabet where two pairs of words share a stem.
pub const ALPHABET: [&str; 4] = ["run", "runs", "cat", "cats"];

/// Stems written out by hand for every word the oracle tests use.
pub fn hand_stem(word: &str) -> &'static str {
    match word {
        "run" | "runs" | "running" => "run",
        "ran" => "ran",
        "cat" | "cats" => "cat",
        "the" => "the",
        "sat" => "sat",
        "on" => "on",
        "mat" | "mats" => "mat",
        "is" => "is",
        "a" => "a",
        "b" => "b",
        "c" => "c",
        "d" => "d",
        "e" => "e",
        "slept" => "slept",
        "well" => "well",
        "dog" | "dogs" => "dog",
        "shower" | "showers" => "shower",
        "air" => "air",
        "mean" => "mean",
        "of" => "of",
        "each" => "each",
        "cell" | "cells" => "cell",
        "show" | "shows" | "showing" => "show",
        "table" | "tables" => "tabl",
        "energy" | "energies" => "energi",
        "radiation" => "radiat",
        "normalized" => "normal",
        other => panic!("no hand stem for {other:?}"),
    }
}

pub fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn ngrams<'a>(tokens: &[&'a str], n: usize) -> Vec<Vec<&'a str>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

/// Clipped matches by occurrence rank: the k-th occurrence of a candidate
/// n-gram matches when the reference holds at least k copies of it.
pub fn clipped(candidate: &[&str], reference: &[&str], n: usize) -> usize {
    let cand = ngrams(candidate, n);
    let refs = ngrams(reference, n);
    let mut matches = 0;
    for (i, gram) in cand.iter().enumerate() {
        let rank = cand[..=i].iter().filter(|g| *g == gram).count();
        let available = refs.iter().filter(|g| *g == gram).count();
        if rank <= available {
            matches += 1;
        }
    }
    matches
}

fn count_ngrams(tokens: &[&str], n: usize) -> usize {
    ngrams(tokens, n).len()
}

/// Per-order counts `(matches, totals)` for BLEU.
pub fn bleu_counts(candidate: &[&str], reference: &[&str]) -> [(usize, usize); 4] {
    std::array::from_fn(|i| (clipped(candidate, reference, i + 1), count_ngrams(candidate, i + 1)))
}

/// BLEU from pooled counts: product of precisions to the quarter power,
/// with add-one smoothing on empty higher orders.
pub fn bleu_from(counts: [(usize, usize); 4], cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 || counts[0].0 == 0 {
        return 0.0;
    }
    let mut product = 1.0;
    for (n, &(m, t)) in counts.iter().enumerate() {
        let p = if n > 0 && m == 0 { 1.0 / (t as f64 + 1.0) } else { m as f64 / t as f64 };
        product *= p;
    }
    let bp = if cand_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    100.0 * bp * product.powf(0.25)
}

pub fn bleu(candidate: &[&str], reference: &[&str]) -> f64 {
    bleu_from(bleu_counts(candidate, reference), candidate.len(), reference.len())
}

pub fn rouge_n_recall(candidate: &[&str], reference: &[&str], n: usize) -> Option<f64> {
    let total = count_ngrams(reference, n);
    (total > 0).then(|| clipped(candidate, reference, n) as f64 / total as f64)
}

pub fn f1(matches: usize, cand_total: usize, ref_total: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / cand_total as f64;
    let r = matches as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge_n_f1(candidate: &[&str], reference: &[&str], n: usize) -> Option<f64> {
    let total = count_ngrams(reference, n);
    (total > 0).then(|| f1(clipped(candidate, reference, n), count_ngrams(candidate, n), total))
}

/// Longest common subsequence by trying every subsequence of the shorter side.
pub fn lcs_brute(a: &[&str], b: &[&str]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "brute-force LCS is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let picked: Vec<&str> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| short[i]).collect();
        if picked.len() > best && is_subsequence(&picked, long) {
            best = picked.len();
        }
    }
    best
}

fn is_subsequence(needle: &[&str], hay: &[&str]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|w| it.any(|h| h == w))
}

/// Textbook full-table LCS.
pub fn lcs_table(a: &[&str], b: &[&str]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t[a.len()][b.len()]
}

pub fn rouge_l_recall(candidate: &[&str], reference: &[&str]) -> Option<f64> {
    (!reference.is_empty()).then(|| lcs_brute(candidate, reference) as f64 / reference.len() as f64)
}

/// Alignment statistics chosen by exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeteorCounts {
    pub exact: usize,
    pub matches: usize,
    pub crossings: usize,
    pub chunks: usize,
}

fn crossings_of(edges: &[(usize, usize)]) -> usize {
    let mut total = 0;
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            let (a, b) = (edges[i], edges[j]);
            if (a.0 as isize - b.0 as isize) * (a.1 as isize - b.1 as isize) < 0 {
                total += 1;
            }
        }
    }
    total
}

fn chunks_of(edges: &[(usize, usize)]) -> usize {
    let mut sorted = edges.to_vec();
    sorted.sort();
    let mut chunks = 0;
    for (k, &(c, r)) in sorted.iter().enumerate() {
        if k == 0 || !(sorted[k - 1].0 + 1 == c && sorted[k - 1].1 + 1 == r) {
            chunks += 1;
        }
    }
    chunks
}

/// Enumerate every one-to-one alignment over stem-compatible word pairs and
/// keep the one with the most exact links, then the most links, then the
/// fewest crossings, then the fewest chunks.
pub fn meteor_alignment(candidate: &[&str], reference: &[&str]) -> MeteorCounts {
    fn walk(
        i: usize,
        cand: &[&str],
        refr: &[&str],
        used: &mut Vec<bool>,
        edges: &mut Vec<(usize, usize)>,
        best: &mut Option<(isize, isize, usize, usize)>,
    ) {
        if i == cand.len() {
            let exact = edges.iter().filter(|&&(c, r)| cand[c] == refr[r]).count();
            let key = (-(exact as isize), -(edges.len() as isize), crossings_of(edges), chunks_of(edges));
            if best.is_none_or(|b| key < b) {
                *best = Some(key);
            }
            return;
        }
        walk(i + 1, cand, refr, used, edges, best);
        for j in 0..refr.len() {
            if !used[j] && hand_stem(cand[i]) == hand_stem(refr[j]) {
                used[j] = true;
                edges.push((i, j));
                walk(i + 1, cand, refr, used, edges, best);
                edges.pop();
                used[j] = false;
            }
        }
    }
    let mut best = None;
    walk(0, candidate, reference, &mut vec![false; reference.len()], &mut Vec::new(), &mut best);
    let (e, m, crossings, chunks) = best.expect("the empty alignment always exists");
    MeteorCounts { exact: (-e) as usize, matches: (-m) as usize, crossings, chunks }
}

/// Fmean with α = 0.9 is 10PR / (R + 9P); the fragmentation penalty is
/// 0.5 · (chunks/m)³.
pub fn meteor_formula(matches: usize, cand_len: usize, ref_len: usize, chunks: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}

pub fn meteor(candidate: &[&str], reference: &[&str]) -> f64 {
    let a = meteor_alignment(candidate, reference);
    meteor_formula(a.matches, candidate.len(), reference.len(), a.chunks)
}

/// Every sequence over `alphabet` of length 0..=max_len.
pub fn all_sequences<'a>(alphabet: &[&'a str], max_len: usize) -> Vec<Vec<&'a str>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for &w in alphabet {
                let mut s: Vec<&str> = seq.clone();
                s.push(w);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn random_sequence<'a>(rng: &mut StdRng, alphabet: &[&'a str], max_len: usize) -> Vec<&'a str> {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// BM25 computed from scratch for every sentence, with the same
/// parameters and idf form as the index.
pub fn bm25_scores(sentences: &[Vec<&str>], query: &[&str], k1: f64, b: f64) -> Vec<f64> {
    let n = sentences.len() as f64;
    let avg = sentences.iter().map(Vec::len).sum::<usize>() as f64 / n;
    sentences
        .iter()
        .map(|s| {
            let mut score = 0.0;
            for q in query {
                let tf = s.iter().filter(|w| *w == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = sentences.iter().filter(|t| t.contains(q)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * s.len() as f64 / avg));
            }
            score
        })
        .collect()
}

/// Positions of the `n` best sentences: score descending, position
/// ascending among scores equal within a relative 1e-12.
pub fn bm25_rank(scores: &[f64], n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 1e-12).collect();
    ids.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a], scores[b]);
        if (sa - sb).abs() <= 1e-12 * sa.abs().max(sb.abs()) {
            a.cmp(&b)
        } else {
            sb.total_cmp(&sa)
        }
    });
    ids.truncate(n);
    ids
}

/// Hand-labelled token pool: `true` marks numerals.
pub const NUMERAL_POOL: &[(&str, bool)] = &[
    ("10.97", true),
    ("±", false),
    ("0.03", true),
    ("(0.21)", true),
    ("MeV", false),
    ("1,024", true),
    ("-3", true),
    ("+5%", true),
    ("2.04e-4", true),
    ("10--4", true),
    ("3/4", true),
    ("12×10", true),
    ("[7]", true),
    ("n0", false),
    ("refractivity", false),
    ("T5", false),
    ("GPT-2", false),
    ("--", false),
    ("%", false),
    ("(a)", false),
    ("x2", false),
    ("level", false),
    ("1.5±0.2", true),
    ("99%", true),
];

/// Random cell text mixing words and numerals.
pub fn random_cell(rng: &mut StdRng) -> String {
    let words = rng.random_range(1..=3);
    (0..words).map(|_| NUMERAL_POOL.choose(rng).unwrap().0).collect::<Vec<_>>().join(" ")
}

pub fn random_ragged_table(rng: &mut StdRng) -> Vec<Vec<String>> {
    let rows = rng.random_range(1..=6);
    (0..rows)
        .map(|_| {
            let cells = rng.random_range(1..=5);
            (0..cells).map(|_| random_cell(rng)).collect()
        })
        .collect()
}

pub fn multiset(tokens: &[String]) -> std::collections::BTreeMap<&str, usize> {
    let mut m = std::collections::BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// A generated page plus the filter decision its construction implies.
pub struct Fixture {
    pub name: String,
    pub lines: Vec<String>,
    pub page: SyntheticPage,
    /// Reason fragment expected in the rejection, or `None` when accepted.
    pub rejects_with: Option<&'static str>,
}

fn fixture(name: &str, spec: PageSpec, seed: u64, rejects_with: Option<&'static str>) -> Fixture {
    let page = synthesize_page(&PageSpec { page_id: name.to_string(), ..spec }, seed);
    Fixture { name: name.to_string(), lines: page.lines.clone(), page, rejects_with }
}

/// Drop the period from the last paragraph token in reading order.
fn unterminate_last_sentence(lines: &mut [String]) {
    let paragraph = Label::Paragraph.to_string();
    let last = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.split('\t').nth(9) == Some(paragraph.as_str()))
        .max_by_key(|(_, l)| {
            let f: Vec<u16> = l.split('\t').skip(1).take(2).map(|v| v.parse().unwrap()).collect();
            (f[1], f[0])
        })
        .map(|(i, _)| i)
        .expect("page has paragraph tokens");
    let mut fields: Vec<String> = lines[last].split('\t').map(String::from).collect();
    fields[0] = fields[0].trim_end_matches('.').to_string();
    lines[last] = fields.join("\t");
}

/// Twelve-plus pages covering each filter criterion.
pub fn dataset_fixtures() -> Vec<Fixture> {
    let valid = PageSpec::valid("");
    let mut out = vec![
        fixture("valid-basic", valid.clone(), 1, None),
        fixture("valid-counts", PageSpec { body_sentences: 4, caption_sentences: 2, table_rows: 3, cite_table: false, ..valid.clone() }, 2, None),
        fixture("valid-three-sentences", PageSpec { body_sentences: 3, ..valid.clone() }, 3, None),
        fixture("valid-wide-table", PageSpec { table_cols: 4, table_rows: 6, ..valid.clone() }, 4, None),
        fixture("valid-long-body", PageSpec { body_sentences: 9, ..valid.clone() }, 5, None),
        fixture("valid-one-row", PageSpec { table_rows: 1, table_cols: 2, ..valid.clone() }, 6, None),
        fixture("valid-single-caption", PageSpec { caption_sentences: 1, ..valid.clone() }, 7, None),
        fixture("two-tables", PageSpec { tables: 2, ..valid.clone() }, 8, Some("multiple tables")),
        fixture("three-tables", PageSpec { tables: 3, ..valid.clone() }, 9, Some("multiple tables")),
        fixture("two-columns", PageSpec { columns: 2, body_sentences: 8, ..valid.clone() }, 10, Some("two-column")),
        fixture("two-sentences", PageSpec { body_sentences: 2, cite_table: false, ..valid.clone() }, 11, Some("too few")),
        fixture("no-table", PageSpec { tables: 0, ..valid.clone() }, 12, Some("no table")),
    ];
    let mut fragment = fixture("incomplete-third-sentence", PageSpec { body_sentences: 3, cite_table: false, ..valid }, 13, Some("too few"));
    unterminate_last_sentence(&mut fragment.lines);
    out.push(fragment);
    out
}
