//! METEOR with exact and stem matching.
//!
//! Unigrams are aligned in two stages: exact surface matches first, then
//! matches between the Porter-style stems of whatever is left. Each stage
//! matches as many tokens as possible. Among all maximal alignments the one
//! with the fewest crossing links wins, then the one with the fewest chunks.
//!
//! ```text
//! P = m / |candidate|   R = m / |reference|
//! Fmean   = P·R / (α·P + (1 − α)·R)
//! penalty = γ · (chunks / m)^β
//! score   = Fmean · (1 − penalty)
//! ```

use std::collections::BTreeMap;
use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::text::tokenize;

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Search steps after which the alignment search settles for the best
/// alignment found so far. Inputs with few repeated words never get near it.
const SEARCH_BUDGET: usize = 50_000;

pub fn stem(word: &str) -> String {
    STEMMER.stem(word).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self { alpha: 0.9, beta: 3.0, gamma: 0.5 }
    }
}

/// Unigram alignment between candidate and reference positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `(candidate position, reference position)`, sorted by candidate position.
    pub pairs: Vec<(usize, usize)>,
    pub exact: usize,
    pub stemmed: usize,
    pub crossings: usize,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

/// Number of maximal runs of links adjacent on both sides.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .enumerate()
        .filter(|&(k, &(c, r))| k == 0 || sorted[k - 1] != (c.wrapping_sub(1), r.wrapping_sub(1)))
        .count()
}

pub fn count_crossings(pairs: &[(usize, usize)]) -> usize {
    let mut total = 0;
    for (k, a) in pairs.iter().enumerate() {
        total += pairs[k + 1..].iter().filter(|b| crosses(a, b)).count();
    }
    total
}

fn crosses(a: &(usize, usize), b: &(usize, usize)) -> bool {
    (a.0 < b.0 && a.1 > b.1) || (a.0 > b.0 && a.1 < b.1)
}

/// Tokens sharing a matching key: the smaller side is matched in full, in
/// order, against a chosen subset of the larger side.
struct Group {
    small: Vec<usize>,
    large: Vec<usize>,
    candidate_is_small: bool,
}

impl Group {
    fn edges(&self, choice: &[usize]) -> Vec<(usize, usize)> {
        self.small
            .iter()
            .zip(choice.iter().map(|&k| self.large[k]))
            .map(|(&s, l)| if self.candidate_is_small { (s, l) } else { (l, s) })
            .collect()
    }
}

fn groups_by_key(cand: &[usize], refr: &[usize], cand_key: &[String], ref_key: &[String]) -> Vec<Group> {
    let mut buckets: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for &c in cand {
        buckets.entry(cand_key[c].as_str()).or_default().0.push(c);
    }
    for &r in refr {
        if let Some(bucket) = buckets.get_mut(ref_key[r].as_str()) {
            bucket.1.push(r);
        }
    }
    buckets
        .into_values()
        .filter(|(c, r)| !c.is_empty() && !r.is_empty())
        .map(|(c, r)| {
            if c.len() <= r.len() {
                Group { small: c, large: r, candidate_is_small: true }
            } else {
                Group { small: r, large: c, candidate_is_small: false }
            }
        })
        .collect()
}

/// Advance `combo` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Best alignment so far: crossings, chunks, links, exact links.
type Candidate = (usize, usize, Vec<(usize, usize)>, usize);

struct Search<'a> {
    cand_words: &'a [String],
    ref_words: &'a [String],
    cand_stems: Vec<String>,
    ref_stems: Vec<String>,
    exact: usize,
    best: Option<Candidate>,
    steps: usize,
}

impl Search<'_> {
    fn exhausted(&self) -> bool {
        self.steps >= SEARCH_BUDGET && self.best.is_some()
    }

    fn run(&mut self, stage: u8, groups: &[Group], edges: &mut Vec<(usize, usize)>, crossings: usize) {
        if self.exhausted() {
            return;
        }
        let Some((group, rest)) = groups.split_first() else {
            if stage == 1 {
                self.exact = edges.len();
                let stage_two = self.stem_groups(edges);
                self.run(2, &stage_two, edges, crossings);
            } else {
                let chunks = count_chunks(edges);
                let better = match &self.best {
                    None => true,
                    Some((bc, bk, _, _)) => (crossings, chunks) < (*bc, *bk),
                };
                if better {
                    self.best = Some((crossings, chunks, edges.clone(), self.exact));
                }
            }
            return;
        };

        let mut combo: Vec<usize> = (0..group.small.len()).collect();
        loop {
            self.steps += 1;
            let added = group.edges(&combo);
            let extra: usize = added.iter().map(|a| edges.iter().filter(|b| crosses(a, b)).count()).sum();
            let total = crossings + extra;
            if self.best.as_ref().is_none_or(|(bc, ..)| total <= *bc) {
                let len = edges.len();
                edges.extend(added);
                self.run(stage, rest, edges, total);
                edges.truncate(len);
            }
            if self.exhausted() || !next_combination(&mut combo, group.large.len()) {
                break;
            }
        }
    }

    fn stem_groups(&self, edges: &[(usize, usize)]) -> Vec<Group> {
        let cand: Vec<usize> = (0..self.cand_words.len()).filter(|c| !edges.iter().any(|e| e.0 == *c)).collect();
        let refr: Vec<usize> = (0..self.ref_words.len()).filter(|r| !edges.iter().any(|e| e.1 == *r)).collect();
        groups_by_key(&cand, &refr, &self.cand_stems, &self.ref_stems)
    }
}

/// Align two token sequences (already tokenized).
pub fn align(candidate: &[String], reference: &[String]) -> Alignment {
    let mut search = Search {
        cand_words: candidate,
        ref_words: reference,
        cand_stems: candidate.iter().map(|w| stem(w)).collect(),
        ref_stems: reference.iter().map(|w| stem(w)).collect(),
        exact: 0,
        best: None,
        steps: 0,
    };
    let all_cand: Vec<usize> = (0..candidate.len()).collect();
    let all_ref: Vec<usize> = (0..reference.len()).collect();
    let stage_one = groups_by_key(&all_cand, &all_ref, candidate, reference);
    search.run(1, &stage_one, &mut Vec::new(), 0);

    let (crossings, chunks, mut pairs, exact) = search.best.unwrap_or((0, 0, Vec::new(), 0));
    pairs.sort_unstable();
    let stemmed = pairs.len() - exact;
    Alignment { pairs, exact, stemmed, crossings, chunks }
}

/// Score from alignment statistics.
pub fn meteor_from_counts(matches: usize, cand_len: usize, ref_len: usize, chunks: usize, params: &MeteorParams) -> f64 {
    if matches == 0 || cand_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let precision = m / cand_len as f64;
    let recall = m / ref_len as f64;
    let fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let penalty = params.gamma * (chunks as f64 / m).powf(params.beta);
    fmean * (1.0 - penalty)
}

pub fn meteor_tokens(candidate: &[String], reference: &[String], params: &MeteorParams) -> f64 {
    let alignment = align(candidate, reference);
    meteor_from_counts(alignment.matches(), candidate.len(), reference.len(), alignment.chunks, params)
}

/// METEOR with the default parameters (α = 0.9, β = 3, γ = 0.5).
pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_tokens(&tokenize(candidate), &tokenize(reference), &MeteorParams::default())
}
