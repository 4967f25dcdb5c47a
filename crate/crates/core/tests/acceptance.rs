//! Acceptance suite. Each criterion prints one `[PASS]` or `[FAIL]` line;
//! the process exits non-zero if any criterion fails.
//!
//! ```not_rust
//! cargo test -p tabcap --test acceptance
//! ```

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};

use tabcap::docbank::{apply_filter, build_record, check_filter, parse_page, LayoutConfig, PageRecord};
use tabcap::generation::GenerationClient;
use tabcap::harness::{emit_csv, run_grid, Condition, GridConfig};
use tabcap::metrics::meteor::{align, meteor_tokens, MeteorParams};
use tabcap::metrics::{
    bleu, bleu_tokens, evaluate_corpus, rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens, score_pair, Metric,
    MetricConfig, PairInput, RougeMode,
};
use tabcap::retrieval::{build_index, top_n, Bm25Params};
use tabcap::synthetic::synthetic_corpus;
use tabcap::table::{is_numeral, linearize, strip_numerals, LinearizationVariant, Table};

use common::*;

type Outcome = Result<String, String>;

fn close(label: &str, got: f64, want: f64) -> Result<(), String> {
    if (got - want).abs() <= TOLERANCE {
        Ok(())
    } else {
        Err(format!("{label}: got {got}, oracle {want}"))
    }
}

fn close_opt(label: &str, got: Option<f64>, want: Option<f64>) -> Result<(), String> {
    match (got, want) {
        (Some(g), Some(w)) => close(label, g, w),
        (None, None) => Ok(()),
        _ => Err(format!("{label}: got {got:?}, oracle {want:?}")),
    }
}

fn owned(tokens: &[&str]) -> Vec<String> {
    tokens.iter().map(|t| t.to_string()).collect()
}

/// Compare every metric on one token pair against the oracles.
fn check_pair(c: &[&str], r: &[&str]) -> Result<(), String> {
    let (cs, rs) = (owned(c), owned(r));
    let tag = format!("{:?} / {:?}", c.join(" "), r.join(" "));
    close(&format!("BLEU {tag}"), bleu_tokens(&cs, &rs), common::bleu(c, r))?;
    for n in [1, 2] {
        close_opt(
            &format!("ROUGE-{n} {tag}"),
            rouge_n_tokens(&cs, &rs, n, RougeMode::Recall).ok(),
            rouge_n_recall(c, r, n),
        )?;
        close_opt(
            &format!("ROUGE-{n} F1 {tag}"),
            rouge_n_tokens(&cs, &rs, n, RougeMode::F1).ok(),
            rouge_n_f1(c, r, n),
        )?;
    }
    close_opt(&format!("ROUGE-L {tag}"), rouge_l_tokens(&cs, &rs, RougeMode::Recall).ok(), rouge_l_recall(c, r))?;
    let lcs = lcs_table(c, r);
    close_opt(
        &format!("ROUGE-L F1 {tag}"),
        rouge_l_tokens(&cs, &rs, RougeMode::F1).ok(),
        (!r.is_empty()).then(|| f1(lcs, c.len(), r.len())),
    )?;

    let oracle = meteor_alignment(c, r);
    let got = align(&cs, &rs);
    if (got.exact, got.matches(), got.crossings, got.chunks) != (oracle.exact, oracle.matches, oracle.crossings, oracle.chunks) {
        return Err(format!("METEOR alignment {tag}: got {got:?}, oracle {oracle:?}"));
    }
    close(&format!("METEOR {tag}"), meteor_tokens(&cs, &rs, &MeteorParams::default()), common::meteor(c, r))
}

const CURATED: &[(&str, &str)] = &[
    ("the cat sat on the mat", "the cat is on the mat"),
    ("the cat sat", "the cat slept well"),
    ("a b c d", "a c b d"),
    ("a b c d", "a b c d"),
    ("cats running", "cat runs"),
    ("the the the the", "the cat is on the mat"),
    ("the cat", "the cat sat on the mat"),
    ("on the mat the cat sat", "the cat sat on the mat"),
    ("a", "a"),
    ("a", "b"),
    ("", "the cat"),
    ("the cat", ""),
    ("dogs ran", "the dog runs"),
    ("each cell shows the mean of air showers", "each cell showing the mean of showers"),
    ("normalized radiation energies", "the normalized radiation energy"),
    ("table shows radiation energy", "tables show the radiation energies"),
    ("b a d c", "a b c d"),
    ("a b a b", "b a b a"),
    ("cat cats cat", "cats cat cats"),
    ("e d c b a", "a b c d e"),
    ("the mat", "the mats"),
    ("a b c d e", "a c e"),
    ("run runs running", "running runs run"),
];

fn criterion_metric_oracles() -> Outcome {
    // hand-evaluated anchors
    let cat = 100.0 * (5.0 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0 * 1.0 / 4.0f64).powf(0.25);
    close("BLEU cat example", bleu("the cat sat on the mat", "the cat is on the mat"), cat)?;
    close("ROUGE-1 example", rouge_n("the cat sat", "the cat slept well", 1).map_err(|e| e.to_string())?, 0.5)?;
    close("ROUGE-L example", rouge_l("a b c d", "a c b d").map_err(|e| e.to_string())?, 0.75)?;
    close("METEOR identical", tabcap::metrics::meteor::meteor("a b c d", "a b c d"), 1.0 - 0.5 / 64.0)?;
    close("METEOR stems", tabcap::metrics::meteor::meteor("cats running", "cat runs"), 1.0 - 0.5 / 8.0)?;

    // pooled corpus BLEU differs from the mean of sentence BLEU
    let pairs = [("the cat sat on the mat", "the cat is on the mat"), ("a b", "a b c d e f")];
    let report = evaluate_corpus(
        &pairs.iter().map(|&(c, r)| PairInput { candidate: c.into(), reference: r.into() }).collect::<Vec<_>>(),
        &MetricConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut counts = [(0, 0); 4];
    let (mut cl, mut rl) = (0, 0);
    for (c, r) in pairs {
        let (c, r) = (words(c), words(r));
        for (acc, add) in counts.iter_mut().zip(bleu_counts(&c, &r)) {
            acc.0 += add.0;
            acc.1 += add.1;
        }
        cl += c.len();
        rl += r.len();
    }
    close("pooled BLEU", report.aggregate.bleu, bleu_from(counts, cl, rl))?;
    let mean = pairs.iter().map(|(c, r)| bleu(c, r)).sum::<f64>() / 2.0;
    if (report.aggregate.bleu - mean).abs() < 1e-6 {
        return Err("pooled BLEU unexpectedly equals the mean".into());
    }

    for (c, r) in CURATED {
        check_pair(&words(c), &words(r))?;
    }

    let sequences = all_sequences(&ALPHABET, 3);
    let mut checked = CURATED.len();
    for c in &sequences {
        for r in &sequences {
            check_pair(c, r)?;
            checked += 1;
        }
    }
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..3000 {
        let c = random_sequence(&mut rng, &ALPHABET, 6);
        let r = random_sequence(&mut rng, &ALPHABET, 6);
        check_pair(&c, &r)?;
        checked += 1;
    }
    Ok(format!("{checked} pairs, tolerance {TOLERANCE:e}"))
}

fn criterion_metric_ranges() -> Outcome {
    let vocab = ["the", "cat", "cats", "sat", "on", "mat", "run", "runs", "running", "a", "b", "energy", "energies"];
    let mut rng = StdRng::seed_from_u64(29);
    let n = 10_000;
    for i in 0..n {
        let c = random_sequence(&mut rng, &vocab, 14).join(" ");
        let r = random_sequence(&mut rng, &vocab, 14).join(" ");
        for mode in [RougeMode::Recall, RougeMode::F1] {
            let (s, _) = score_pair(&c, &r, &MetricConfig { rouge_mode: mode, ..MetricConfig::default() });
            let unit = |v: Option<f64>| v.is_none_or(|v| (0.0..=1.0).contains(&v));
            if !(0.0..=100.0).contains(&s.bleu) || !unit(s.rouge_1) || !unit(s.rouge_2) || !unit(s.rouge_l) || !unit(Some(s.meteor)) {
                return Err(format!("pair {i} out of range: {s:?}"));
            }
            if let (Some(l), Some(one)) = (s.rouge_l, s.rouge_1) {
                if l > one + 1e-12 {
                    return Err(format!("pair {i}: ROUGE-L {l} > ROUGE-1 {one} ({mode:?})"));
                }
            }
        }
    }
    Ok(format!("{n} pairs, both ROUGE modes"))
}

fn criterion_bm25() -> Outcome {
    let vocab = ["radiation", "energy", "sea", "level", "shower", "air", "table", "mean"];
    let mut rng = StdRng::seed_from_u64(31);
    let params = Bm25Params::default();
    let (mut ties, corpora) = (0, 1500);
    for case in 0..corpora {
        let count = rng.random_range(1..=8);
        let mut sentences: Vec<Vec<&str>> = Vec::new();
        for _ in 0..count {
            if !sentences.is_empty() && rng.random_bool(0.25) {
                // duplicate or reversed sentence forces an exact tie
                let mut copy = sentences.choose(&mut rng).unwrap().clone();
                if rng.random_bool(0.5) {
                    copy.reverse();
                }
                sentences.push(copy);
            } else {
                let len = rng.random_range(1..=6);
                sentences.push((0..len).map(|_| *vocab.choose(&mut rng).unwrap()).collect());
            }
        }
        let qlen = rng.random_range(1..=5);
        let mut query: Vec<&str> = (0..qlen).map(|_| *vocab.choose(&mut rng).unwrap()).collect();
        if rng.random_bool(0.1) {
            query.push("unseen");
        }
        let texts: Vec<String> = sentences.iter().map(|s| s.join(" ")).collect();
        let index = build_index(&texts).map_err(|e| e.to_string())?;
        let scores = bm25_scores(&sentences, &query, params.k1, params.b);
        for n in 1..=count + 1 {
            let got: Vec<usize> = top_n(&query, n, &index, &params).map_err(|e| e.to_string())?.iter().map(|r| r.id).collect();
            let want = bm25_rank(&scores, n);
            if got != want {
                return Err(format!("corpus {case} {texts:?} query {query:?} n={n}: got {got:?}, brute force {want:?}"));
            }
        }
        let positive: Vec<f64> = scores.iter().copied().filter(|s| *s > 0.0).collect();
        if positive.iter().enumerate().any(|(i, a)| positive[i + 1..].iter().any(|b| (a - b).abs() < 1e-12)) {
            ties += 1;
        }
    }
    Ok(format!("{corpora} corpora, {ties} with tied scores"))
}

fn criterion_dataset() -> Outcome {
    let config = LayoutConfig::default();
    let fixtures = dataset_fixtures();
    let mut accepted = 0;
    for f in &fixtures {
        let layout = parse_page(&f.name, &f.lines, config.band_overlap).map_err(|e| format!("{}: {e}", f.name))?;
        let verdict = check_filter(&layout, &config);
        if apply_filter(&layout, &config) != verdict.is_ok() {
            return Err(format!("{}: apply_filter disagrees with check_filter", f.name));
        }
        match (f.rejects_with, verdict) {
            (None, Ok(())) => {
                let record = build_record(&layout, &config).map_err(|e| format!("{}: {e}", f.name))?;
                if record.sentences != f.page.body || record.caption != f.page.caption || record.table != f.page.table {
                    return Err(format!("{}: record content differs from the generated page", f.name));
                }
                let line = record.to_json_line();
                let back = PageRecord::from_json_line(&line).map_err(|e| e.to_string())?;
                if back != record || back.to_json_line() != line {
                    return Err(format!("{}: JSON round trip is lossy", f.name));
                }
                accepted += 1;
            }
            (Some(reason), Err(rejection)) if rejection.to_string().contains(reason) => {
                if build_record(&layout, &config).is_ok() {
                    return Err(format!("{}: builder accepted a filtered page", f.name));
                }
            }
            (want, got) => return Err(format!("{}: expected {want:?}, filter said {got:?}", f.name)),
        }
    }
    let counts = fixtures.iter().find(|f| f.name == "valid-counts").expect("fixture");
    let layout = parse_page(&counts.name, &counts.lines, config.band_overlap).map_err(|e| e.to_string())?;
    let record = build_record(&layout, &config).map_err(|e| e.to_string())?;
    if (record.sentences.len(), record.caption.len(), record.table.len()) != (4, 2, 3) {
        return Err(format!("counts fixture gave {:?}", (record.sentences.len(), record.caption.len(), record.table.len())));
    }
    Ok(format!("{} pages, {accepted} accepted, {} rejected", fixtures.len(), fixtures.len() - accepted))
}

fn criterion_linearization() -> Outcome {
    let mut rng = StdRng::seed_from_u64(37);
    let tables = 2000;
    for i in 0..tables {
        let table = Table::new(random_ragged_table(&mut rng)).map_err(|e| e.to_string())?;
        let rh = linearize(&table, LinearizationVariant::RowHeader);
        let ro = linearize(&table, LinearizationVariant::Others);
        let rw = linearize(&table, LinearizationVariant::Whole);
        let mut union = multiset(&rh);
        for (k, v) in multiset(&ro) {
            *union.entry(k).or_insert(0) += v;
        }
        if union != multiset(&rw) {
            return Err(format!("table {i}: T_r.h + T_r.o differs from T_r.w"));
        }
        let flat: Vec<String> = table.rows.iter().flatten().flat_map(|c| c.split_whitespace().map(String::from)).collect();
        if rw != flat {
            return Err(format!("table {i}: T_r.w is not the row-major flattening"));
        }
    }
    let streams = 2000;
    for i in 0..streams {
        let len = rng.random_range(0..=20);
        let stream: Vec<(&str, bool)> = (0..len).map(|_| *NUMERAL_POOL.choose(&mut rng).unwrap()).collect();
        let tokens: Vec<&str> = stream.iter().map(|t| t.0).collect();
        let kept: Vec<String> = stream.iter().filter(|t| !t.1).map(|t| t.0.to_string()).collect();
        let once = strip_numerals(&tokens);
        if once != kept {
            return Err(format!("stream {i}: got {once:?}, hand labels keep {kept:?}"));
        }
        if strip_numerals(&once) != once || once.iter().any(|t| is_numeral(t)) {
            return Err(format!("stream {i}: not idempotent or numeral left"));
        }
    }
    Ok(format!("{tables} ragged tables, {streams} token streams"))
}

fn grid_once(corpus: &[PageRecord]) -> Result<(String, String, usize, bool), String> {
    let run = run_grid(corpus, &GenerationClient::stub(), &GridConfig::default()).map_err(|e| e.to_string())?;
    let csv = emit_csv(&run.matrix).map_err(|e| e.to_string())?;
    let errors = run.matrix.cells.iter().any(|c| c.value.score().is_none());
    Ok((run.matrix.to_json(), csv, run.matrix.cells.len(), run.matrix.is_complete() && !errors))
}

fn criterion_grid() -> Outcome {
    let corpus = synthetic_corpus(207, 2023);
    let (json_a, csv_a, cells, complete) = grid_once(&corpus)?;
    let (json_b, csv_b, _, _) = grid_once(&corpus)?;
    if cells != 110 || !complete {
        return Err(format!("{cells} cells, complete={complete}"));
    }
    if json_a != json_b || csv_a != csv_b {
        return Err("two runs differ".into());
    }
    Ok(format!("207 records, {cells} cells, identical across two runs"))
}

fn criterion_csv_layout() -> Outcome {
    let corpus = synthetic_corpus(12, 5);
    let run = run_grid(&corpus, &GenerationClient::stub(), &GridConfig::default()).map_err(|e| e.to_string())?;
    let csv = emit_csv(&run.matrix).map_err(|e| e.to_string())?;
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let mut expected = vec!["model".to_string(), "metric".to_string(), "None".to_string()];
    for n in 1..=3 {
        for s in ["T_r.h", "T_r.o", "T_r.w"] {
            expected.push(format!("Top-{n} BM25 {s}"));
        }
    }
    expected.push("Author".into());
    if header != expected {
        return Err(format!("header {header:?}"));
    }
    let rows: Vec<(String, String)> = reader
        .records()
        .map(|r| r.map(|r| (r[0].to_string(), r[1].to_string())))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let want: Vec<(String, String)> = ["sep", "plain"]
        .iter()
        .flat_map(|m| Metric::ALL.iter().map(move |x| (m.to_string(), x.name().to_string())))
        .collect();
    if rows != want {
        return Err(format!("rows {rows:?}"));
    }
    let codes: Vec<String> = Condition::canonical().iter().map(Condition::code).collect();
    Ok(format!("{} condition columns ({}), {} rows", header.len() - 2, codes.join(" "), rows.len()))
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "metric oracle suite", limit: Some(Duration::from_secs(10)), run: criterion_metric_oracles },
        Criterion { name: "metric ranges, ROUGE-L <= ROUGE-1", limit: Some(Duration::from_secs(30)), run: criterion_metric_ranges },
        Criterion { name: "BM25 top_n equals brute force", limit: Some(Duration::from_secs(10)), run: criterion_bm25 },
        Criterion { name: "dataset builder filter and round trip", limit: None, run: criterion_dataset },
        Criterion { name: "linearization multiset and numeral stripping", limit: None, run: criterion_linearization },
        Criterion { name: "207-record stub grid", limit: Some(Duration::from_secs(60)), run: criterion_grid },
        Criterion { name: "results CSV layout", limit: None, run: criterion_csv_layout },
    ];

    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {}: {detail} ({elapsed:.2?})", c.name),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {}: {why} ({elapsed:.2?})", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
