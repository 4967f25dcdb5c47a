//! Score generated captions with BLEU, ROUGE-1/2/L and METEOR.
//!
//! ```not_rust
//! cargo run --example score_captions
//! ```

use tabcap::metrics::{evaluate_corpus, meteor::align, Metric, MetricConfig, PairInput, RougeMode};
use tabcap::text::tokenize;

fn main() {
    let pairs = vec![
        PairInput { candidate: "the cat sat on the mat".into(), reference: "the cat is on the mat".into() },
        PairInput { candidate: "cats running".into(), reference: "cat runs".into() },
        PairInput {
            candidate: "each cell shows the mean of twenty showers".into(),
            reference: "each cell shows the mean of at least 20 air showers".into(),
        },
    ];

    for mode in [RougeMode::Recall, RougeMode::F1] {
        let config = MetricConfig { rouge_mode: mode, ..MetricConfig::default() };
        let report = evaluate_corpus(&pairs, &config).expect("non-empty");
        println!("ROUGE mode {mode:?}");
        for (pair, scored) in pairs.iter().zip(&report.pairs) {
            let cells: Vec<String> = Metric::ALL
                .iter()
                .map(|&m| match scored.scores.get(m) {
                    Some(v) => format!("{}={v:.4}", m.name()),
                    None => format!("{}=n/a", m.name()),
                })
                .collect();
            println!("  {:45} {}", pair.candidate, cells.join(" "));
        }
        let agg: Vec<String> = Metric::ALL
            .iter()
            .filter_map(|&m| report.aggregate.get(m).map(|v| format!("{}={v:.4}", m.name())))
            .collect();
        println!("  corpus: {}\n", agg.join(" "));
    }

    let alignment = align(&tokenize("cats running"), &tokenize("cat runs"));
    println!("METEOR alignment of 'cats running' / 'cat runs': {alignment:?}");
}
