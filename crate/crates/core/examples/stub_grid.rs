//! Run the full condition grid on a generated corpus against the
//! deterministic stub backend and print the results table.
//!
//! ```not_rust
//! cargo run --release --example stub_grid -- 207
//! ```

use std::env;
use std::time::Instant;

use tabcap::generation::GenerationClient;
use tabcap::harness::{compare_best, emit_csv, run_grid, GridConfig};
use tabcap::synthetic::synthetic_corpus;

fn main() {
    let n: usize = env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(207);
    let corpus = synthetic_corpus(n, 2023);

    let started = Instant::now();
    let run = run_grid(&corpus, &GenerationClient::stub(), &GridConfig::default()).expect("stub grid runs");
    println!("{} cells in {:.2?}", run.matrix.cells.len(), started.elapsed());
    println!("corpus sha256 {}", run.matrix.provenance.corpus_hash);
    println!();
    print!("{}", emit_csv(&run.matrix).expect("complete matrix"));
    println!();
    for best in compare_best(&run.matrix) {
        let names: Vec<String> = best.conditions.iter().map(|c| c.code()).collect();
        println!("best {:5} {:8} {}", best.style.code(), best.metric.name(), names.join(", "));
    }
}
