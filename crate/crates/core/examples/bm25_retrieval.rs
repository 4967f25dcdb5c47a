//! Rank body sentences against a table with BM25, and find the sentence an
//! author wrote about the table.
//!
//! ```not_rust
//! cargo run --example bm25_retrieval
//! ```

use tabcap::retrieval::{author_match, bm25_score, build_index, table_indicator, top_n, Bm25Params};
use tabcap::text::tokenize;

fn main() {
    let sentences = [
        "the radiation energy at sea level",
        "the geometry of air showers",
        "normalized radiation energy values for energy",
    ];
    let index = build_index(&sentences).expect("non-empty corpus");
    let params = Bm25Params::default();
    let query = tokenize("radiation energy");

    println!("avg length {:.3}", index.avg_len());
    for (id, sentence) in sentences.iter().enumerate() {
        let score = bm25_score(&query, id, &index, &params).unwrap();
        println!("  s{} {score:.6}  {sentence}", id + 1);
    }
    for n in 1..=3 {
        let ranked = top_n(&query, n, &index, &params).unwrap();
        let ids: Vec<String> = ranked.iter().map(|r| format!("s{}", r.id + 1)).collect();
        println!("top-{n}: [{}]", ids.join(", "));
    }

    let caption = "Table 6. The table shows the normalized radiation energies.";
    let body = [
        "We simulated showers at several zenith angles.",
        "The energies are summarized in Table 6.",
        "Table 60 lists the remaining runs.",
    ];
    println!("\nindicator: {:?}", table_indicator(caption));
    println!("author match: {:?}", author_match(caption, &body));
}
