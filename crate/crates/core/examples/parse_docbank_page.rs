//! Parse one DocBank annotation page and build a captioning record from it.
//!
//! ```not_rust
//! cargo run --example parse_docbank_page                 # a generated page
//! cargo run --example parse_docbank_page -- page.txt     # your own file
//! ```

use std::{env, error::Error, fs};

use tabcap::docbank::{build_record, check_filter, count_tables, detect_columns, parse_page, LayoutConfig};
use tabcap::synthetic::{synthesize_page, PageSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let config = LayoutConfig::default();
    let (page_id, text) = match env::args().nth(1) {
        Some(path) => (path.clone(), fs::read_to_string(&path)?),
        None => ("generated".to_string(), synthesize_page(&PageSpec::valid("generated"), 42).text()),
    };

    let layout = parse_page(&page_id, text.lines(), config.band_overlap)?;
    println!("{} tokens in reading order, first line:", layout.tokens.len());
    let first: Vec<&str> = layout.tokens.iter().take(12).map(|t| t.text.as_str()).collect();
    println!("  {}", first.join(" "));
    println!("columns: {}", detect_columns(&layout, &config)?);
    println!("tables:  {}", count_tables(&layout, config.table_gap));

    match check_filter(&layout, &config) {
        Ok(()) => {
            let record = build_record(&layout, &config)?;
            println!("accepted: {} sentences, {} caption sentences, {} table rows",
                record.sentences.len(), record.caption.len(), record.table.len());
            println!("{}", record.to_json_line());
        }
        Err(reason) => println!("rejected: {reason}"),
    }
    Ok(())
}
