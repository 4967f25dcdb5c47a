//! Write generated DocBank pages to a directory, ready for
//! `tabcap build-dataset`. A few pages break one of the corpus criteria
//! (two columns, two tables, too few sentences) so the filter has something
//! to reject.
//!
//! ```not_rust
//! cargo run --example synthesize_pages -- pages/ 20
//! tabcap build-dataset --input pages/ --output corpus.jsonl
//! ```

use std::{env, fs, io, path::PathBuf};

use rand::rngs::StdRng;
use rand::SeedableRng;
use tabcap::synthetic::{random_valid_spec, synthesize_page, PageSpec};

fn main() -> io::Result<()> {
    let mut args = env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "pages".into()));
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    fs::create_dir_all(&dir)?;

    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..n {
        let id = format!("page-{i:04}");
        let mut spec: PageSpec = random_valid_spec(id.clone(), &mut rng);
        match i % 10 {
            7 => spec.columns = 2,
            8 => spec.tables = 2,
            9 => {
                spec.body_sentences = 2;
                spec.cite_table = false;
            }
            _ => {}
        }
        let page = synthesize_page(&spec, i as u64);
        fs::write(dir.join(format!("{id}.txt")), page.text())?;
    }
    println!("wrote {n} pages to {}", dir.display());
    Ok(())
}
