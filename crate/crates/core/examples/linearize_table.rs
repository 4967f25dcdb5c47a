//! Rebuild a table from positioned tokens and print the three linearizations,
//! with and without numerals.
//!
//! ```not_rust
//! cargo run --example linearize_table
//! ```

use tabcap::docbank::{BBox, Color, Label, SemanticToken};
use tabcap::table::{linearize, reconstruct_table, strip_numerals, LinearizationVariant, TableConfig};

fn token(text: &str, x0: u16, y0: u16) -> SemanticToken {
    let width = 7 * text.chars().count() as u16;
    SemanticToken {
        text: text.to_string(),
        bbox: BBox::new(x0, y0, x0 + width, y0 + 10),
        color: Color { r: 0, g: 0, b: 0 },
        font: "CMR10".to_string(),
        label: Label::Table,
    }
}

/// Lay a row of cells out left to right: words inside a cell sit 5 units
/// apart, cells start at the given x positions.
fn row(cells: &[(u16, &str)], y: u16) -> Vec<SemanticToken> {
    let mut tokens = Vec::new();
    for &(x, cell) in cells {
        let mut x = x;
        for word in cell.split_whitespace() {
            let t = token(word, x, y);
            x = t.bbox.x1 + 5;
            tokens.push(t);
        }
    }
    tokens
}

fn main() {
    let mut tokens = Vec::new();
    tokens.extend(row(&[(100, "refractivity at sea level"), (420, "normalized radiation energy")], 200));
    tokens.extend(row(&[(100, "0.9 n0"), (420, "10.97 ± 0.03 (0.21) MeV")], 216));
    tokens.extend(row(&[(100, "1.1 n0"), (420, "11.29 ± 0.03 (0.22) MeV")], 232));

    let table = reconstruct_table(&tokens, &TableConfig::default()).expect("tokens form a table");
    for (i, cells) in table.rows.iter().enumerate() {
        println!("row {i}: {cells:?}");
    }
    println!();
    for variant in LinearizationVariant::ALL {
        let words = linearize(&table, variant);
        println!("{:6} {}", variant.column_label(), words.join(" "));
        println!("{:6} {}", "", strip_numerals(&words).join(" "));
    }
}
