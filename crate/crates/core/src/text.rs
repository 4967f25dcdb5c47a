//! Shared tokenizer used by retrieval and every metric.
//!
//! Text is lowercased and split on whitespace and punctuation. Runs of
//! alphanumeric characters become tokens; a `.` or `,` sandwiched between two
//! digits stays inside the token so numerals like `8.29` or `19,638` survive.

/// Tokenize `text` into lowercase word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            continue;
        }
        let joins_digits = (c == '.' || c == ',')
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
            && !current.is_empty();
        if joins_digits {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Collapse every whitespace run to a single space and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Number of whitespace-delimited tokens, the unit of prompt budgets.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
