//! Sentence segmentation over token streams in reading order.

use std::sync::LazyLock;

use regex::Regex;

/// Abbreviations whose trailing period never ends a sentence. Multi-word
/// entries are matched against the words preceding the period.
pub const ABBREVIATIONS: &[&str] = &[
    "Fig", "Figs", "fig", "figs", "Eq", "Eqs", "eq", "eqs", "Sec", "Secs", "sec", "Tab", "Ref", "Refs",
    "ref", "Dr", "Mr", "Mrs", "Ms", "Prof", "vs", "etc", "et al", "e.g", "i.e", "cf", "approx",
    "resp", "No", "no", "Vol", "vol", "pp", "Ch", "Thm", "Def", "Lem",
];

const TERMINATORS: [char; 3] = ['.', '?', '!'];

/// A caption label such as "Table 6." or "Fig. IV:" standing alone at the
/// start of a sentence; its period does not end the sentence.
static LABEL_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:Table|TABLE|Tab\.|Figure|FIGURE|Fig\.)\s*(?:\d+|[IVXLCDM]+)\s*[.:]$").expect("label pattern")
});

/// True when `sentence` ends in `.`, `?` or `!`.
pub fn is_complete(sentence: &str) -> bool {
    sentence.trim_end().ends_with(TERMINATORS)
}

fn is_closing(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| matches!(c, '.' | ',' | ';' | ':' | '?' | '!' | ')' | ']' | '}'))
}

fn is_opening(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| matches!(c, '(' | '[' | '{'))
}

/// Words that precede the period in `tokens[..=end]`, ignoring a bare "." token.
fn words_before_period<'a>(tokens: &[&'a str], end: usize) -> Vec<&'a str> {
    let mut words: Vec<&str> = Vec::new();
    let last = tokens[end];
    let mut idx = end as isize;
    if last == "." {
        idx -= 1;
    } else {
        words.push(last.strip_suffix('.').unwrap_or(last));
        idx -= 1;
    }
    while idx >= 0 && words.len() < 3 {
        words.push(tokens[idx as usize]);
        idx -= 1;
    }
    words.reverse();
    words
}

fn is_guarded_period(tokens: &[&str], end: usize) -> bool {
    let words = words_before_period(tokens, end);
    let Some(&word) = words.last() else {
        return false;
    };
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_uppercase() {
            return true;
        }
    }
    ABBREVIATIONS.iter().any(|abbr| {
        let parts: Vec<&str> = abbr.split(' ').collect();
        parts.len() <= words.len() && words[words.len() - parts.len()..] == parts[..]
    })
}

fn ends_sentence(tokens: &[&str], start: usize, i: usize) -> bool {
    let token = tokens[i];
    let Some(last) = token.chars().last() else {
        return false;
    };
    if !TERMINATORS.contains(&last) {
        return false;
    }
    let next_ok = match tokens.get(i + 1) {
        None => true,
        Some(next) => next.chars().next().is_some_and(char::is_uppercase),
    };
    if !next_ok {
        return false;
    }
    if last == '.' && (is_guarded_period(tokens, i) || LABEL_PREFIX.is_match(&tokens[start..=i].join(" "))) {
        return false;
    }
    true
}

fn render(tokens: &[&str]) -> String {
    let mut out = String::new();
    let mut prev_opening = false;
    for token in tokens {
        if !out.is_empty() && !is_closing(token) && !prev_opening {
            out.push(' ');
        }
        out.push_str(token);
        prev_opening = is_opening(token);
    }
    out
}

/// Split a token stream into sentences.
///
/// Tokens are joined with single spaces (closing punctuation attaches to the
/// preceding word). A boundary falls after a token ending in `.`, `?` or `!`
/// when the next token starts with an uppercase letter or the stream ends,
/// except that a period after an initial or a known abbreviation never splits.
/// A trailing fragment without a terminator is still returned; use
/// [`is_complete`] to tell the two apart.
pub fn segment_sentences<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    let words: Vec<&str> = tokens.iter().map(|t| t.as_ref().trim()).filter(|t| !t.is_empty()).collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for i in 0..words.len() {
        if ends_sentence(&words, start, i) {
            sentences.push(render(&words[start..=i]));
            start = i + 1;
        }
    }
    if start < words.len() {
        sentences.push(render(&words[start..]));
    }
    sentences
}

/// Segment a plain string by splitting it on whitespace first.
pub fn segment_text(text: &str) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    segment_sentences(&tokens)
}
