//! Caption splitting and prompt assembly.
//!
//! A prompt concatenates three parts in a fixed order: the linearized table,
//! the retrieved body sentences, and the first caption sentence. The
//! separator style inserts the literal `</s>` token before the caption
//! sentence; the plain style does not. Budgets count whitespace tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize_whitespace, word_count};

pub const SEPARATOR: &str = "</s>";

/// How the prompt parts are joined, after the two model families it targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptStyle {
    /// Encoder-decoder style with an explicit separator token.
    #[serde(rename = "sep")]
    Separator,
    /// Decoder-only style, plain concatenation.
    #[serde(rename = "plain")]
    Plain,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 2] = [Self::Separator, Self::Plain];

    pub fn code(&self) -> &'static str {
        match self {
            Self::Separator => "sep",
            Self::Plain => "plain",
        }
    }

    /// Default context budget in tokens.
    pub fn default_budget(&self) -> usize {
        match self {
            Self::Separator => 512,
            Self::Plain => 1024,
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sep" => Ok(Self::Separator),
            "plain" => Ok(Self::Plain),
            other => Err(format!("unknown prompt style {other:?} (expected sep or plain)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("no target: caption has {0} sentence(s), need at least 2")]
    NoTarget(usize),
    #[error("prompt budget exhausted: {needed} tokens needed for the caption sentence, budget {budget}")]
    BudgetExhausted { needed: usize, budget: usize },
    #[error("first caption sentence is empty")]
    EmptyFirstSentence,
    #[error("token budget must be positive")]
    ZeroBudget,
}

/// A caption divided into the prompt suffix and the generation target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSplit {
    pub first: String,
    pub rest: String,
}

pub fn split_caption<S: AsRef<str>>(caption: &[S]) -> Result<CaptionSplit, PromptError> {
    if caption.len() < 2 {
        return Err(PromptError::NoTarget(caption.len()));
    }
    let rest: Vec<&str> = caption[1..].iter().map(AsRef::as_ref).collect();
    Ok(CaptionSplit { first: normalize_whitespace(caption[0].as_ref()), rest: normalize_whitespace(&rest.join(" ")) })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub tabular_tokens: Vec<String>,
    pub relevant_sentences: Vec<String>,
    pub first_caption_sentence: String,
    pub style: PromptStyle,
    pub max_length: usize,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.max_length == 0 {
            return Err(PromptError::ZeroBudget);
        }
        if self.first_caption_sentence.trim().is_empty() {
            return Err(PromptError::EmptyFirstSentence);
        }
        Ok(())
    }

    /// Assemble and fit the prompt into the token budget.
    pub fn render(&self) -> Result<String, PromptError> {
        self.validate()?;
        truncate(self, &assemble(self))
    }
}

fn join_parts(tabular: &[String], sentences: &[String], first: &str, style: PromptStyle) -> String {
    let mut parts: Vec<String> = Vec::new();
    if !tabular.is_empty() {
        parts.push(tabular.join(" "));
    }
    parts.extend(sentences.iter().map(|s| normalize_whitespace(s)).filter(|s| !s.is_empty()));
    if style == PromptStyle::Separator {
        parts.push(SEPARATOR.to_string());
    }
    parts.push(normalize_whitespace(first));
    parts.join(" ")
}

/// Concatenate table, sentences and first caption sentence with single spaces.
pub fn assemble(spec: &PromptSpec) -> String {
    join_parts(&spec.tabular_tokens, &spec.relevant_sentences, &spec.first_caption_sentence, spec.style)
}

/// Fit `assembled` into `spec.max_length` tokens.
///
/// Text already within budget is returned unchanged. Otherwise the tabular
/// part loses tokens from its tail first, then the retrieved sentences from
/// the last one backwards. The separator and the caption sentence are never
/// cut.
pub fn truncate(spec: &PromptSpec, assembled: &str) -> Result<String, PromptError> {
    let budget = spec.max_length;
    if word_count(assembled) <= budget {
        return Ok(assembled.to_string());
    }
    let fixed = word_count(&spec.first_caption_sentence) + usize::from(spec.style == PromptStyle::Separator);
    if fixed > budget {
        return Err(PromptError::BudgetExhausted { needed: fixed, budget });
    }

    let mut tabular: Vec<String> = spec.tabular_tokens.iter().flat_map(|t| t.split_whitespace()).map(String::from).collect();
    let mut sentences: Vec<Vec<&str>> = spec.relevant_sentences.iter().map(|s| s.split_whitespace().collect()).collect();
    let sentence_tokens: usize = sentences.iter().map(Vec::len).sum();
    let mut excess = (tabular.len() + sentence_tokens + fixed).saturating_sub(budget);

    let cut = excess.min(tabular.len());
    tabular.truncate(tabular.len() - cut);
    excess -= cut;
    while excess > 0 {
        let Some(last) = sentences.last_mut() else { break };
        let cut = excess.min(last.len());
        last.truncate(last.len() - cut);
        excess -= cut;
        if last.is_empty() {
            sentences.pop();
        }
    }
    let sentences: Vec<String> = sentences.into_iter().map(|s| s.join(" ")).collect();
    Ok(join_parts(&tabular, &sentences, &spec.first_caption_sentence, spec.style))
}
