//! Table caption generation for scholarly pages.
//!
//! The crate turns DocBank token annotations into captioning records, picks
//! supporting body sentences with BM25 or author-style table references,
//! assembles length-bounded prompts, talks to a generation service over a
//! small JSON protocol and scores generated captions with BLEU, ROUGE and
//! METEOR. [`harness::run_grid`] ties the stages together over every
//! retrieval condition and prompt style.
//!
//! The `examples/` directory has one runnable program per stage:
//!
//! | example | shows |
//! |---|---|
//! | `parse_docbank_page` | parsing, reading order, filtering, record building |
//! | `linearize_table` | table reconstruction and the three linearizations |
//! | `bm25_retrieval` | index building, Top-N and author matching |
//! | `assemble_prompts` | prompt styles and truncation |
//! | `score_captions` | the five metrics and a corpus report |
//! | `stub_grid` | a full grid run against the deterministic stub |
//! | `http_backend` | the wire protocol against a local mock server |

pub mod docbank;
pub mod generation;
pub mod harness;
pub mod metrics;
pub mod prompt;
pub mod retrieval;
pub mod sentences;
pub mod synthetic;
pub mod table;
pub mod text;

pub use docbank::{build_record, parse_page, Label, LayoutConfig, PageLayout, PageRecord, SemanticToken};
pub use generation::{Backend, ClientConfig, GenRequest, GenResponse, GenerationClient, HttpBackend, StubBackend};
pub use harness::{run_grid, Condition, GridConfig, ResultMatrix};
pub use metrics::{evaluate_corpus, score_pair, Metric, MetricConfig, RougeMode};
pub use prompt::{assemble, PromptSpec, PromptStyle};
pub use retrieval::{retrieve, Bm25Params, RetrievalConfig, RetrievalMethod};
pub use table::{linearize, LinearizationVariant, Table};
