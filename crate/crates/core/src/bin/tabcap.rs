use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tabcap::docbank::{build_record, parse_page, LayoutConfig, PageRecord};
use tabcap::generation::{Backend, ClientConfig, GenRequest, GenerationClient, HttpBackend, StubBackend, ENDPOINT_ENV};
use tabcap::harness::{compare_best, emit_csv, parse_conditions, prepare, run_grid, Condition, GridConfig};
use tabcap::metrics::{evaluate_corpus, pairs_csv, MetricConfig, PairInput, RougeMode};
use tabcap::prompt::PromptStyle;
use tabcap::retrieval::{retrieve, Bm25Params, RetrievalConfig, RetrievalMethod};
use tabcap::table::LinearizationVariant;

#[derive(Parser)]
#[command(name = "tabcap", version, about = "Table caption generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse DocBank annotation files and write the filtered corpus as JSON lines.
    BuildDataset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        band_overlap: f64,
        #[arg(long, default_value_t = 30)]
        table_gap: u16,
    },
    /// Print the sentences each method retrieves for every record.
    Retrieve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        method: RetrievalMethod,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Print the assembled prompt and target for every record.
    Assemble {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "rw")]
        variant: LinearizationVariant,
        #[arg(long)]
        method: RetrievalMethod,
        #[arg(long)]
        style: PromptStyle,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Send assembled prompts to a backend and print the continuations.
    Generate {
        /// JSON lines with record_id and prompt, as printed by `assemble`.
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        style: PromptStyle,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Score candidate/reference pairs.
    Evaluate {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "recall")]
        rouge_mode: RougeArg,
    },
    /// Run every condition and style, then write the results matrix.
    RunGrid {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated condition codes such as `none,top1-rh,author`, or `all`.
        #[arg(long, default_value = "all")]
        conditions: String,
        #[arg(long, default_value = "sep,plain")]
        styles: String,
        #[arg(long, default_value_t = 2)]
        min_caption_sentences: usize,
        #[arg(long, value_enum, default_value = "recall")]
        rouge_mode: RougeArg,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Args)]
struct Bm25Args {
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
}

impl Bm25Args {
    fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "stub")]
    backend: BackendKind,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long, default_value_t = 2)]
    retries: u32,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendKind {
    Http,
    Stub,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RougeArg {
    Recall,
    F1,
}

impl From<RougeArg> for RougeMode {
    fn from(arg: RougeArg) -> Self {
        match arg {
            RougeArg::Recall => RougeMode::Recall,
            RougeArg::F1 => RougeMode::F1,
        }
    }
}

impl BackendArgs {
    fn client(&self) -> Result<GenerationClient> {
        let backend: Arc<dyn Backend> = match self.backend {
            BackendKind::Stub => Arc::new(StubBackend::new()),
            BackendKind::Http => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .with_context(|| format!("--backend http needs --endpoint or {ENDPOINT_ENV}"))?;
                Arc::new(HttpBackend::new(endpoint, Duration::from_millis(self.timeout_ms))?)
            }
        };
        let config = ClientConfig { retries: self.retries, parallelism: self.parallelism, ..ClientConfig::default() };
        Ok(GenerationClient::new(backend, config))
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    Ok(lines)
}

fn read_corpus(path: &Path) -> Result<Vec<PageRecord>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| PageRecord::from_json_line(line).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn read_json_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn print_json_lines<T: Serialize>(items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn build_dataset(input: &Path, output: &Path, config: &LayoutConfig) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.retain(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("txt" | "tsv")));
    paths.sort();

    let mut out = BufWriter::new(fs::File::create(output).with_context(|| format!("creating {}", output.display()))?);
    let (mut kept, mut rejected) = (0, 0);
    for path in &paths {
        let page_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let layout = parse_page(page_id, text.lines(), config.band_overlap)
            .with_context(|| format!("parsing {}", path.display()))?;
        match build_record(&layout, config) {
            Ok(record) => {
                writeln!(out, "{}", record.to_json_line())?;
                kept += 1;
            }
            Err(reason) => {
                eprintln!("skip {page_id}: {reason}");
                rejected += 1;
            }
        }
    }
    out.flush()?;
    eprintln!("{kept} record(s) written, {rejected} page(s) rejected");
    Ok(())
}

#[derive(Serialize)]
struct Retrieved<'a> {
    record_id: &'a str,
    method: String,
    sentences: Vec<String>,
}

#[derive(serde::Deserialize)]
struct PromptLine {
    record_id: String,
    prompt: String,
}

#[derive(Serialize)]
struct Continuation {
    record_id: String,
    continuation: String,
    backend_id: String,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::BuildDataset { input, output, band_overlap, table_gap } => {
            let config = LayoutConfig { band_overlap, table_gap, ..LayoutConfig::default() };
            build_dataset(&input, &output, &config)?;
        }
        Command::Retrieve { corpus, method, bm25 } => {
            let config = RetrievalConfig { method, params: bm25.params() };
            let corpus = read_corpus(&corpus)?;
            let mut rows = Vec::with_capacity(corpus.len());
            for record in &corpus {
                let sentences = retrieve(record, &config).with_context(|| record.page_id.clone())?;
                rows.push(Retrieved { record_id: &record.page_id, method: method.code(), sentences });
            }
            print_json_lines(&rows)?;
        }
        Command::Assemble { records, variant, method, style, bm25 } => {
            let condition = Condition { method, variant: Some(variant) };
            let config = GridConfig { bm25: bm25.params(), ..GridConfig::default() };
            let prompts = read_corpus(&records)?
                .iter()
                .map(|record| prepare(record, &condition, style, &config).with_context(|| record.page_id.clone()))
                .collect::<Result<Vec<_>>>()?;
            print_json_lines(&prompts)?;
        }
        Command::Generate { prompts, style, backend } => {
            let client = backend.client()?;
            let lines: Vec<PromptLine> = read_json_lines(&prompts)?;
            let requests: Vec<GenRequest> = lines.iter().map(|l| GenRequest::greedy(style, l.prompt.clone())).collect();
            let mut rows = Vec::with_capacity(lines.len());
            for (line, result) in lines.into_iter().zip(client.generate_batch(&requests)) {
                let response = result.with_context(|| line.record_id.clone())?;
                rows.push(Continuation {
                    record_id: line.record_id,
                    continuation: response.continuation,
                    backend_id: response.backend_id,
                });
            }
            print_json_lines(&rows)?;
        }
        Command::Evaluate { pairs, out, rouge_mode } => {
            let pairs: Vec<PairInput> = read_json_lines(&pairs)?;
            let config = MetricConfig { rouge_mode: rouge_mode.into(), ..MetricConfig::default() };
            let report = evaluate_corpus(&pairs, &config)?;
            write_file(&out, &serde_json::to_string_pretty(&report)?)?;
            write_file(&out.with_extension("csv"), &pairs_csv(&report)?)?;
        }
        Command::RunGrid { corpus, out, conditions, styles, min_caption_sentences, rouge_mode, backend } => {
            let conditions = parse_conditions(&conditions).map_err(anyhow::Error::msg)?;
            let styles = styles
                .split(',')
                .map(|s| s.trim().parse::<PromptStyle>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(anyhow::Error::msg)?;
            if conditions.is_empty() || styles.is_empty() {
                bail!("need at least one condition and one style");
            }
            let config = GridConfig {
                conditions,
                styles,
                min_caption_sentences,
                metrics: MetricConfig { rouge_mode: rouge_mode.into(), ..MetricConfig::default() },
                ..GridConfig::default()
            };
            let corpus = read_corpus(&corpus)?;
            let client = backend.client()?;
            let run = run_grid(&corpus, &client, &config)?;

            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_file(&out.join("matrix.json"), &run.matrix.to_json())?;
            write_file(&out.join("matrix.csv"), &emit_csv(&run.matrix)?)?;
            for condition_run in &run.runs {
                let dir = out.join(condition_run.style.code()).join(condition_run.condition.code());
                fs::create_dir_all(&dir)?;
                let mut jsonl = String::new();
                for generation in &condition_run.generations {
                    jsonl.push_str(&serde_json::to_string(generation)?);
                    jsonl.push('\n');
                }
                write_file(&dir.join("generations.jsonl"), &jsonl)?;
            }
            for best in compare_best(&run.matrix) {
                let names: Vec<String> = best.conditions.iter().map(Condition::code).collect();
                let flag = if best.partial { " (partial)" } else { "" };
                eprintln!("best {} {}: {}{flag}", best.style.code(), best.metric.name(), names.join(", "));
            }
            eprintln!(
                "{} cells written to {} ({} records used)",
                run.matrix.cells.len(),
                out.display(),
                run.matrix.provenance.records_used
            );
        }
    }
    Ok(())
}
