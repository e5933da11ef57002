//! `orthodoc` command-line driver.
//!
//! Exit codes: 0 on success, 1 for validation errors (bad flags, missing or
//! malformed inputs), 2 for runtime failures (backend, divergence, i/o).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orthodoc_core::backend::{GenerationBackend, HttpBackend, TemplateBackend};
use orthodoc_core::case::{load_cases, CaseRecord};
use orthodoc_core::config::{BackendKind, EngineConfig, CONFIG_SCHEMA_VERSION};
use orthodoc_core::corpus::load_corpus;
use orthodoc_core::eval::{self, tables, Variant};
use orthodoc_core::fusion::{train_head, FusionWeights};
use orthodoc_core::kgraph::{build_graph, KnowledgeGraph, Lexicon};
use orthodoc_core::pipeline::{diagnose, run_case, training_examples, Artifacts, RunOptions};
use orthodoc_core::report::{emit_latex, Policy, ENGINE_VERSION};
use orthodoc_core::retrieval::{InvertedIndex, Query, Retriever};
use orthodoc_core::store::PassageStore;
use orthodoc_core::Error;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "orthodoc", about = "Grounded orthopedic report engine", disable_version_flag = true)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    /// Print the engine and config schema versions.
    #[arg(short = 'V', long)]
    version: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Option<Command>,
}

/// Flags that override config values for any subcommand.
#[derive(Debug, Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true)]
    index: Option<PathBuf>,
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    k1: Option<f64>,
    #[arg(long, global = true)]
    b: Option<f64>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    policy: Option<Policy>,
    #[arg(long, global = true)]
    template: Option<String>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, global = true)]
    backend_url: Option<String>,
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    max_chunk_tokens: Option<usize>,
    #[arg(long, global = true)]
    overlap_tokens: Option<usize>,
    /// Fixed report date; omit to let LaTeX use the compile date.
    #[arg(long, global = true)]
    date: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Template,
    Http,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chunk a JSONL corpus into a passage store.
    Ingest {
        corpus: PathBuf,
    },
    /// Build the knowledge graph from the passage store and a lexicon.
    BuildGraph {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the inverted index over the passage store.
    Index {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the fusion classifier head on labelled cases.
    TrainHead {
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify one case.
    Diagnose {
        case: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank passages for a free-text query.
    Retrieve {
        query: String,
        /// Skip graph expansion.
        #[arg(long)]
        no_graph: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, verify and typeset a report for one case.
    Report {
        case: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the verified report as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Disable graph expansion.
        #[arg(long)]
        no_rag: bool,
        /// Draft the report in one pass instead of section by section.
        #[arg(long)]
        no_cot: bool,
    },
    /// Score the engine over a dataset directory.
    Evaluate {
        dataset: PathBuf,
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// External predictions (case id to label) scored instead of the
        /// built-in classifier for the condition metrics.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// File for the condition and report-quality tables.
        #[arg(long)]
        tables_out: Option<PathBuf>,
    },
    /// Run RAG and CoT ablations over a dataset directory.
    Ablate {
        dataset: PathBuf,
        #[arg(long, default_value = "rag,cot")]
        variants: String,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one `.tex` file per table.
        #[arg(long)]
        tables_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn effective_config(cli: &Cli) -> CliResult<EngineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    let o = &cli.overrides;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value.clone() {
                $field = v;
            }
        };
    }
    set!(cfg.paths.store, o.store);
    set!(cfg.paths.graph, o.graph);
    set!(cfg.paths.index, o.index);
    set!(cfg.paths.weights, o.weights);
    if o.lexicon.is_some() {
        cfg.paths.lexicon = o.lexicon.clone();
    }
    set!(cfg.retrieval.k, o.k);
    set!(cfg.retrieval.depth, o.depth);
    set!(cfg.retrieval.k1, o.k1);
    set!(cfg.retrieval.b, o.b);
    set!(cfg.report.tau, o.tau);
    set!(cfg.report.policy, o.policy);
    set!(cfg.report.template_id, o.template);
    set!(cfg.concurrency, o.concurrency);
    set!(cfg.fusion.seed, o.seed);
    set!(cfg.fusion.epochs, o.epochs);
    set!(cfg.fusion.lr, o.lr);
    set!(cfg.chunking.max_chunk_tokens, o.max_chunk_tokens);
    set!(cfg.chunking.overlap_tokens, o.overlap_tokens);
    if let Some(kind) = o.backend {
        cfg.backend.kind = match kind {
            BackendArg::Template => BackendKind::Template,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if o.backend_url.is_some() {
        cfg.backend.url = o.backend_url.clone();
    }
    if o.date.is_some() {
        cfg.report.date = o.date.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.version {
        println!("orthodoc {ENGINE_VERSION} (config schema {CONFIG_SCHEMA_VERSION})");
        return Ok(());
    }
    let cfg = effective_config(&cli)?;
    if cli.print_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Validation(
            "no subcommand given; run `orthodoc --help` for usage".into(),
        ));
    };
    match command {
        Command::Ingest { corpus } => {
            let docs = load_corpus(&corpus)?;
            let store = PassageStore::from_corpus(
                docs,
                cfg.chunking.max_chunk_tokens,
                cfg.chunking.overlap_tokens,
            )?;
            store.save(&cfg.paths.store)?;
            eprintln!(
                "stored {} passage(s) from {} document(s) in {} (fingerprint {})",
                store.passages.len(),
                store.documents.len(),
                cfg.paths.store.display(),
                store.fingerprint()
            );
        }
        Command::BuildGraph { out } => {
            let store = PassageStore::load(&cfg.paths.store)?;
            let lexicon = Lexicon::load(lexicon_path(&cfg, None)?)?;
            let graph = build_graph(
                &store.passages,
                store.fingerprint(),
                &lexicon,
                cfg.chunking.window_tokens,
            )?;
            let out = out.unwrap_or(cfg.paths.graph.clone());
            graph.save(&out)?;
            eprintln!(
                "graph: {} entities, {} relations -> {}",
                graph.entities.len(),
                graph.relations.len(),
                out.display()
            );
        }
        Command::Index { out } => {
            let store = PassageStore::load(&cfg.paths.store)?;
            let index = InvertedIndex::build(&store.passages, store.fingerprint());
            let out = out.unwrap_or(cfg.paths.index.clone());
            index.save(&out)?;
            eprintln!("index over {} passage(s) -> {}", store.passages.len(), out.display());
        }
        Command::TrainHead { dataset, out } => {
            let cases = load_cases(&dataset)?;
            let examples = training_examples(
                &cases,
                &cfg.fusion.classes,
                cfg.fusion.d,
                cfg.fusion.embed_seed,
            )?;
            let outcome = train_head(&examples, cfg.fusion.classes.clone(), &cfg.train_config())?;
            let out = out.unwrap_or(cfg.paths.weights.clone());
            outcome.weights.save(&out)?;
            eprintln!(
                "trained on {} case(s): loss {:.4} -> {:.4}, accuracy {:.2}% -> {}",
                examples.len(),
                outcome.loss_trace[0],
                outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
                outcome.train_accuracy * 100.0,
                out.display()
            );
        }
        Command::Diagnose { case, out } => {
            let case = CaseRecord::load(&case)?;
            case.validate()?;
            let weights = FusionWeights::<f64>::load(&cfg.paths.weights)?;
            let p = diagnose(&case, &weights)?;
            let probs: BTreeMap<&str, f64> = weights
                .class_labels
                .iter()
                .map(String::as_str)
                .zip(p.probabilities.iter().copied())
                .collect();
            let value = json!({
                "case_id": case.case_id,
                "label": p.label,
                "probability": p.probabilities[p.predicted],
                "probabilities": probs,
            });
            write_output(out.as_deref(), &pretty(&value))?;
        }
        Command::Retrieve { query, no_graph, out } => {
            let index = InvertedIndex::load(&cfg.paths.index)?;
            let graph = if no_graph {
                None
            } else {
                Some(KnowledgeGraph::load(&cfg.paths.graph)?)
            };
            let retriever = Retriever::new(&index, graph.as_ref(), cfg.retrieval_params())?;
            let depth = if no_graph { 0 } else { cfg.retrieval.depth };
            let result = retriever.retrieve(&Query::new(query, cfg.retrieval.k, depth))?;
            write_output(out.as_deref(), &pretty(&result))?;
        }
        Command::Report {
            case,
            out,
            json_out,
            no_rag,
            no_cot,
        } => {
            let case = CaseRecord::load(&case)?;
            let lexicon = Lexicon::load(lexicon_path(&cfg, None)?)?;
            let artifacts = load_artifacts(&cfg, lexicon)?;
            let backend = make_backend(&cfg)?;
            let mut opts = RunOptions::from_config(&cfg);
            opts.rag = !no_rag;
            opts.cot = !no_cot;
            let run = run_case(&case, &artifacts, backend.as_ref(), &opts)?;
            for w in &run.report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(v) = &run.report.verification {
                eprintln!(
                    "verification: {} supported, {} flagged, {} removed (tau {}, {})",
                    v.supported, v.flagged, v.removed, v.tau, v.policy
                );
            }
            if let Some(path) = json_out {
                run.report.save(&path)?;
            }
            let tex = emit_latex(&run.report, &artifacts.store, &cfg.report.template_id)?;
            write_output(out.as_deref(), &tex)?;
        }
        Command::Evaluate {
            dataset,
            ratings,
            predictions,
            out,
            tables_out,
        } => {
            let cases = load_cases(&dataset)?;
            let lexicon = Lexicon::load(lexicon_path(&cfg, Some(&dataset))?)?;
            let artifacts = load_artifacts(&cfg, lexicon)?;
            let backend = make_backend(&cfg)?;
            let ratings = load_optional_ratings(ratings.as_deref())?;
            let opts = RunOptions::from_config(&cfg);
            let mut summary =
                eval::evaluate(Variant::Full.as_str(), &cases, &artifacts, backend.as_ref(), &opts, &ratings)?;
            if let Some(path) = predictions {
                apply_external_predictions(&mut summary, &path, &artifacts.weights.class_labels)?;
            }
            let rows = [(tables::ROW_ORTHODOC.to_string(), summary.clone())];
            if let Some(path) = tables_out {
                let mut tex = String::new();
                if let Some(c) = &summary.condition {
                    tex.push_str(&tables::table1(&[(rows[0].0.clone(), c.clone())]));
                    tex.push('\n');
                }
                tex.push_str(&tables::table2(&[(rows[0].0.clone(), summary.quality.clone())]));
                write_file(&path, &tex)?;
            }
            for note in &summary.notes {
                eprintln!("note: {note}");
            }
            write_output(out.as_deref(), &pretty(&summary))?;
        }
        Command::Ablate {
            dataset,
            variants,
            ratings,
            out,
            tables_dir,
        } => {
            let variants = Variant::parse_list(&variants)?;
            let cases = load_cases(&dataset)?;
            let lexicon = Lexicon::load(lexicon_path(&cfg, Some(&dataset))?)?;
            let artifacts = load_artifacts(&cfg, lexicon)?;
            let backend = make_backend(&cfg)?;
            let ratings = load_optional_ratings(ratings.as_deref())?;
            let opts = RunOptions::from_config(&cfg);
            let results =
                eval::ablation_run(&variants, &cases, &artifacts, backend.as_ref(), &opts, &ratings)?;
            let tables = eval::ablation_tables(&results);
            if let Some(dir) = tables_dir {
                fs::create_dir_all(&dir)
                    .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
                for (name, tex) in &tables {
                    write_file(&dir.join(format!("{name}.tex")), tex)?;
                }
            }
            let by_variant: BTreeMap<String, &eval::EvalSummary> =
                results.iter().map(|(v, s)| (v.to_string(), s)).collect();
            write_output(out.as_deref(), &pretty(&by_variant))?;
        }
    }
    Ok(())
}

fn lexicon_path(cfg: &EngineConfig, dataset: Option<&Path>) -> CliResult<PathBuf> {
    if let Some(p) = &cfg.paths.lexicon {
        return Ok(p.clone());
    }
    match dataset {
        Some(dir) => Ok(dir.join("lexicon.jsonl")),
        None => Err(CliError::Validation(
            "no lexicon configured; pass --lexicon or set paths.lexicon".into(),
        )),
    }
}

fn load_artifacts(cfg: &EngineConfig, lexicon: Lexicon) -> CliResult<Artifacts> {
    Ok(Artifacts::load(
        &cfg.paths.store,
        &cfg.paths.graph,
        &cfg.paths.index,
        &cfg.paths.weights,
        lexicon,
    )?)
}

fn make_backend(cfg: &EngineConfig) -> CliResult<Box<dyn GenerationBackend>> {
    Ok(match cfg.backend.kind {
        BackendKind::Template => Box::new(TemplateBackend),
        BackendKind::Http => Box::new(
            HttpBackend::new(cfg.backend.http_config()?)
                .map_err(|e| CliError::Validation(e.to_string()))?,
        ),
    })
}

fn load_optional_ratings(path: Option<&Path>) -> CliResult<BTreeMap<String, f64>> {
    Ok(match path {
        Some(p) => eval::load_ratings(p)?,
        None => BTreeMap::new(),
    })
}

/// Replaces the classifier's labels with externally supplied ones and
/// recomputes the condition metrics.
fn apply_external_predictions(
    summary: &mut eval::EvalSummary,
    path: &Path,
    classes: &[String],
) -> CliResult<()> {
    let raw = fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("reading predictions {}: {e}", path.display()))
    })?;
    let preds: BTreeMap<String, String> = serde_json::from_str(&raw)
        .map_err(|e| CliError::Validation(format!("predictions {}: {e}", path.display())))?;
    for case in &mut summary.per_case {
        match preds.get(&case.case_id) {
            Some(label) => case.predicted = label.clone(),
            None => {
                return Err(CliError::Validation(format!(
                    "predictions file has no entry for case {}",
                    case.case_id
                )))
            }
        }
    }
    *summary = eval::summarize(&summary.variant, summary.per_case.clone(), classes, summary.graph_reads)?;
    Ok(())
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn write_file(path: &Path, content: &str) -> CliResult<()> {
    fs::write(path, content).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
