//! End-to-end wiring: building artifacts from a dataset directory and running
//! one case from diagnosis to a verified report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::GenerationBackend;
use crate::case::CaseRecord;
use crate::config::EngineConfig;
use crate::corpus::load_corpus;
use crate::error::{Error, Result};
use crate::fusion::{embed::HashedEmbedder, predict, train_head, ConditionPrediction, FusionWeights, TrainingExample};
use crate::kgraph::{build_graph, KnowledgeGraph, Lexicon};
use crate::report::{
    draft_all, plan_report, plan_single_pass, synthesize, verify_grounding, Diagnosis, PlanMode, PlanParams,
    Policy, Report, ReportMeta, ReportPlan, ENGINE_VERSION,
};
use crate::retrieval::{InvertedIndex, Retriever, RetrievalParams};
use crate::store::PassageStore;

/// Everything a report run reads.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub store: PassageStore,
    pub lexicon: Lexicon,
    pub graph: KnowledgeGraph,
    pub index: InvertedIndex,
    pub weights: FusionWeights<f64>,
}

/// Standard dataset layout: `corpus.jsonl`, `lexicon.jsonl` and `cases/`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub documents: crate::corpus::Corpus,
    pub lexicon: Lexicon,
    pub cases: Vec<CaseRecord>,
}

impl Dataset {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            documents: load_corpus(dir.join("corpus.jsonl"))?,
            lexicon: Lexicon::load(dir.join("lexicon.jsonl"))?,
            cases: crate::case::load_cases(dir)?,
        })
    }
}

/// Stratified split: within each ground-truth class, taken in case-id order,
/// every `every`-th case goes to the test side. Unlabelled cases are always
/// test cases.
pub fn holdout_split(cases: &[CaseRecord], every: usize) -> Result<(Vec<CaseRecord>, Vec<CaseRecord>)> {
    if every < 2 {
        return Err(Error::InvalidParameter(format!("holdout interval {every} must be at least 2")));
    }
    let mut sorted: Vec<&CaseRecord> = cases.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let mut seen: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for case in sorted {
        match case.ground_truth.as_deref() {
            Some(label) => {
                let n = seen.entry(label).or_insert(0);
                *n += 1;
                if (*n).is_multiple_of(every) {
                    test.push(case.clone());
                } else {
                    train.push(case.clone());
                }
            }
            None => test.push(case.clone()),
        }
    }
    Ok((train, test))
}

/// Embeds every labelled case; unlabelled cases are skipped.
pub fn training_examples(
    cases: &[CaseRecord],
    class_labels: &[String],
    d: usize,
    embed_seed: u64,
) -> Result<Vec<TrainingExample<f64>>> {
    let embedder = HashedEmbedder::new(d, embed_seed)?;
    let mut out = Vec::new();
    for case in cases {
        let Some(truth) = &case.ground_truth else { continue };
        let label = class_labels
            .iter()
            .position(|c| c == truth)
            .ok_or_else(|| Error::UnknownLabel(truth.clone()))?;
        out.push(TrainingExample {
            text: crate::fusion::embed::TextEmbedder::<f64>::embed(&embedder, &case.text())?,
            image: case.image_features()?,
            label,
        });
    }
    Ok(out)
}

impl Artifacts {
    /// Ingests, indexes, builds the graph and trains the head in memory.
    pub fn build(dataset: &Dataset, training_cases: &[CaseRecord], cfg: &EngineConfig) -> Result<Self> {
        let store = PassageStore::from_corpus(
            dataset.documents.clone(),
            cfg.chunking.max_chunk_tokens,
            cfg.chunking.overlap_tokens,
        )?;
        let graph = build_graph(
            &store.passages,
            store.fingerprint(),
            &dataset.lexicon,
            cfg.chunking.window_tokens,
        )?;
        let index = InvertedIndex::build(&store.passages, store.fingerprint());
        let examples = training_examples(
            training_cases,
            &cfg.fusion.classes,
            cfg.fusion.d,
            cfg.fusion.embed_seed,
        )?;
        let weights = train_head(&examples, cfg.fusion.classes.clone(), &cfg.train_config())?.weights;
        Ok(Self {
            store,
            lexicon: dataset.lexicon.clone(),
            graph,
            index,
            weights,
        })
    }

    /// Loads previously built artifacts and checks they come from one corpus.
    pub fn load(
        store_dir: impl AsRef<Path>,
        graph: impl AsRef<Path>,
        index: impl AsRef<Path>,
        weights: impl AsRef<Path>,
        lexicon: Lexicon,
    ) -> Result<Self> {
        let artifacts = Self {
            store: PassageStore::load(store_dir)?,
            lexicon,
            graph: KnowledgeGraph::load(graph)?,
            index: InvertedIndex::load(index)?,
            weights: FusionWeights::load(weights)?,
        };
        artifacts.check()?;
        Ok(artifacts)
    }

    pub fn check(&self) -> Result<()> {
        if self.index.built_from != self.store.fingerprint() {
            return Err(Error::StoreMismatch {
                index: self.index.built_from.clone(),
                store: self.store.fingerprint().to_string(),
            });
        }
        if self.graph.built_from != self.index.built_from {
            return Err(Error::FingerprintMismatch {
                index: self.index.built_from.clone(),
                graph: self.graph.built_from.clone(),
            });
        }
        Ok(())
    }
}

pub fn diagnose(case: &CaseRecord, weights: &FusionWeights<f64>) -> Result<ConditionPrediction<f64>> {
    let embedder = HashedEmbedder::new(weights.dim(), weights.embed_seed)?;
    predict(&case.text(), &case.image_features()?, weights, &embedder)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Expand queries through the knowledge graph.
    pub rag: bool,
    /// Plan and draft section by section.
    pub cot: bool,
    pub plan: PlanParams,
    pub retrieval: RetrievalParams,
    pub tau: f64,
    pub policy: Policy,
    pub concurrency: usize,
    pub date: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            rag: true,
            cot: true,
            plan: PlanParams::default(),
            retrieval: RetrievalParams::default(),
            tau: crate::report::DEFAULT_TAU,
            policy: Policy::Strict,
            concurrency: 4,
            date: None,
        }
    }
}

impl RunOptions {
    pub fn from_config(cfg: &EngineConfig) -> Self {
        Self {
            rag: true,
            cot: true,
            plan: PlanParams {
                k: cfg.retrieval.k,
                depth: cfg.retrieval.depth,
                differential_threshold: cfg.report.differential_threshold,
            },
            retrieval: cfg.retrieval_params(),
            tau: cfg.report.tau,
            policy: cfg.report.policy,
            concurrency: cfg.concurrency,
            date: cfg.report.date.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub prediction: ConditionPrediction<f64>,
    pub diagnosis: Diagnosis,
    pub plan: ReportPlan,
    pub report: Report,
    /// Retrieval calls that consulted the knowledge graph.
    pub graph_reads: usize,
}

pub fn run_case(
    case: &CaseRecord,
    artifacts: &Artifacts,
    backend: &dyn GenerationBackend,
    opts: &RunOptions,
) -> Result<CaseRun> {
    case.validate()?;
    let prediction = diagnose(case, &artifacts.weights)?;
    let labels = &artifacts.weights.class_labels;
    let diagnosis = Diagnosis::from_prediction(&prediction, labels);

    let graph = opts.rag.then_some(&artifacts.graph);
    let mut plan_params = opts.plan;
    if !opts.rag {
        plan_params.depth = 0;
    }
    let retriever = Retriever::new(&artifacts.index, graph, opts.retrieval)?;
    let plan = if opts.cot {
        plan_report(case, &diagnosis, labels, &retriever, &artifacts.store, &plan_params)?
    } else {
        plan_single_pass(case, &diagnosis, labels, &retriever, &artifacts.store, &plan_params)?
    };
    let drafts = draft_all(&plan, case, backend, &artifacts.store, opts.concurrency)?;
    let meta = ReportMeta {
        case_id: case.case_id.clone(),
        engine_version: ENGINE_VERSION.to_string(),
        backend_id: backend.backend_id().to_string(),
        date: opts.date.clone(),
        diagnosis: diagnosis.clone(),
        mode: if opts.cot { PlanMode::Sectioned } else { PlanMode::SinglePass },
    };
    let mut report = synthesize(drafts, meta)?;
    report.warnings.extend(plan.warnings.iter().cloned());
    let report = verify_grounding(report, &artifacts.store, opts.tau, opts.policy)?;
    Ok(CaseRun {
        prediction,
        diagnosis,
        plan,
        report,
        graph_reads: retriever.graph_reads(),
    })
}
