//! Lexical retrieval with knowledge-graph query expansion.
//!
//! Query text is matched against the graph's entity aliases to find seed
//! entities. Seeds are expanded breadth-first inside their communities, and
//! the canonical names of expanded entities join the query with a weight of
//! `hop_discount^hop`. Passages are ranked by weighted BM25.

pub mod bm25;
pub mod index;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::community::undirected_adjacency;
use crate::kgraph::{EntityId, KnowledgeGraph, PhraseMatcher, Relation};
use crate::text::tokenize;

pub use bm25::{bm25_score, bm25_score_weighted, idf, Bm25Params};
pub use index::{InvertedIndex, Posting};

pub const DEFAULT_HOP_DISCOUNT: f64 = 0.5;
pub const DEFAULT_EXPANSION_CAP: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(default)]
    pub entity_hints: Vec<EntityId>,
    pub k: usize,
    pub expansion_depth: usize,
}

impl Query {
    pub fn new(text: impl Into<String>, k: usize, expansion_depth: usize) -> Self {
        Self {
            text: text.into(),
            entity_hints: Vec::new(),
            k,
            expansion_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage {
    pub passage_id: String,
    pub score: f64,
    pub matched_terms: Vec<String>,
    pub via_entities: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Subgraph {
    pub entities: Vec<EntityId>,
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: Query,
    pub ranked: Vec<ScoredPassage>,
    pub subgraph: Subgraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub bm25: Bm25Params,
    pub hop_discount: f64,
    pub expansion_cap: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            hop_discount: DEFAULT_HOP_DISCOUNT,
            expansion_cap: DEFAULT_EXPANSION_CAP,
        }
    }
}

/// Read-only helpers derived from a graph: alias matcher and adjacency.
#[derive(Debug, Clone)]
pub struct GraphView<'g> {
    pub graph: &'g KnowledgeGraph,
    matcher: PhraseMatcher<EntityId>,
    adjacency: Vec<BTreeMap<EntityId, f64>>,
}

impl<'g> GraphView<'g> {
    pub fn new(graph: &'g KnowledgeGraph) -> Self {
        let patterns = graph.entities.iter().flat_map(|e| {
            e.aliases
                .iter()
                .chain(std::iter::once(&e.canonical_name))
                .map(move |a| {
                    let toks: Vec<String> = tokenize(a).into_iter().map(|t| t.surface).collect();
                    (toks, e.entity_id)
                })
        });
        Self {
            graph,
            matcher: PhraseMatcher::new(patterns),
            adjacency: undirected_adjacency(graph.entities.len(), &graph.relations),
        }
    }

    /// Entities mentioned in `text`, in order of first mention.
    pub fn spot_entities(&self, text: &str) -> Vec<EntityId> {
        let tokens: Vec<String> = tokenize(text).into_iter().map(|t| t.surface).collect();
        let mut out = Vec::new();
        for (_, _, id) in self.matcher.find(&tokens) {
            if !out.contains(&id) {
                out.push(id);
            }
        }
        out
    }

    /// Breadth-first expansion; returns each admitted entity with its hop
    /// distance (seeds at hop 0).
    ///
    /// Only entities in a seed's community are eligible. At each hop the
    /// candidates are ranked by their heaviest edge into the current
    /// frontier (weight descending, id ascending) and admitted until `cap`
    /// non-seed entities have been taken.
    pub fn expand(
        &self,
        seeds: &BTreeSet<EntityId>,
        depth: usize,
        cap: usize,
    ) -> Result<BTreeMap<EntityId, usize>> {
        let graph = self.graph;
        for &s in seeds {
            if graph.entity(s).is_none() {
                return Err(Error::UnknownEntity(s));
            }
        }
        let allowed: BTreeSet<u32> = seeds.iter().map(|s| graph.communities[s]).collect();
        let mut hops: BTreeMap<EntityId, usize> = seeds.iter().map(|&s| (s, 0)).collect();
        let mut frontier: Vec<EntityId> = seeds.iter().copied().collect();
        let mut admitted = 0usize;

        for hop in 1..=depth {
            let mut candidates: BTreeMap<EntityId, f64> = BTreeMap::new();
            for &f in &frontier {
                for (&n, &w) in &self.adjacency[f as usize] {
                    if hops.contains_key(&n) || !allowed.contains(&graph.communities[&n]) {
                        continue;
                    }
                    let best = candidates.entry(n).or_insert(w);
                    if w > *best {
                        *best = w;
                    }
                }
            }
            let mut ranked: Vec<(EntityId, f64)> = candidates.into_iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut next = Vec::new();
            for (n, _) in ranked {
                if admitted == cap {
                    break;
                }
                hops.insert(n, hop);
                admitted += 1;
                next.push(n);
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(hops)
    }
}

/// Expansion over a graph without a prepared [`GraphView`].
pub fn expand_with_graph(
    seeds: &BTreeSet<EntityId>,
    graph: &KnowledgeGraph,
    depth: usize,
    cap: usize,
) -> Result<BTreeMap<EntityId, usize>> {
    GraphView::new(graph).expand(seeds, depth, cap)
}

/// Index plus optional graph, with a counter of graph consultations.
#[derive(Debug)]
pub struct Retriever<'a> {
    pub index: &'a InvertedIndex,
    graph: Option<GraphView<'a>>,
    pub params: RetrievalParams,
    graph_reads: AtomicUsize,
}

impl<'a> Retriever<'a> {
    pub fn new(
        index: &'a InvertedIndex,
        graph: Option<&'a KnowledgeGraph>,
        params: RetrievalParams,
    ) -> Result<Self> {
        params.bm25.validate()?;
        if let Some(g) = graph {
            if g.built_from != index.built_from {
                return Err(Error::FingerprintMismatch {
                    index: index.built_from.clone(),
                    graph: g.built_from.clone(),
                });
            }
        }
        Ok(Self {
            index,
            graph: graph.map(GraphView::new),
            params,
            graph_reads: AtomicUsize::new(0),
        })
    }

    /// Number of `retrieve` calls that consulted the knowledge graph.
    pub fn graph_reads(&self) -> usize {
        self.graph_reads.load(Ordering::Relaxed)
    }

    pub fn has_graph(&self) -> bool {
        self.graph.is_some()
    }

    pub fn retrieve(&self, query: &Query) -> Result<RetrievalResult> {
        if query.k == 0 {
            return Err(Error::InvalidParameter("query k must be at least 1".into()));
        }

        // term -> weight; query text terms carry weight 1
        let mut terms: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokenize(&query.text).into_iter().filter(|t| t.is_content) {
            terms.insert(t.surface, 1.0);
        }

        let mut expanded: BTreeMap<EntityId, usize> = BTreeMap::new();
        let mut entity_terms: BTreeMap<EntityId, BTreeSet<String>> = BTreeMap::new();
        if let Some(view) = &self.graph {
            self.graph_reads.fetch_add(1, Ordering::Relaxed);
            let mut seeds: BTreeSet<EntityId> = query.entity_hints.iter().copied().collect();
            seeds.extend(view.spot_entities(&query.text));
            expanded = view.expand(&seeds, query.expansion_depth, self.params.expansion_cap)?;
            for (&id, &hop) in &expanded {
                let name = &view.graph.entities[id as usize].canonical_name;
                let toks: BTreeSet<String> = tokenize(name)
                    .into_iter()
                    .filter(|t| t.is_content)
                    .map(|t| t.surface)
                    .collect();
                if hop > 0 {
                    let w = self.params.hop_discount.powi(hop as i32);
                    for t in &toks {
                        let slot = terms.entry(t.clone()).or_insert(0.0);
                        if w > *slot {
                            *slot = w;
                        }
                    }
                }
                entity_terms.insert(id, toks);
            }
        }

        let mut candidates: BTreeSet<&str> = BTreeSet::new();
        for term in terms.keys() {
            candidates.extend(self.index.postings(term).iter().map(|p| p.passage_id.as_str()));
        }
        let weighted: Vec<(&str, f64)> = terms.iter().map(|(t, w)| (t.as_str(), *w)).collect();

        let mut ranked = Vec::new();
        for pid in candidates {
            let score = bm25_score_weighted(&weighted, pid, self.index, self.params.bm25)?;
            if score <= 0.0 {
                continue;
            }
            let matched: Vec<String> = terms
                .keys()
                .filter(|t| self.index.term_freq(t, pid) > 0)
                .cloned()
                .collect();
            let via: Vec<EntityId> = entity_terms
                .iter()
                .filter(|(_, toks)| matched.iter().any(|m| toks.contains(m)))
                .map(|(&id, _)| id)
                .collect();
            ranked.push(ScoredPassage {
                passage_id: pid.to_string(),
                score,
                matched_terms: matched,
                via_entities: via,
            });
        }
        ranked.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.passage_id.cmp(&b.passage_id))
        });
        ranked.truncate(query.k);

        let subgraph = match &self.graph {
            Some(view) => {
                let ids: BTreeSet<EntityId> = expanded.keys().copied().collect();
                Subgraph {
                    entities: ids.iter().copied().collect(),
                    relations: view
                        .graph
                        .relations
                        .iter()
                        .filter(|r| ids.contains(&r.src) && ids.contains(&r.dst))
                        .cloned()
                        .collect(),
                }
            }
            None => Subgraph::default(),
        };

        Ok(RetrievalResult {
            query: query.clone(),
            ranked,
            subgraph,
        })
    }
}

/// One-shot retrieval.
pub fn retrieve(
    query: &Query,
    index: &InvertedIndex,
    graph: Option<&KnowledgeGraph>,
    params: RetrievalParams,
) -> Result<RetrievalResult> {
    Retriever::new(index, graph, params)?.retrieve(query)
}
