//! Contextual knowledge graph built from the passage store.
//!
//! Entities come from dictionary matching, relations from co-occurrence
//! windows and connective rules, and every relation keeps the passages it
//! was observed in. Communities from label propagation bound how far
//! retrieval expansion may wander.

pub mod community;
pub mod extract;
pub mod lexicon;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::error::{Error, Result};

pub use community::detect_communities;
pub use extract::{extract_entities, extract_relations, EntityMention, MentionExtractor, RelationMention};
pub use lexicon::{Lexicon, LexiconConcept, LexiconEntry, PhraseMatcher};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WINDOW_TOKENS: usize = 12;

pub type EntityId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    Condition,
    Anatomy,
    Procedure,
    Symptom,
    Treatment,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelType {
    CoOccurs,
    Treats,
    LocatedIn,
    Indicates,
    Custom(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: EntityId,
    pub canonical_name: String,
    pub entity_type: EntityType,
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub src: EntityId,
    pub dst: EntityId,
    pub rel_type: RelType,
    /// Number of distinct evidence passages.
    pub weight: f64,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub schema_version: u32,
    /// Fingerprint of the passage store the graph was built from.
    pub built_from: String,
    pub window_tokens: usize,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub communities: BTreeMap<EntityId, u32>,
}

impl KnowledgeGraph {
    /// A graph with no entities, tied to a corpus fingerprint.
    pub fn empty(built_from: impl Into<String>) -> Self {
        Self {
            schema_version: GRAPH_SCHEMA_VERSION,
            built_from: built_from.into(),
            window_tokens: DEFAULT_WINDOW_TOKENS,
            entities: Vec::new(),
            relations: Vec::new(),
            communities: BTreeMap::new(),
        }
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(id as usize)
    }

    pub fn entity_by_name(&self, canonical_name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.canonical_name == canonical_name)
    }

    /// Warning text when the graph was built from a different corpus.
    pub fn fingerprint_warning(&self, store_fingerprint: &str) -> Option<String> {
        (self.built_from != store_fingerprint).then(|| {
            format!(
                "knowledge graph was built from corpus {} but the store is {}",
                short(&self.built_from),
                short(store_fingerprint)
            )
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json("knowledge graph", e))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != GRAPH_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: GRAPH_SCHEMA_VERSION,
                found,
            });
        }
        let graph: KnowledgeGraph =
            serde_json::from_value(value).map_err(|e| Error::json(path.display().to_string(), e))?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.entities.len();
        let mut names = BTreeSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            if e.entity_id as usize != i {
                return Err(Error::InvalidGraph(format!(
                    "entity ids must be dense from 0; position {i} holds {}",
                    e.entity_id
                )));
            }
            if !names.insert(e.canonical_name.as_str()) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate canonical name {:?}",
                    e.canonical_name
                )));
            }
        }
        for r in &self.relations {
            for end in [r.src, r.dst] {
                if end as usize >= n {
                    return Err(Error::InvalidGraph(format!(
                        "relation endpoint {end} is not an entity"
                    )));
                }
            }
            if r.src == r.dst {
                return Err(Error::InvalidGraph(format!("self relation on entity {}", r.src)));
            }
            if !(r.weight.is_finite() && r.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "relation {}-{} has weight {}",
                    r.src, r.dst, r.weight
                )));
            }
            if r.evidence.is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "relation {}-{} has no evidence",
                    r.src, r.dst
                )));
            }
        }
        if self.communities.len() != n || (0..n as u32).any(|id| !self.communities.contains_key(&id)) {
            return Err(Error::InvalidGraph("communities must cover every entity".into()));
        }
        Ok(())
    }
}

fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}

/// Builds the graph with the lexicon as extractor.
pub fn build_graph(
    passages: &[Passage],
    fingerprint: &str,
    lexicon: &Lexicon,
    window_tokens: usize,
) -> Result<KnowledgeGraph> {
    if lexicon.entries().is_empty() {
        return Err(Error::InvalidLexicon("lexicon has no entries".into()));
    }
    let aliases: HashMap<&str, &[String]> = lexicon
        .concepts()
        .iter()
        .map(|c| (c.canonical_name.as_str(), c.aliases.as_slice()))
        .collect();
    build_graph_with(passages, fingerprint, lexicon, window_tokens, |name| {
        aliases.get(name).map(|a| a.to_vec()).unwrap_or_default()
    })
}

/// Builds the graph from any mention extractor. `aliases_for` supplies the
/// alias list recorded on each entity.
pub fn build_graph_with<E, F>(
    passages: &[Passage],
    fingerprint: &str,
    extractor: &E,
    window_tokens: usize,
    aliases_for: F,
) -> Result<KnowledgeGraph>
where
    E: MentionExtractor + ?Sized,
    F: Fn(&str) -> Vec<String>,
{
    let mut entities: Vec<Entity> = Vec::new();
    let mut ids: HashMap<String, EntityId> = HashMap::new();
    let mut aggregated: BTreeMap<(EntityId, EntityId, RelType), Vec<String>> = BTreeMap::new();

    for passage in passages {
        let mentions = extractor.extract(passage);
        for m in &mentions {
            if !ids.contains_key(&m.canonical_name) {
                let id = entities.len() as EntityId;
                let mut aliases = aliases_for(&m.canonical_name);
                if aliases.is_empty() {
                    aliases.push(m.canonical_name.clone());
                }
                entities.push(Entity {
                    entity_id: id,
                    canonical_name: m.canonical_name.clone(),
                    entity_type: m.entity_type,
                    aliases,
                });
                ids.insert(m.canonical_name.clone(), id);
            }
        }
        for rel in extract_relations(passage, &mentions, window_tokens) {
            let (mut src, mut dst) = (ids[&rel.src], ids[&rel.dst]);
            if rel.rel_type == RelType::CoOccurs && src > dst {
                std::mem::swap(&mut src, &mut dst);
            }
            let evidence = aggregated.entry((src, dst, rel.rel_type)).or_default();
            if !evidence.contains(&rel.passage_id) {
                evidence.push(rel.passage_id);
            }
        }
    }

    let relations: Vec<Relation> = aggregated
        .into_iter()
        .map(|((src, dst, rel_type), evidence)| Relation {
            src,
            dst,
            rel_type,
            weight: evidence.len() as f64,
            evidence,
        })
        .collect();
    let communities = detect_communities(entities.len(), &relations);

    Ok(KnowledgeGraph {
        schema_version: GRAPH_SCHEMA_VERSION,
        built_from: fingerprint.to_string(),
        window_tokens,
        entities,
        relations,
        communities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn passage(id: &str, text: &str) -> Passage {
        Passage {
            passage_id: id.into(),
            doc_id: id.split('#').next().unwrap().into(),
            ordinal: 0,
            text: text.into(),
            token_count: tokenize(text).len(),
        }
    }

    fn lexicon() -> Lexicon {
        let e = |p: &str, c: &str, t, hints: Vec<RelType>| LexiconEntry {
            pattern: p.into(),
            canonical_name: c.into(),
            entity_type: t,
            rel_hints: hints,
        };
        Lexicon::new(vec![
            e("fracture", "fracture", EntityType::Condition, vec![RelType::Treats]),
            e("fractures", "fracture", EntityType::Condition, vec![]),
            e("cast", "cast", EntityType::Treatment, vec![RelType::Treats]),
            e("knee", "knee", EntityType::Anatomy, vec![]),
            e("osteoarthritis", "osteoarthritis", EntityType::Condition, vec![]),
        ])
        .unwrap()
    }

    #[test]
    fn aggregates_distinct_evidence() {
        let ps = vec![
            passage("a#0", "fracture and cast"),
            passage("b#0", "cast after fracture"),
            passage("c#0", "fractures need a cast"),
        ];
        let g = build_graph(&ps, "fp", &lexicon(), 12).unwrap();
        assert_eq!(g.entities.len(), 2);
        let co: Vec<&Relation> = g
            .relations
            .iter()
            .filter(|r| r.rel_type == RelType::CoOccurs)
            .collect();
        assert_eq!(co.len(), 1);
        assert_eq!(co[0].weight, 3.0);
        assert_eq!(co[0].evidence, ["a#0", "b#0", "c#0"]);
        assert_eq!(g.entities[0].aliases, ["fracture", "fractures"]);
        g.validate().unwrap();
    }

    #[test]
    fn empty_corpus_empty_graph() {
        let g = build_graph(&[], "fp", &lexicon(), 12).unwrap();
        assert!(g.entities.is_empty() && g.relations.is_empty());
        g.validate().unwrap();
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let ps = vec![
            passage("a#0", "fracture treated with cast"),
            passage("b#0", "knee osteoarthritis"),
        ];
        let g = build_graph(&ps, "fp", &lexicon(), 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("g1.json"), dir.path().join("g2.json"));
        g.save(&p1).unwrap();
        let back = KnowledgeGraph::load(&p1).unwrap();
        assert_eq!(back, g);
        build_graph(&ps, "fp", &lexicon(), 12).unwrap().save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(back.communities.values().collect::<BTreeSet<_>>().len(), 2);
    }

    #[test]
    fn dangling_endpoint_rejected() {
        let ps = vec![passage("a#0", "fracture treated with cast")];
        let mut g = build_graph(&ps, "fp", &lexicon(), 12).unwrap();
        g.relations[0].dst = 999;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        g.save(&path).unwrap();
        match KnowledgeGraph::load(&path) {
            Err(Error::InvalidGraph(msg)) => assert!(msg.contains("999")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_version_checked() {
        let mut g = KnowledgeGraph::empty("fp");
        g.schema_version = 7;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        g.save(&path).unwrap();
        assert!(matches!(
            KnowledgeGraph::load(&path),
            Err(Error::SchemaVersion { expected: 1, found: 7 })
        ));
    }

    #[test]
    fn fingerprint_mismatch_warns() {
        let g = KnowledgeGraph::empty("aaaa");
        assert!(g.fingerprint_warning("aaaa").is_none());
        assert!(g.fingerprint_warning("bbbb").unwrap().contains("bbbb"));
    }

    #[test]
    fn custom_relation_serializes() {
        let json = serde_json::to_string(&RelType::Custom("mimics".into())).unwrap();
        assert_eq!(json, r#"{"custom":"mimics"}"#);
        assert_eq!(serde_json::to_string(&RelType::CoOccurs).unwrap(), r#""co_occurs""#);
    }
}
