//! Dictionary of entity surface patterns and the phrase matcher built on it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntityType, RelType};
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub canonical_name: String,
    pub entity_type: EntityType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rel_hints: Vec<RelType>,
}

/// Per-canonical-name view of the lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconConcept {
    pub canonical_name: String,
    pub entity_type: EntityType,
    /// Normalized patterns (token surfaces joined by one space), lexicon order.
    pub aliases: Vec<String>,
    pub rel_hints: Vec<RelType>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    concepts: Vec<LexiconConcept>,
    matcher: PhraseMatcher<usize>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidLexicon("lexicon has no entries".into()));
        }
        let mut concept_idx: HashMap<String, usize> = HashMap::new();
        let mut concepts: Vec<LexiconConcept> = Vec::new();
        let mut patterns: Vec<(Vec<String>, usize)> = Vec::new();
        let mut by_pattern: HashMap<Vec<String>, String> = HashMap::new();

        for (i, entry) in entries.iter().enumerate() {
            let toks: Vec<String> = tokenize(&entry.pattern).into_iter().map(|t| t.surface).collect();
            if toks.is_empty() {
                return Err(Error::InvalidLexicon(format!("entry {i} has an empty pattern")));
            }
            if entry.canonical_name.trim().is_empty() {
                return Err(Error::InvalidLexicon(format!("entry {i} has an empty canonical name")));
            }
            if let Some(prev) = by_pattern.get(&toks) {
                if prev != &entry.canonical_name {
                    return Err(Error::InvalidLexicon(format!(
                        "pattern {:?} maps to both {prev:?} and {:?}",
                        entry.pattern, entry.canonical_name
                    )));
                }
            }
            by_pattern.insert(toks.clone(), entry.canonical_name.clone());

            let idx = match concept_idx.get(&entry.canonical_name) {
                Some(&idx) => {
                    let c = &mut concepts[idx];
                    if c.entity_type != entry.entity_type {
                        return Err(Error::InvalidLexicon(format!(
                            "{:?} declared as both {:?} and {:?}",
                            entry.canonical_name, c.entity_type, entry.entity_type
                        )));
                    }
                    idx
                }
                None => {
                    concepts.push(LexiconConcept {
                        canonical_name: entry.canonical_name.clone(),
                        entity_type: entry.entity_type,
                        aliases: Vec::new(),
                        rel_hints: Vec::new(),
                    });
                    concept_idx.insert(entry.canonical_name.clone(), concepts.len() - 1);
                    concepts.len() - 1
                }
            };
            let concept = &mut concepts[idx];
            let alias = toks.join(" ");
            if !concept.aliases.contains(&alias) {
                concept.aliases.push(alias);
            }
            for hint in &entry.rel_hints {
                if !concept.rel_hints.contains(hint) {
                    concept.rel_hints.push(hint.clone());
                }
            }
            patterns.push((toks, idx));
        }

        Ok(Self {
            entries,
            concepts,
            matcher: PhraseMatcher::new(patterns),
        })
    }

    /// Loads a JSONL lexicon file, one [`LexiconEntry`] per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn concepts(&self) -> &[LexiconConcept] {
        &self.concepts
    }

    pub fn concept(&self, canonical_name: &str) -> Option<&LexiconConcept> {
        self.concepts.iter().find(|c| c.canonical_name == canonical_name)
    }

    /// Canonical names of every concept mentioned in `text`.
    pub fn spot(&self, text: &str) -> BTreeSet<String> {
        let tokens: Vec<String> = tokenize(text).into_iter().map(|t| t.surface).collect();
        self.matcher
            .find(&tokens)
            .into_iter()
            .map(|(_, _, idx)| self.concepts[idx].canonical_name.clone())
            .collect()
    }

    pub(crate) fn matcher(&self) -> &PhraseMatcher<usize> {
        &self.matcher
    }
}

/// Longest-match-wins, left-to-right matcher over token sequences.
#[derive(Debug, Clone)]
pub struct PhraseMatcher<T> {
    by_len: BTreeMap<usize, HashMap<Vec<String>, T>>,
}

impl<T: Clone> PhraseMatcher<T> {
    /// First occurrence of a pattern wins when patterns repeat.
    pub fn new(patterns: impl IntoIterator<Item = (Vec<String>, T)>) -> Self {
        let mut by_len: BTreeMap<usize, HashMap<Vec<String>, T>> = BTreeMap::new();
        for (toks, target) in patterns {
            if toks.is_empty() {
                continue;
            }
            by_len.entry(toks.len()).or_default().entry(toks).or_insert(target);
        }
        Self { by_len }
    }

    pub fn is_empty(&self) -> bool {
        self.by_len.is_empty()
    }

    /// Non-overlapping matches as `(start, end, target)` token ranges.
    pub fn find(&self, tokens: &[String]) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        let mut i = 0;
        'outer: while i < tokens.len() {
            for (&len, table) in self.by_len.iter().rev() {
                if i + len > tokens.len() {
                    continue;
                }
                if let Some(target) = table.get(&tokens[i..i + len]) {
                    out.push((i, i + len, target.clone()));
                    i += len;
                    continue 'outer;
                }
            }
            i += 1;
        }
        out
    }
}
