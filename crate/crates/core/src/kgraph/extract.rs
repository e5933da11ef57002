//! Dictionary-based mention spotting and rule-based relation extraction.

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::{EntityType, RelType};
use crate::corpus::Passage;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub canonical_name: String,
    pub entity_type: EntityType,
    /// Token range `[start, end)` within the passage.
    pub start: usize,
    pub end: usize,
    pub rel_hints: Vec<RelType>,
}

/// A relation observed in one passage, keyed by canonical names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMention {
    pub src: String,
    pub dst: String,
    pub rel_type: RelType,
    pub passage_id: String,
}

/// Source of entity mentions for graph construction.
pub trait MentionExtractor {
    fn extract(&self, passage: &Passage) -> Vec<EntityMention>;
}

impl MentionExtractor for Lexicon {
    fn extract(&self, passage: &Passage) -> Vec<EntityMention> {
        extract_entities(passage, self)
    }
}

pub fn extract_entities(passage: &Passage, lexicon: &Lexicon) -> Vec<EntityMention> {
    let tokens: Vec<String> = tokenize(&passage.text).into_iter().map(|t| t.surface).collect();
    lexicon
        .matcher()
        .find(&tokens)
        .into_iter()
        .map(|(start, end, idx)| {
            let c = &lexicon.concepts()[idx];
            EntityMention {
                canonical_name: c.canonical_name.clone(),
                entity_type: c.entity_type,
                start,
                end,
                rel_hints: c.rel_hints.clone(),
            }
        })
        .collect()
}

/// Connective phrases that type a relation between the mention on their left
/// (source) and the mention on their right (target).
fn connectives() -> [(&'static [&'static str], RelType); 3] {
    [
        (&["treated", "with"], RelType::Treats),
        (&["indicates"], RelType::Indicates),
        (&["of", "the"], RelType::LocatedIn),
    ]
}

fn contains_phrase(haystack: &[String], phrase: &[&str]) -> bool {
    haystack
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

/// Emits `co_occurs` for every pair of mentions whose start tokens are at
/// most `window_tokens` apart, plus a typed relation when a connective sits
/// between the pair and either endpoint carries that relation as a hint.
pub fn extract_relations(
    passage: &Passage,
    mentions: &[EntityMention],
    window_tokens: usize,
) -> Vec<RelationMention> {
    let tokens: Vec<String> = tokenize(&passage.text).into_iter().map(|t| t.surface).collect();
    let mut ordered: Vec<&EntityMention> = mentions.iter().collect();
    ordered.sort_by_key(|m| (m.start, m.end));

    let mut out: Vec<RelationMention> = Vec::new();
    let mut push = |src: &str, dst: &str, rel_type: RelType| {
        let r = RelationMention {
            src: src.to_string(),
            dst: dst.to_string(),
            rel_type,
            passage_id: passage.passage_id.clone(),
        };
        if !out.contains(&r) {
            out.push(r);
        }
    };

    for (i, a) in ordered.iter().enumerate() {
        for b in &ordered[i + 1..] {
            if b.start - a.start > window_tokens {
                break;
            }
            if a.canonical_name == b.canonical_name {
                continue;
            }
            push(&a.canonical_name, &b.canonical_name, RelType::CoOccurs);
            let gap = if a.end <= b.start { &tokens[a.end..b.start] } else { &[][..] };
            for (phrase, rel) in connectives() {
                let hinted = a.rel_hints.contains(&rel) || b.rel_hints.contains(&rel);
                if hinted && contains_phrase(gap, phrase) {
                    push(&a.canonical_name, &b.canonical_name, rel);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::lexicon::LexiconEntry;

    fn passage(text: &str) -> Passage {
        Passage {
            passage_id: "p#0".into(),
            doc_id: "p".into(),
            ordinal: 0,
            text: text.into(),
            token_count: tokenize(text).len(),
        }
    }

    fn lexicon() -> Lexicon {
        let e = |p: &str, t, hints: Vec<RelType>| LexiconEntry {
            pattern: p.into(),
            canonical_name: p.into(),
            entity_type: t,
            rel_hints: hints,
        };
        Lexicon::new(vec![
            e("radius", EntityType::Anatomy, vec![]),
            e("distal radius", EntityType::Anatomy, vec![RelType::LocatedIn]),
            e("fracture", EntityType::Condition, vec![RelType::Treats, RelType::LocatedIn]),
            e("cast", EntityType::Treatment, vec![RelType::Treats]),
        ])
        .unwrap()
    }

    #[test]
    fn three_mentions_in_order() {
        let m = extract_entities(&passage("distal radius fracture treated with cast"), &lexicon());
        let names: Vec<_> = m.iter().map(|m| m.canonical_name.as_str()).collect();
        assert_eq!(names, ["distal radius", "fracture", "cast"]);
        assert_eq!((m[0].start, m[0].end), (0, 2));
        assert_eq!(m[2].entity_type, EntityType::Treatment);
    }

    #[test]
    fn no_terms_no_mentions() {
        assert!(extract_entities(&passage("patient reports mild pain"), &lexicon()).is_empty());
    }

    #[test]
    fn treated_with_types_the_pair() {
        // fracture @2, cast @6 with "treated with" between them
        let p = passage("the displaced fracture was treated with cast immobilization");
        let m = extract_entities(&p, &lexicon());
        assert_eq!((m[0].start, m[1].start), (2, 6));
        let rels = extract_relations(&p, &m, 8);
        let got: Vec<(&str, &str, &RelType)> = rels
            .iter()
            .map(|r| (r.src.as_str(), r.dst.as_str(), &r.rel_type))
            .collect();
        assert_eq!(
            got,
            [
                ("fracture", "cast", &RelType::CoOccurs),
                ("fracture", "cast", &RelType::Treats)
            ]
        );
        assert!(rels.iter().all(|r| r.passage_id == "p#0"));
    }

    #[test]
    fn located_in_via_of_the() {
        let p = passage("fracture of the distal radius");
        let rels = extract_relations(&p, &extract_entities(&p, &lexicon()), 12);
        assert!(rels.iter().any(|r| r.rel_type == RelType::LocatedIn
            && r.src == "fracture"
            && r.dst == "distal radius"));
    }

    #[test]
    fn out_of_window_pairs_ignored() {
        let filler = vec!["word"; 49].join(" ");
        let p = passage(&format!("fracture {filler} cast"));
        let m = extract_entities(&p, &lexicon());
        assert_eq!(m[1].start - m[0].start, 50);
        assert!(extract_relations(&p, &m, 8).is_empty());
    }

    #[test]
    fn single_mention_has_no_relations() {
        let p = passage("a fracture");
        assert!(extract_relations(&p, &extract_entities(&p, &lexicon()), 8).is_empty());
    }
}
