//! Tokenization shared by chunking, indexing, entity spotting and grounding.
//!
//! Text is NFC-normalized, split on whitespace and punctuation (hyphens
//! between two alphanumeric characters stay inside the token) and
//! lowercased. Tokens in [`STOPWORDS`] are marked as non-content.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Built-in English stopword list. Kept small on purpose: content-token
/// overlap drives grounding scores, so domain words must never appear here.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor",
    "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves",
    "out", "over", "own", "same", "shall", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "upon", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "within",
    "would", "you", "your", "yours", "yourself",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub is_content: bool,
}

/// A token together with its byte range in the NFC-normalized source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub span: Range<usize>,
}

pub fn is_stopword(surface: &str) -> bool {
    STOPWORDS.binary_search(&surface).is_ok()
}

/// NFC form of `text`. Passage texts are slices of this form.
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_normalized(&normalize(text))
        .into_iter()
        .map(|t| t.token)
        .collect()
}

/// Tokenizes text that is already NFC-normalized, keeping byte spans.
pub fn tokenize_normalized(text: &str) -> Vec<SpannedToken> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;

    for (i, &(offset, ch)) in chars.iter().enumerate() {
        let word = if ch.is_alphanumeric() {
            true
        } else if ch == '-' {
            let prev = i > 0 && chars[i - 1].1.is_alphanumeric();
            let next = chars.get(i + 1).is_some_and(|c| c.1.is_alphanumeric());
            prev && next
        } else {
            false
        };
        match (word, start) {
            (true, None) => start = Some(offset),
            (false, Some(s)) => {
                push_token(&mut out, text, s..offset);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push_token(&mut out, text, s..text.len());
    }
    out
}

fn push_token(out: &mut Vec<SpannedToken>, text: &str, span: Range<usize>) {
    let surface: String = text[span.clone()].to_lowercase().nfc().collect();
    if surface.is_empty() {
        return;
    }
    let is_content = !is_stopword(&surface);
    out.push(SpannedToken {
        token: Token {
            surface,
            is_content,
        },
        span,
    });
}

/// Distinct content-token surfaces of `text`.
pub fn content_set(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.is_content)
        .map(|t| t.surface)
        .collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Splits prose into sentences on `.`, `!` or `?` followed by whitespace or
/// end of text. Terminators inside square brackets (evidence markers) do not
/// split. Returned sentences are trimmed and keep their terminator.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut depth = 0usize;
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        match ch {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            '.' | '!' | '?' if depth == 0 => {
                let boundary = chars.peek().is_none_or(|c| c.is_whitespace());
                if boundary {
                    let s = current.trim();
                    if !s.is_empty() {
                        out.push(s.to_string());
                    }
                    current.clear();
                }
            }
            _ => {}
        }
    }
    let tail = current.trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn stopwords_are_sorted_for_binary_search() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted, STOPWORDS);
        assert!(STOPWORDS.len() >= 100);
    }

    #[test]
    fn colles_fracture() {
        let toks = tokenize("Colles' fracture of the distal radius");
        let s: Vec<&str> = toks.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(s, ["colles", "fracture", "of", "the", "distal", "radius"]);
        let content: Vec<bool> = toks.iter().map(|t| t.is_content).collect();
        assert_eq!(content, [true, true, false, false, true, true]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ,;-- ").is_empty());
    }

    #[test]
    fn intra_word_hyphens_survive() {
        assert_eq!(surfaces("weight-bearing X-ray"), ["weight-bearing", "x-ray"]);
        assert_eq!(surfaces("pain - worse -at night-"), ["pain", "worse", "at", "night"]);
    }

    #[test]
    fn nfc_normalizes_decomposed_input() {
        // "é" as e + combining acute
        assert_eq!(surfaces("Re\u{301}sume\u{301}"), ["résumé"]);
    }

    #[test]
    fn spans_point_into_normalized_text() {
        let text = normalize("Hip (left) pain.");
        let toks = tokenize_normalized(&text);
        let sliced: Vec<&str> = toks.iter().map(|t| &text[t.span.clone()]).collect();
        assert_eq!(sliced, ["Hip", "left", "pain"]);
    }

    #[test]
    fn jaccard_of_worked_sets() {
        let a = content_set("distal radius fracture cast");
        let b = content_set("distal radius fracture immobilization cast weeks");
        assert!((jaccard(&a, &b) - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 0.0);
    }

    #[test]
    fn sentence_split_respects_markers() {
        let s = split_sentences("Casts work [E:apley.v2#0]. Rest now! Is it? tail");
        assert_eq!(s, ["Casts work [E:apley.v2#0].", "Rest now!", "Is it?", "tail"]);
        assert_eq!(split_sentences("Dr.Smith saw 2.5 cm."), ["Dr.Smith saw 2.5 cm."]);
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent_on_joined_output(text in "[ -~äöüÉßñ\\t\\n]{0,80}") {
            let once = tokenize(&text);
            let joined = once.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(tokenize(&joined), once);
        }

        #[test]
        fn tokens_have_no_whitespace(text in "\\PC{0,60}") {
            for t in tokenize(&text) {
                prop_assert!(!t.surface.is_empty());
                prop_assert!(!t.surface.chars().any(char::is_whitespace));
            }
        }
    }
}
