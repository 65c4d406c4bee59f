//! Lexical utilities: tokenization, overlap scoring, concept keywords.
//!
//! Similarity is Jaccard over unique stop-word-filtered tokens — symmetric,
//! length-robust, and trivially brute-forceable, which keeps matching
//! deterministic across backends.

use std::collections::BTreeSet;

use crate::stopwords::is_stop_word;

/// Lowercase, split on non-alphanumeric characters, drop stop words, dedupe.
pub fn normalize_tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !is_stop_word(t))
        .map(str::to_string)
        .collect()
}

/// Jaccard similarity |a ∩ b| / |a ∪ b|; 0.0 when both sets are empty.
pub fn overlap_score(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    intersection as f64 / union as f64
}

/// Words that shape a question without naming its concept. Applied on top of
/// the stop-word list when extracting concept keywords.
const QUESTION_SCAFFOLDING: &[&str] = &[
    "concept", "current", "currently", "define", "definition", "describe", "explain", "happen",
    "happened", "happens", "mean", "meaning", "means", "story", "storyline",
];

fn is_scaffolding(token: &str) -> bool {
    QUESTION_SCAFFOLDING.binary_search(&token).is_ok()
}

/// Keywords for concept search: the question's normalized tokens minus
/// scaffolding words, plus any double-quoted phrases verbatim. Matching is a
/// case-insensitive substring test, so multi-word phrases survive as units.
pub fn concept_keywords(question: &str) -> Vec<String> {
    let mut keywords: Vec<String> = normalize_tokens(question)
        .into_iter()
        .filter(|t| !is_scaffolding(t))
        .collect();
    for phrase in quoted_phrases(question) {
        if !keywords.contains(&phrase) {
            keywords.push(phrase);
        }
    }
    keywords
}

/// Extract text between pairs of double quotes (straight or curly).
fn quoted_phrases(text: &str) -> Vec<String> {
    let mut phrases = Vec::new();
    let mut current: Option<String> = None;
    for c in text.chars() {
        match c {
            '"' | '\u{201c}' | '\u{201d}' => match current.take() {
                Some(phrase) => {
                    if !phrase.is_empty() {
                        phrases.push(phrase);
                    }
                }
                None => current = Some(String::new()),
            },
            _ => {
                if let Some(p) = current.as_mut() {
                    p.push(c);
                }
            }
        }
    }
    phrases
}

/// True if the action text contains the keyword, case-insensitively.
pub fn contains_keyword(text: &str, keyword: &str) -> bool {
    text.to_lowercase().contains(&keyword.to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokens_strip_stop_words_and_punctuation() {
        // hand-applied against the shipped stop-word list:
        // how/does/to and the possessive "s" are stop words
        let got = normalize_tokens("How does Arisa react to Kasumi's plans?");
        assert_eq!(got, set(&["arisa", "kasumi", "plans", "react"]));
    }

    #[test]
    fn all_stop_words_give_empty_set() {
        assert!(normalize_tokens("the of and").is_empty());
    }

    #[test]
    fn empty_input_gives_empty_set() {
        assert!(normalize_tokens("").is_empty());
    }

    #[test]
    fn identical_sets_score_one() {
        let a = set(&["x", "y"]);
        assert_eq!(overlap_score(&a, &a), 1.0);
    }

    #[test]
    fn disjoint_sets_score_zero() {
        assert_eq!(overlap_score(&set(&["x"]), &set(&["y"])), 0.0);
    }

    #[test]
    fn both_empty_scores_zero() {
        assert_eq!(overlap_score(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn partial_overlap() {
        // intersection {arisa, plans}, union {arisa, react, plans, kasumi}
        let a = set(&["arisa", "react", "plans"]);
        let b = set(&["arisa", "plans", "kasumi"]);
        assert_eq!(overlap_score(&a, &b), 0.5);
    }

    #[test]
    fn scaffolding_list_is_sorted() {
        for pair in QUESTION_SCAFFOLDING.windows(2) {
            assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn concept_keywords_drop_scaffolding_and_keep_quotes() {
        let kw = concept_keywords("What is the \u{201c}Azure Key\u{201d}?");
        assert!(kw.contains(&"azure".to_string()));
        assert!(kw.contains(&"Azure Key".to_string()));
        let kw = concept_keywords("What does the Star Festival mean?");
        assert_eq!(kw, vec!["festival".to_string(), "star".to_string()]);
    }

    #[test]
    fn keyword_match_is_case_insensitive_substring() {
        assert!(contains_keyword("The Azure Key glinted.", "azure key"));
        assert!(!contains_keyword("A blue door.", "azure"));
    }
}
