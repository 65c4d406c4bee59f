//! The bookmark data structure: one maintained question, its answer valid at
//! a storyline position, and type-specific auxiliary memory.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexical::concept_keywords;
use crate::spans::EvidenceSpan;

/// Answer value encoding "nothing established yet".
pub const UNKNOWN_ANSWER: &str = "Unknown";

/// Unique bookmark identifier, assigned by the bank in creation order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BookmarkId(pub u64);

impl fmt::Display for BookmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// The three search types a bookmark can maintain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookmarkKind {
    /// Entity/concept definitions collected from keyword-matched spans.
    Concept,
    /// Evolving facts (location, goal, relationship) updated chunk by chunk.
    State,
    /// Character behavior patterns backed by filtered action evidence.
    Behavioral,
}

impl BookmarkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BookmarkKind::Concept => "concept",
            BookmarkKind::State => "state",
            BookmarkKind::Behavioral => "behavioral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "concept" => Some(BookmarkKind::Concept),
            "state" => Some(BookmarkKind::State),
            "behavioral" | "behavior" => Some(BookmarkKind::Behavioral),
            _ => None,
        }
    }
}

impl fmt::Display for BookmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One piece of behavioral evidence: the action index and its text snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub index: usize,
    pub snippet: String,
}

/// Type-specific auxiliary memory enabling incremental updates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxMemory {
    /// Last chunk boundary the state operator completed.
    State { last_boundary: usize },
    /// Accepted evidence actions, ascending by index.
    Behavioral { evidence: Vec<EvidenceRecord> },
    /// Merged evidence spans plus the search keywords for the question.
    Concept {
        spans: Vec<EvidenceSpan>,
        keywords: Vec<String>,
    },
}

impl AuxMemory {
    /// Fresh auxiliary memory for a bookmark of `kind` positioned at `point`.
    /// Concept keywords are derived from the question immediately so keyword
    /// search never depends on when the bookmark is first synchronized.
    pub fn fresh(kind: BookmarkKind, question: &str, point: usize) -> Self {
        match kind {
            BookmarkKind::State => AuxMemory::State {
                last_boundary: point,
            },
            BookmarkKind::Behavioral => AuxMemory::Behavioral {
                evidence: Vec::new(),
            },
            BookmarkKind::Concept => AuxMemory::Concept {
                spans: Vec::new(),
                keywords: concept_keywords(question),
            },
        }
    }

    pub fn matches_kind(&self, kind: BookmarkKind) -> bool {
        matches!(
            (self, kind),
            (AuxMemory::State { .. }, BookmarkKind::State)
                | (AuxMemory::Behavioral { .. }, BookmarkKind::Behavioral)
                | (AuxMemory::Concept { .. }, BookmarkKind::Concept)
        )
    }
}

/// A maintained memory item: the answer to `question` as of storyline
/// position `sync_point` (0 = before any action).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bookmark {
    pub id: BookmarkId,
    pub question: String,
    /// Current answer; `"Unknown"` encodes "not established yet".
    pub answer: String,
    pub kind: BookmarkKind,
    /// Latest storyline index at which `answer` is valid.
    pub sync_point: usize,
    pub aux: AuxMemory,
    /// Target character for behavioral bookmarks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    /// Bookmark this one was derived from, recorded for analysis only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<BookmarkId>,
}

impl Bookmark {
    pub fn is_unknown(&self) -> bool {
        self.answer == UNKNOWN_ANSWER
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing_is_lenient_on_case() {
        assert_eq!(BookmarkKind::parse(" State "), Some(BookmarkKind::State));
        assert_eq!(
            BookmarkKind::parse("BEHAVIORAL"),
            Some(BookmarkKind::Behavioral)
        );
        assert_eq!(BookmarkKind::parse("entity"), None);
    }

    #[test]
    fn fresh_concept_aux_has_keywords() {
        let aux = AuxMemory::fresh(BookmarkKind::Concept, "What is the Star Festival?", 0);
        match aux {
            AuxMemory::Concept { spans, keywords } => {
                assert!(spans.is_empty());
                assert_eq!(keywords, vec!["festival".to_string(), "star".to_string()]);
            }
            _ => panic!("wrong aux variant"),
        }
    }

    #[test]
    fn aux_kind_agreement() {
        let aux = AuxMemory::fresh(BookmarkKind::State, "q", 3);
        assert!(aux.matches_kind(BookmarkKind::State));
        assert!(!aux.matches_kind(BookmarkKind::Concept));
    }
}
