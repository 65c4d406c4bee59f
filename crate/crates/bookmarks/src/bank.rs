//! The global bookmark pool: lexical prefiltering, reuse/derive/none
//! matching, creation, derivation, and JSON persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bookmark::{AuxMemory, Bookmark, BookmarkId, BookmarkKind, UNKNOWN_ANSWER};
use crate::error::BankError;
use crate::lexical::{normalize_tokens, overlap_score};
use crate::oracle::{DeriveInitializer, OracleResult, Relation, RelationJudge};

pub const BANK_SCHEMA_VERSION: u32 = 1;

/// How a proposed query was resolved against the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Activate this existing bookmark.
    Reuse(BookmarkId),
    /// Initialize a new bookmark from this parent.
    Derive(BookmarkId),
    /// No sufficiently related bookmark; create fresh.
    CreateNew,
}

/// Ablation switches for matching. Disabling reuse maps every outcome to
/// `CreateNew` (and skips the relation oracle entirely); disabling derive
/// ignores `derive` classifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchPolicy {
    pub allow_reuse: bool,
    pub allow_derive: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            allow_reuse: true,
            allow_derive: true,
        }
    }
}

/// A prefilter hit: candidate bookmark and its lexical score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: BookmarkId,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    schema_version: u32,
    next_id: u64,
    bookmarks: Vec<Bookmark>,
}

/// The global memory bank, mutated only by its single replay owner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryBank {
    bookmarks: BTreeMap<BookmarkId, Bookmark>,
    by_kind: BTreeMap<BookmarkKind, BTreeSet<BookmarkId>>,
    next_id: u64,
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bookmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bookmarks.is_empty()
    }

    pub fn get(&self, id: BookmarkId) -> Option<&Bookmark> {
        self.bookmarks.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Bookmark> {
        self.bookmarks.values()
    }

    /// Write back a bookmark after synchronization. The id must exist.
    pub fn replace(&mut self, bookmark: Bookmark) -> Result<(), BankError> {
        let id = bookmark.id;
        match self.bookmarks.get_mut(&id) {
            Some(slot) => {
                debug_assert_eq!(slot.kind, bookmark.kind);
                *slot = bookmark;
                Ok(())
            }
            None => Err(BankError::UnknownBookmark(id.0)),
        }
    }

    fn insert(&mut self, bookmark: Bookmark) -> BookmarkId {
        let id = bookmark.id;
        self.by_kind.entry(bookmark.kind).or_default().insert(id);
        self.bookmarks.insert(id, bookmark);
        id
    }

    fn allocate_id(&mut self) -> BookmarkId {
        let id = BookmarkId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Rank same-kind bookmarks by token overlap with the query, keeping at
    /// most `k_prime` with score > 0. Ties break toward the higher sync
    /// point, then the lower id.
    pub fn prefilter(&self, query: &str, kind: BookmarkKind, k_prime: usize) -> Vec<Candidate> {
        let query_tokens = normalize_tokens(query);
        let mut scored: Vec<(Candidate, usize)> = self
            .by_kind
            .get(&kind)
            .into_iter()
            .flatten()
            .filter_map(|id| {
                let bookmark = &self.bookmarks[id];
                let score = overlap_score(&query_tokens, &normalize_tokens(&bookmark.question));
                (score > 0.0).then_some((
                    Candidate {
                        id: *id,
                        score,
                    },
                    bookmark.sync_point,
                ))
            })
            .collect();
        scored.sort_by(|(a, a_point), (b, b_point)| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b_point.cmp(a_point))
                .then(a.id.cmp(&b.id))
        });
        scored.truncate(k_prime);
        scored.into_iter().map(|(c, _)| c).collect()
    }

    /// Resolve a query against ranked candidates. The relation oracle is
    /// asked per candidate in rank order; a `reuse` classification wins
    /// immediately (nothing outranks sharing an existing slot), otherwise
    /// the first `derive` seen wins after the scan, else `CreateNew`.
    pub fn match_query(
        &self,
        query: &str,
        kind: BookmarkKind,
        candidates: &[Candidate],
        judge: &dyn RelationJudge,
        policy: MatchPolicy,
    ) -> OracleResult<MatchOutcome> {
        if !policy.allow_reuse {
            return Ok(MatchOutcome::CreateNew);
        }
        let mut first_derive: Option<BookmarkId> = None;
        for candidate in candidates {
            let bookmark = &self.bookmarks[&candidate.id];
            match judge.relation(query, kind, bookmark)? {
                Relation::Reuse => return Ok(MatchOutcome::Reuse(candidate.id)),
                Relation::Derive => {
                    if first_derive.is_none() {
                        first_derive = Some(candidate.id);
                    }
                }
                Relation::None => {}
            }
        }
        match first_derive {
            Some(id) if policy.allow_derive => Ok(MatchOutcome::Derive(id)),
            _ => Ok(MatchOutcome::CreateNew),
        }
    }

    /// Create a fresh bookmark at the storyline beginning with an "Unknown"
    /// answer. Behavioral bookmarks require a subject character.
    pub fn create_bookmark(
        &mut self,
        question: &str,
        kind: BookmarkKind,
        subject: Option<&str>,
    ) -> Result<BookmarkId, BankError> {
        if kind == BookmarkKind::Behavioral && subject.is_none() {
            return Err(BankError::MissingSubject);
        }
        let id = self.allocate_id();
        Ok(self.insert(Bookmark {
            id,
            question: question.to_string(),
            answer: UNKNOWN_ANSWER.to_string(),
            kind,
            sync_point: 0,
            aux: AuxMemory::fresh(kind, question, 0),
            subject: subject.map(str::to_string),
            parent: None,
        }))
    }

    /// Initialize a new bookmark from a parent: the answer is projected from
    /// the parent's current answer, the synchronization point is inherited,
    /// and the auxiliary memory starts fresh for the child's kind (concept
    /// keywords come from the new question). The child's kind is the
    /// proposed kind — cross-kind derivation is allowed.
    pub fn derive_bookmark(
        &mut self,
        parent_id: BookmarkId,
        question: &str,
        kind: BookmarkKind,
        subject: Option<&str>,
        oracle: &dyn DeriveInitializer,
    ) -> Result<BookmarkId, BankError> {
        if kind == BookmarkKind::Behavioral && subject.is_none() {
            return Err(BankError::MissingSubject);
        }
        let parent = self
            .bookmarks
            .get(&parent_id)
            .ok_or(BankError::UnknownBookmark(parent_id.0))?;
        let answer = if parent.is_unknown() {
            // nothing to derive from
            UNKNOWN_ANSWER.to_string()
        } else {
            let derived = oracle.derive_answer(&parent.question, &parent.answer, question)?;
            if derived.is_empty() {
                UNKNOWN_ANSWER.to_string()
            } else {
                derived
            }
        };
        let sync_point = parent.sync_point;
        let id = self.allocate_id();
        Ok(self.insert(Bookmark {
            id,
            question: question.to_string(),
            answer,
            kind,
            sync_point,
            aux: AuxMemory::fresh(kind, question, sync_point),
            subject: subject.map(str::to_string),
            parent: Some(parent_id),
        }))
    }

    /// Lossless JSON persistence.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BankError> {
        let file = BankFile {
            schema_version: BANK_SCHEMA_VERSION,
            next_id: self.next_id,
            bookmarks: self.bookmarks.values().cloned().collect(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BankError> {
        let raw = std::fs::read_to_string(path)?;
        Self::from_json(&raw)
    }

    pub fn from_json(raw: &str) -> Result<Self, BankError> {
        let file: BankFile = serde_json::from_str(raw)?;
        if file.schema_version != BANK_SCHEMA_VERSION {
            return Err(BankError::SchemaVersion {
                found: file.schema_version,
                expected: BANK_SCHEMA_VERSION,
            });
        }
        let mut bank = MemoryBank {
            next_id: file.next_id,
            ..Default::default()
        };
        for bookmark in file.bookmarks {
            debug_assert!(bookmark.aux.matches_kind(bookmark.kind));
            bank.next_id = bank.next_id.max(bookmark.id.0 + 1);
            bank.insert(bookmark);
        }
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::OracleError;
    use crate::oracle::OracleRole;
    use std::cell::RefCell;

    /// Judge scripted by candidate question text.
    struct TextJudge {
        answers: Vec<(&'static str, Relation)>,
        calls: RefCell<Vec<String>>,
    }

    impl TextJudge {
        fn new(answers: Vec<(&'static str, Relation)>) -> Self {
            TextJudge {
                answers,
                calls: RefCell::new(Vec::new()),
            }
        }
    }

    impl RelationJudge for TextJudge {
        fn relation(
            &self,
            _query: &str,
            _kind: BookmarkKind,
            candidate: &Bookmark,
        ) -> OracleResult<Relation> {
            self.calls.borrow_mut().push(candidate.question.clone());
            Ok(self
                .answers
                .iter()
                .find(|(q, _)| candidate.question.contains(q))
                .map(|(_, r)| *r)
                .unwrap_or(Relation::None))
        }
    }

    struct EchoDeriver;
    impl DeriveInitializer for EchoDeriver {
        fn derive_answer(&self, _pq: &str, py: &str, _q: &str) -> OracleResult<String> {
            Ok(format!("from: {py}"))
        }
    }

    struct FailingDeriver;
    impl DeriveInitializer for FailingDeriver {
        fn derive_answer(&self, _pq: &str, _py: &str, _q: &str) -> OracleResult<String> {
            Err(OracleError::Backend {
                role: OracleRole::DeriveInitializer,
                message: "down".to_string(),
            })
        }
    }

    fn bank_with(questions: &[(&str, BookmarkKind)]) -> MemoryBank {
        let mut bank = MemoryBank::new();
        for (q, kind) in questions {
            bank.create_bookmark(q, *kind, Some("Kasumi")).unwrap();
        }
        bank
    }

    #[test]
    fn prefilter_excludes_other_kinds_and_zero_scores() {
        let bank = bank_with(&[
            ("Where is Kasumi performing tonight?", BookmarkKind::State),
            ("How does Kasumi react to crowds?", BookmarkKind::Behavioral),
            ("What is the Galaxy Hall?", BookmarkKind::State),
        ]);
        let got = bank.prefilter("Where is Kasumi right now?", BookmarkKind::State, 5);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, BookmarkId(0));
    }

    #[test]
    fn prefilter_caps_at_k_prime_by_score() {
        let mut bank = MemoryBank::new();
        // scores vs query {red, door, garden}: computed by enumerating
        // intersection/union by hand
        bank.create_bookmark("the red door", BookmarkKind::Concept, None).unwrap(); // {red, door}: 2/3
        bank.create_bookmark("a red lantern", BookmarkKind::Concept, None).unwrap(); // {red, lantern}: 1/4
        bank.create_bookmark("blue sky", BookmarkKind::Concept, None).unwrap(); // 0
        let got = bank.prefilter("red door garden", BookmarkKind::Concept, 2);
        assert_eq!(
            got.iter().map(|c| c.id).collect::<Vec<_>>(),
            vec![BookmarkId(0), BookmarkId(1)]
        );
        assert!((got[0].score - 2.0 / 3.0).abs() < 1e-12);
        assert!((got[1].score - 0.25).abs() < 1e-12);
    }

    #[test]
    fn prefilter_tie_breaks_on_sync_point_then_id() {
        let mut bank = MemoryBank::new();
        let a = bank.create_bookmark("garden gate", BookmarkKind::Concept, None).unwrap();
        let b = bank.create_bookmark("garden gate", BookmarkKind::Concept, None).unwrap();
        let mut later = bank.get(b).unwrap().clone();
        later.sync_point = 7;
        bank.replace(later).unwrap();
        let mut earlier = bank.get(a).unwrap().clone();
        earlier.sync_point = 3;
        bank.replace(earlier).unwrap();
        let got = bank.prefilter("garden gate", BookmarkKind::Concept, 5);
        assert_eq!(got.iter().map(|c| c.id).collect::<Vec<_>>(), vec![b, a]);

        // equal sync points: lower id first
        let mut same = bank.get(b).unwrap().clone();
        same.sync_point = 3;
        bank.replace(same).unwrap();
        let got = bank.prefilter("garden gate", BookmarkKind::Concept, 5);
        assert_eq!(got.iter().map(|c| c.id).collect::<Vec<_>>(), vec![a, b]);
    }

    #[test]
    fn match_empty_candidates_creates() {
        let bank = MemoryBank::new();
        let judge = TextJudge::new(vec![]);
        let got = bank
            .match_query("q", BookmarkKind::State, &[], &judge, MatchPolicy::default())
            .unwrap();
        assert_eq!(got, MatchOutcome::CreateNew);
        assert!(judge.calls.borrow().is_empty());
    }

    #[test]
    fn match_prefers_reuse_over_earlier_derive() {
        // relations over ranks 1..3 are [none, derive, reuse]: the scan is
        // two-pass, so the rank-3 reuse beats the rank-2 derive
        let bank = bank_with(&[
            ("alpha topic one", BookmarkKind::State),
            ("alpha topic two", BookmarkKind::State),
            ("alpha topic three", BookmarkKind::State),
        ]);
        let candidates = vec![
            Candidate { id: BookmarkId(0), score: 0.9 },
            Candidate { id: BookmarkId(1), score: 0.8 },
            Candidate { id: BookmarkId(2), score: 0.7 },
        ];
        let judge = TextJudge::new(vec![
            ("one", Relation::None),
            ("two", Relation::Derive),
            ("three", Relation::Reuse),
        ]);
        let got = bank
            .match_query("alpha topic", BookmarkKind::State, &candidates, &judge, MatchPolicy::default())
            .unwrap();
        assert_eq!(got, MatchOutcome::Reuse(BookmarkId(2)));
        // one-pass semantics would have stopped at the derive; assert the
        // judge really saw all three candidates in rank order
        assert_eq!(
            judge.calls.borrow().clone(),
            vec!["alpha topic one", "alpha topic two", "alpha topic three"]
        );
    }

    #[test]
    fn match_derive_when_no_reuse() {
        let bank = bank_with(&[
            ("alpha topic one", BookmarkKind::State),
            ("alpha topic two", BookmarkKind::State),
        ]);
        let candidates = vec![
            Candidate { id: BookmarkId(0), score: 0.9 },
            Candidate { id: BookmarkId(1), score: 0.8 },
        ];
        let judge = TextJudge::new(vec![("two", Relation::Derive)]);
        let got = bank
            .match_query("alpha", BookmarkKind::State, &candidates, &judge, MatchPolicy::default())
            .unwrap();
        assert_eq!(got, MatchOutcome::Derive(BookmarkId(1)));
    }

    #[test]
    fn match_reuse_at_rank_one_short_circuits() {
        let bank = bank_with(&[
            ("alpha topic one", BookmarkKind::State),
            ("alpha topic two", BookmarkKind::State),
        ]);
        let candidates = vec![
            Candidate { id: BookmarkId(0), score: 0.9 },
            Candidate { id: BookmarkId(1), score: 0.8 },
        ];
        let judge = TextJudge::new(vec![("one", Relation::Reuse)]);
        let got = bank
            .match_query("alpha", BookmarkKind::State, &candidates, &judge, MatchPolicy::default())
            .unwrap();
        assert_eq!(got, MatchOutcome::Reuse(BookmarkId(0)));
        assert_eq!(judge.calls.borrow().len(), 1);
    }

    #[test]
    fn derive_disabled_maps_derive_to_create() {
        let bank = bank_with(&[("alpha topic one", BookmarkKind::State)]);
        let candidates = vec![Candidate { id: BookmarkId(0), score: 0.9 }];
        let judge = TextJudge::new(vec![("one", Relation::Derive)]);
        let policy = MatchPolicy {
            allow_reuse: true,
            allow_derive: false,
        };
        let got = bank
            .match_query("alpha", BookmarkKind::State, &candidates, &judge, policy)
            .unwrap();
        assert_eq!(got, MatchOutcome::CreateNew);
    }

    #[test]
    fn reuse_disabled_maps_all_to_create_without_oracle_calls() {
        let bank = bank_with(&[("alpha topic one", BookmarkKind::State)]);
        let candidates = vec![Candidate { id: BookmarkId(0), score: 0.9 }];
        let judge = TextJudge::new(vec![("one", Relation::Reuse)]);
        let policy = MatchPolicy {
            allow_reuse: false,
            allow_derive: true,
        };
        let got = bank
            .match_query("alpha", BookmarkKind::State, &candidates, &judge, policy)
            .unwrap();
        assert_eq!(got, MatchOutcome::CreateNew);
        assert!(judge.calls.borrow().is_empty());
    }

    #[test]
    fn create_bookmark_starts_unknown_at_zero() {
        let mut bank = MemoryBank::new();
        let id = bank
            .create_bookmark("Where is Kasumi now?", BookmarkKind::State, None)
            .unwrap();
        let b = bank.get(id).unwrap();
        assert_eq!(b.answer, UNKNOWN_ANSWER);
        assert_eq!(b.sync_point, 0);
        assert!(b.subject.is_none());
    }

    #[test]
    fn behavioral_create_requires_subject() {
        let mut bank = MemoryBank::new();
        assert!(matches!(
            bank.create_bookmark("How does Arisa respond?", BookmarkKind::Behavioral, None),
            Err(BankError::MissingSubject)
        ));
        let id = bank
            .create_bookmark(
                "How does Arisa respond to Kasumi's plans?",
                BookmarkKind::Behavioral,
                Some("Arisa"),
            )
            .unwrap();
        assert_eq!(bank.get(id).unwrap().subject.as_deref(), Some("Arisa"));
    }

    #[test]
    fn derive_from_unknown_parent_stays_unknown() {
        let mut bank = MemoryBank::new();
        let parent = bank
            .create_bookmark("band's current goal", BookmarkKind::State, None)
            .unwrap();
        // FailingDeriver proves no oracle call happens for Unknown parents
        let child = bank
            .derive_bookmark(parent, "Kasumi's current goal", BookmarkKind::State, None, &FailingDeriver)
            .unwrap();
        let c = bank.get(child).unwrap();
        assert_eq!(c.answer, UNKNOWN_ANSWER);
        assert_eq!(c.sync_point, 0);
        assert_eq!(c.parent, Some(parent));
    }

    #[test]
    fn derive_inherits_sync_point_and_resets_aux() {
        let mut bank = MemoryBank::new();
        let parent = bank
            .create_bookmark("band's current goal", BookmarkKind::State, None)
            .unwrap();
        let mut synced = bank.get(parent).unwrap().clone();
        synced.answer = "win the festival slot".to_string();
        synced.sync_point = 40;
        synced.aux = AuxMemory::State { last_boundary: 40 };
        bank.replace(synced).unwrap();

        let child = bank
            .derive_bookmark(parent, "Kasumi's current goal", BookmarkKind::State, None, &EchoDeriver)
            .unwrap();
        let c = bank.get(child).unwrap();
        assert_eq!(c.sync_point, 40);
        assert_eq!(c.answer, "from: win the festival slot");
        assert_eq!(c.aux, AuxMemory::State { last_boundary: 40 });
    }

    #[test]
    fn cross_kind_derivation_takes_requested_kind() {
        let mut bank = MemoryBank::new();
        let parent = bank
            .create_bookmark("What is the Star Festival?", BookmarkKind::Concept, None)
            .unwrap();
        let mut synced = bank.get(parent).unwrap().clone();
        synced.answer = "an annual stage event".to_string();
        synced.sync_point = 12;
        bank.replace(synced).unwrap();

        let child = bank
            .derive_bookmark(
                parent,
                "Where is the Star Festival held now?",
                BookmarkKind::State,
                None,
                &EchoDeriver,
            )
            .unwrap();
        let c = bank.get(child).unwrap();
        assert_eq!(c.kind, BookmarkKind::State);
        assert_eq!(c.aux, AuxMemory::State { last_boundary: 12 });
    }

    #[test]
    fn derive_oracle_failure_propagates_and_adds_nothing() {
        let mut bank = MemoryBank::new();
        let parent = bank
            .create_bookmark("band's current goal", BookmarkKind::State, None)
            .unwrap();
        let mut synced = bank.get(parent).unwrap().clone();
        synced.answer = "known".to_string();
        bank.replace(synced).unwrap();
        let before = bank.len();
        assert!(bank
            .derive_bookmark(parent, "child", BookmarkKind::State, None, &FailingDeriver)
            .is_err());
        assert_eq!(bank.len(), before);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.json");

        let empty = MemoryBank::new();
        empty.save(&path).unwrap();
        assert_eq!(MemoryBank::load(&path).unwrap(), empty);

        let mut bank = MemoryBank::new();
        bank.create_bookmark("What is the Star Festival?", BookmarkKind::Concept, None)
            .unwrap();
        bank.create_bookmark("Where is Kasumi now?", BookmarkKind::State, None)
            .unwrap();
        bank.create_bookmark(
            "How does Arisa react to plans?",
            BookmarkKind::Behavioral,
            Some("Arisa"),
        )
        .unwrap();
        let mut b = bank.get(BookmarkId(0)).unwrap().clone();
        b.answer = "a stage event".to_string();
        b.sync_point = 9;
        b.aux = AuxMemory::Concept {
            spans: vec![crate::spans::EvidenceSpan::new(3, 7)],
            keywords: vec!["festival".to_string(), "star".to_string()],
        };
        bank.replace(b).unwrap();

        bank.save(&path).unwrap();
        let loaded = MemoryBank::load(&path).unwrap();
        assert_eq!(loaded, bank);
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let err = MemoryBank::from_json(
            r#"{"schema_version": 99, "next_id": 0, "bookmarks": []}"#,
        )
        .unwrap_err();
        assert!(matches!(err, BankError::SchemaVersion { found: 99, .. }));
    }
}
