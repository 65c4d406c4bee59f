//! Evidence spans: inclusive index intervals over the storyline, kept sorted
//! and non-overlapping. Overlapping or contiguous spans coalesce, so the
//! stored set is exactly the maximal runs of covered indices.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Inclusive range of storyline indices holding evidence for a bookmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EvidenceSpan {
    pub start: usize,
    pub end: usize,
}

impl EvidenceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start >= 1 && start <= end);
        EvidenceSpan { start, end }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

// Persisted as a [start, end] pair.
impl Serialize for EvidenceSpan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.start, self.end).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EvidenceSpan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (start, end) = <(usize, usize)>::deserialize(deserializer)?;
        if start < 1 || start > end {
            return Err(D::Error::custom(format!(
                "invalid span [{start}, {end}]"
            )));
        }
        Ok(EvidenceSpan { start, end })
    }
}

/// Merge spans into sorted maximal runs: overlapping spans and spans with no
/// index between them (`next.start <= current.end + 1`) coalesce. The result
/// equals the set-union of covered indices re-segmented into maximal runs.
pub fn merge_spans(spans: &[EvidenceSpan]) -> Vec<EvidenceSpan> {
    let mut sorted: Vec<EvidenceSpan> = spans.to_vec();
    sorted.sort();
    let mut merged: Vec<EvidenceSpan> = Vec::with_capacity(sorted.len());
    for span in sorted {
        match merged.last_mut() {
            Some(last) if span.start <= last.end + 1 => {
                last.end = last.end.max(span.end);
            }
            _ => merged.push(span),
        }
    }
    merged
}

/// Merge new spans into an existing (already merged) set.
pub fn merge_into(existing: &[EvidenceSpan], new: &[EvidenceSpan]) -> Vec<EvidenceSpan> {
    let mut all = existing.to_vec();
    all.extend_from_slice(new);
    merge_spans(&all)
}

/// Span around a hit at `index` with the given radius, clipped to
/// `[1, limit]`.
pub fn span_around(index: usize, radius: usize, limit: usize) -> EvidenceSpan {
    let start = index.saturating_sub(radius).max(1);
    let end = (index + radius).min(limit);
    EvidenceSpan::new(start, end)
}

/// Reference implementation for tests and acceptance checks: collect every
/// covered index into a set, then re-segment into maximal consecutive runs.
pub fn brute_force_merge(spans: &[EvidenceSpan]) -> Vec<EvidenceSpan> {
    let mut covered: Vec<usize> = spans
        .iter()
        .flat_map(|s| s.start..=s.end)
        .collect();
    covered.sort_unstable();
    covered.dedup();
    let mut runs = Vec::new();
    for index in covered {
        match runs.last_mut() {
            Some(EvidenceSpan { end, .. }) if *end + 1 == index => *end = index,
            _ => runs.push(EvidenceSpan::new(index, index)),
        }
    }
    runs
}
