//! The three type-specific synchronization operators. Each advances a
//! bookmark from its stored point `p` to the target point by processing only
//! the unseen suffix `[p+1 ..= target]` — never anything earlier. On oracle
//! failure the bookmark is left at its last durable step: the last completed
//! chunk for state bookmarks, entirely unchanged for behavioral and concept.

use std::fmt::Write as _;

use crate::bookmark::{AuxMemory, Bookmark, BookmarkKind, EvidenceRecord};
use crate::error::SyncError;
use crate::lexical::contains_keyword;
use crate::oracle::SyncOracles;
use crate::spans::{merge_into, merge_spans, span_around, EvidenceSpan};
use crate::storyline::{action_line, StoryView};

/// Tunables for the synchronization operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncConfig {
    /// Actions per state-transition chunk.
    pub chunk_size: usize,
    /// Actions kept on each side of a concept keyword hit.
    pub context_radius: usize,
    /// Preceding actions shown to the behavioral evidence filter.
    pub behavior_context: usize,
    /// Most-recent evidence snippets passed to the behavior summarizer
    /// (the aux memory keeps all of them).
    pub evidence_cap: usize,
    /// Ablation: update behavioral bookmarks by chunked rewriting instead of
    /// evidence filtering.
    pub incremental_behavior: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            chunk_size: 20,
            context_radius: 2,
            behavior_context: 5,
            evidence_cap: 20,
            incremental_behavior: false,
        }
    }
}

fn render_lines(story: &dyn StoryView, from: usize, to: usize) -> String {
    let mut out = String::new();
    for j in from..=to {
        writeln!(out, "{}", action_line(story.action(j))).unwrap();
    }
    out.pop();
    out
}

/// Synchronize a bookmark to `target`, dispatching on its kind. A no-op when
/// the suffix is empty. The bookmark ends with `sync_point == target` on
/// success; on failure it holds whatever progress was durable.
pub fn synchronize(
    bookmark: &mut Bookmark,
    story: &dyn StoryView,
    target: usize,
    cfg: &SyncConfig,
    oracles: &SyncOracles<'_>,
) -> Result<(), SyncError> {
    if target < bookmark.sync_point {
        return Err(SyncError::TargetBehind {
            target,
            position: bookmark.sync_point,
        });
    }
    if target > story.len() {
        return Err(SyncError::TargetBeyondStory {
            target,
            len: story.len(),
        });
    }
    if target == bookmark.sync_point {
        return Ok(());
    }
    story.note_sync_window(bookmark.sync_point + 1, target);
    let result = match bookmark.kind {
        BookmarkKind::State => sync_state(bookmark, story, target, cfg, oracles),
        BookmarkKind::Behavioral if cfg.incremental_behavior => {
            sync_state(bookmark, story, target, cfg, oracles)
        }
        BookmarkKind::Behavioral => sync_behavioral(bookmark, story, target, cfg, oracles),
        BookmarkKind::Concept => sync_concept(bookmark, story, target, cfg, oracles),
    };
    story.note_sync_end();
    result
}

/// Incremental state synchronization over fixed-size chunks (the last chunk
/// may be short). Each chunk folds into the answer via the state
/// transitioner; progress is committed chunk by chunk, so an interrupted
/// sync resumes from the last completed chunk boundary, never mid-chunk.
pub fn sync_state(
    bookmark: &mut Bookmark,
    story: &dyn StoryView,
    target: usize,
    cfg: &SyncConfig,
    oracles: &SyncOracles<'_>,
) -> Result<(), SyncError> {
    debug_assert!(cfg.chunk_size >= 1);
    while bookmark.sync_point < target {
        let boundary = (bookmark.sync_point + cfg.chunk_size).min(target);
        let chunk = render_lines(story, bookmark.sync_point + 1, boundary);
        let updated = oracles
            .state
            .transition(&bookmark.question, &bookmark.answer, &chunk)?;
        if !updated.is_empty() {
            bookmark.answer = updated;
        }
        bookmark.sync_point = boundary;
        if let AuxMemory::State { last_boundary } = &mut bookmark.aux {
            *last_boundary = boundary;
        }
    }
    Ok(())
}

/// Behavioral synchronization: scan the subject's unseen actions, keep the
/// ones the evidence filter accepts, and re-summarize when anything new
/// arrived. The filter sees each action with its local context, clipped to
/// the unseen suffix so no earlier action is ever re-read.
pub fn sync_behavioral(
    bookmark: &mut Bookmark,
    story: &dyn StoryView,
    target: usize,
    cfg: &SyncConfig,
    oracles: &SyncOracles<'_>,
) -> Result<(), SyncError> {
    let subject = bookmark.subject.clone().ok_or(SyncError::MissingSubject)?;
    let AuxMemory::Behavioral { evidence } = &bookmark.aux else {
        return Err(SyncError::MissingSubject);
    };
    let suffix_start = bookmark.sync_point + 1;
    let mut new_evidence: Vec<EvidenceRecord> = Vec::new();
    for j in suffix_start..=target {
        let action = story.action(j);
        if action.character != subject {
            continue;
        }
        // dedupe by action index across repeated syncs
        if evidence.iter().any(|e| e.index == j) {
            continue;
        }
        let context_start = j.saturating_sub(cfg.behavior_context).max(suffix_start);
        let context = if context_start < j {
            render_lines(story, context_start, j - 1)
        } else {
            "(none)".to_string()
        };
        let line = action_line(action);
        let accepted = oracles
            .evidence
            .is_evidence(&bookmark.question, &subject, &line, &context)?;
        if accepted {
            new_evidence.push(EvidenceRecord {
                index: j,
                snippet: action.text.clone(),
            });
        }
    }
    if !new_evidence.is_empty() {
        let mut all = evidence.clone();
        all.extend(new_evidence);
        let recent_start = all.len().saturating_sub(cfg.evidence_cap);
        let mut snippets = String::new();
        for record in &all[recent_start..] {
            writeln!(snippets, "- {}", record.snippet.replace('\n', " ")).unwrap();
        }
        snippets.pop();
        let summary = oracles
            .behavior
            .summarize_behavior(&bookmark.question, &subject, &snippets)?;
        bookmark.answer = summary;
        bookmark.aux = AuxMemory::Behavioral { evidence: all };
    }
    bookmark.sync_point = target;
    Ok(())
}

/// Concept synchronization: keyword-match the unseen suffix, collect local
/// context spans around hits, merge them with the stored spans, and
/// re-summarize from the newly covered evidence. Stored spans are clipped to
/// `[1, target]`; evidence text is read only from the unseen suffix.
pub fn sync_concept(
    bookmark: &mut Bookmark,
    story: &dyn StoryView,
    target: usize,
    cfg: &SyncConfig,
    oracles: &SyncOracles<'_>,
) -> Result<(), SyncError> {
    let AuxMemory::Concept { spans, keywords } = &bookmark.aux else {
        return Err(SyncError::MissingSubject);
    };
    let suffix_start = bookmark.sync_point + 1;
    let mut hits: Vec<usize> = Vec::new();
    for j in suffix_start..=target {
        let text = &story.action(j).text;
        if keywords.iter().any(|k| contains_keyword(text, k)) {
            hits.push(j);
        }
    }
    if hits.is_empty() {
        bookmark.sync_point = target;
        return Ok(());
    }
    let new_spans: Vec<EvidenceSpan> = merge_spans(
        &hits
            .iter()
            .map(|&j| span_around(j, cfg.context_radius, target))
            .collect::<Vec<_>>(),
    );
    let mut evidence = String::new();
    for (i, span) in new_spans.iter().enumerate() {
        if i > 0 {
            evidence.push_str("\n---\n");
        }
        evidence.push_str(&render_lines(story, span.start.max(suffix_start), span.end));
    }
    let summary = oracles
        .concept
        .summarize_concept(&bookmark.question, &bookmark.answer, &evidence)?;
    let merged = merge_into(spans, &new_spans);
    bookmark.answer = summary;
    bookmark.aux = AuxMemory::Concept {
        spans: merged,
        keywords: keywords.clone(),
    };
    bookmark.sync_point = target;
    Ok(())
}
