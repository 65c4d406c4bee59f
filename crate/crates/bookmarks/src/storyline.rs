//! Storyline loading, validation, scene windows, and per-character splits.
//!
//! A storyline is an ordered sequence of actions, each tagged with the
//! character that takes it (special names like "Narration" are ordinary
//! characters). Indices are 1-based and implicit in file order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::StorylineError;

/// One action in a storyline: who did/said what, at which position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    /// 1-based position in the storyline.
    pub index: usize,
    /// Character name, NFC-normalized at load. May be a special name such as
    /// "Narration" or "Environment".
    pub character: String,
    /// The action or utterance text.
    pub text: String,
    /// Optional episode label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode: Option<String>,
}

/// A validated storyline: actions indexed 1..=N with no gaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Storyline {
    actions: Vec<Action>,
    characters: BTreeSet<String>,
}

/// The context for predicting one action: up to `W` immediately preceding
/// actions plus the character expected to act.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    /// Index `i` of the action to predict.
    pub target_index: usize,
    /// The immediate predecessors of `i`, in storyline order.
    pub window: Vec<Action>,
    /// Character taking action `i`.
    pub target_character: String,
}

/// Half/half split of one character's actions: the first half (by storyline
/// order) is observation material, the second half is evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterSplit {
    pub character: String,
    /// Storyline index of the last first-half action of this character.
    pub train_cutoff: usize,
    /// Storyline indices of the second-half actions, ascending.
    pub test_indices: Vec<usize>,
}

/// Read access to storyline actions. Synchronizers go through this trait so
/// an instrumented view can verify that only the unseen suffix is touched.
pub trait StoryView {
    fn len(&self) -> usize;
    /// Fetch the action at a 1-based index. Panics if out of range.
    fn action(&self, index: usize) -> &Action;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Hook called by the engine right before a synchronize pass over
    /// `from..=to`. Plain storylines ignore it; instrumented views use it to
    /// police suffix-only access.
    fn note_sync_window(&self, _from: usize, _to: usize) {}
    /// Hook called when a synchronize pass ends.
    fn note_sync_end(&self) {}
}

impl StoryView for Storyline {
    fn len(&self) -> usize {
        self.actions.len()
    }

    fn action(&self, index: usize) -> &Action {
        &self.actions[index - 1]
    }
}

/// On-disk record: one JSON object per line, index implicit in line order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRecord {
    character: String,
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    episode: Option<String>,
}

impl Storyline {
    /// Build a storyline from actions in order, assigning indices 1..=N.
    /// Character names are NFC-normalized.
    pub fn from_records(
        records: impl IntoIterator<Item = (String, String, Option<String>)>,
    ) -> Result<Self, StorylineError> {
        let mut actions = Vec::new();
        for (pos, (character, text, episode)) in records.into_iter().enumerate() {
            let line = pos + 1;
            let character: String = character.nfc().collect();
            if character.is_empty() {
                return Err(StorylineError::EmptyField {
                    line,
                    field: "character",
                });
            }
            if text.is_empty() {
                return Err(StorylineError::EmptyField { line, field: "text" });
            }
            actions.push(Action {
                index: line,
                character,
                text,
                episode,
            });
        }
        if actions.is_empty() {
            return Err(StorylineError::Empty);
        }
        let characters = actions.iter().map(|a| a.character.clone()).collect();
        Ok(Storyline {
            actions,
            characters,
        })
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Distinct character names, sorted.
    pub fn characters(&self) -> &BTreeSet<String> {
        &self.characters
    }

    /// Storyline indices (ascending) of the given character's actions.
    /// The name is NFC-normalized before the case-sensitive comparison.
    pub fn indices_of(&self, character: &str) -> Vec<usize> {
        let wanted: String = character.nfc().collect();
        self.actions
            .iter()
            .filter(|a| a.character == wanted)
            .map(|a| a.index)
            .collect()
    }

    /// Serialize back to the JSON Lines form. `load_storyline` of the output
    /// reproduces the storyline exactly; for files already in canonical field
    /// order the bytes round-trip too.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for a in &self.actions {
            let record = ActionRecord {
                character: a.character.clone(),
                text: a.text.clone(),
                episode: a.episode.clone(),
            };
            // unwrap: struct of strings cannot fail to serialize
            writeln!(out, "{}", serde_json::to_string(&record).unwrap()).unwrap();
        }
        out
    }
}

/// Load a storyline from a JSON Lines file: one object per line with
/// `character` and `text` fields and an optional `episode`. Blank lines are
/// rejected (they would silently shift indices).
pub fn load_storyline(path: impl AsRef<Path>) -> Result<Storyline, StorylineError> {
    let raw = std::fs::read_to_string(path)?;
    parse_storyline(&raw)
}

/// Parse storyline JSONL from a string. See [`load_storyline`].
pub fn parse_storyline(raw: &str) -> Result<Storyline, StorylineError> {
    let mut records = Vec::new();
    for (pos, line) in raw.lines().enumerate() {
        let lineno = pos + 1;
        let record: ActionRecord =
            serde_json::from_str(line).map_err(|e| StorylineError::MalformedLine {
                line: lineno,
                message: e.to_string(),
            })?;
        records.push((record.character, record.text, record.episode));
    }
    Storyline::from_records(records)
}

/// Build the scene for predicting action `i`: the window holds the
/// `min(w, i-1)` immediate predecessors of `i`, in order.
pub fn build_scene(story: &Storyline, i: usize, w: usize) -> Result<Scene, StorylineError> {
    build_scene_opts(story, i, w, false)
}

/// As [`build_scene`], optionally clipping the window at the target action's
/// episode boundary (`within_episode = true` keeps only same-episode
/// predecessors).
pub fn build_scene_opts(
    story: &Storyline,
    i: usize,
    w: usize,
    within_episode: bool,
) -> Result<Scene, StorylineError> {
    let n = story.actions.len();
    if i < 1 || i > n {
        return Err(StorylineError::IndexOutOfRange { index: i, len: n });
    }
    let target = &story.actions[i - 1];
    let start = i.saturating_sub(w).max(1);
    let mut window: Vec<Action> = story.actions[start - 1..i - 1].to_vec();
    if within_episode {
        window.retain(|a| a.episode == target.episode);
    }
    Ok(Scene {
        target_index: i,
        window,
        target_character: target.character.clone(),
    })
}

/// Split a character's actions half/half by storyline order. With an odd
/// count the extra action goes to the first half, so every test index is
/// strictly after the cutoff.
pub fn split_for_character(
    story: &Storyline,
    character: &str,
) -> Result<CharacterSplit, StorylineError> {
    let wanted: String = character.nfc().collect();
    let indices = story.indices_of(&wanted);
    if indices.is_empty() {
        return Err(StorylineError::UnknownCharacter(wanted));
    }
    if indices.len() < 2 {
        return Err(StorylineError::TooFewActions {
            character: wanted,
            count: indices.len(),
        });
    }
    let train_len = indices.len().div_ceil(2);
    let train_cutoff = indices[train_len - 1];
    let test_indices = indices[train_len..].to_vec();
    Ok(CharacterSplit {
        character: wanted,
        train_cutoff,
        test_indices,
    })
}

/// One action rendered as a prompt line.
pub fn action_line(action: &Action) -> String {
    format!("{}: {}", action.character, action.text.replace('\n', " "))
}

/// A [`StoryView`] wrapper that records any read below the synchronization
/// floor announced via [`StoryView::note_sync_window`]. Used to verify the
/// suffix-only access property of the synchronizers.
pub struct InstrumentedStory<'a> {
    inner: &'a Storyline,
    floor: std::sync::atomic::AtomicUsize,
    violations: std::sync::Mutex<Vec<(usize, usize)>>,
    reads: std::sync::atomic::AtomicUsize,
}

impl<'a> InstrumentedStory<'a> {
    pub fn new(inner: &'a Storyline) -> Self {
        InstrumentedStory {
            inner,
            floor: std::sync::atomic::AtomicUsize::new(0),
            violations: std::sync::Mutex::new(Vec::new()),
            reads: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    /// (floor, offending index) pairs observed during synchronize windows.
    pub fn violations(&self) -> Vec<(usize, usize)> {
        self.violations.lock().unwrap().clone()
    }

    /// Total action reads made inside synchronize windows.
    pub fn sync_reads(&self) -> usize {
        self.reads.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl StoryView for InstrumentedStory<'_> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn action(&self, index: usize) -> &Action {
        let floor = self.floor.load(std::sync::atomic::Ordering::Relaxed);
        if floor > 0 {
            self.reads.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            if index < floor {
                self.violations.lock().unwrap().push((floor, index));
            }
        }
        self.inner.action(index)
    }

    fn note_sync_window(&self, from: usize, _to: usize) {
        self.floor.store(from, std::sync::atomic::Ordering::Relaxed);
    }

    fn note_sync_end(&self) {
        self.floor.store(0, std::sync::atomic::Ordering::Relaxed);
    }
}

/// Render scene lines as "Character: text", oldest first. Empty windows get
/// an explicit placeholder so prompts stay well-formed at storyline start.
pub fn render_scene(scene: &Scene) -> String {
    if scene.window.is_empty() {
        return "(start of storyline)".to_string();
    }
    let mut out = String::new();
    for a in &scene.window {
        let text = a.text.replace('\n', " ");
        writeln!(out, "{}: {}", a.character, text).unwrap();
    }
    out.pop();
    out
}
