//! Storyline memory engine for role-playing action prediction.
//!
//! The engine maintains a bank of *bookmarks*: question/answer pairs pinned
//! to a position in a storyline. Before each action prediction it actively
//! proposes the questions worth tracking for the current scene, resolves each
//! one against the bank (reuse an existing bookmark, derive a new one from an
//! existing answer, or create a fresh one), and synchronizes only the selected
//! bookmarks forward by processing the unseen suffix of the storyline. The
//! synchronized answers, together with recently synchronized nearby bookmarks,
//! form the grounding context for the prediction.
//!
//! Crate layout:
//! - [`storyline`]: loading, validation, scene windows, train/test splits
//! - [`lexical`]: tokenization, stop words, Jaccard overlap
//! - [`spans`]: evidence span merging
//! - [`bookmark`] / [`bank`]: the bookmark pool and its reuse/derive lifecycle
//! - [`sync`]: the three type-specific synchronization operators
//! - [`grounding`]: per-step proposal, resolution, context assembly, prediction
//! - [`oracle`]: role-tagged LLM gateway with scripted backend and cache
//! - [`baselines`]: vanilla / retrieval / profile-aggregation comparison methods
//! - [`eval`]: replay harness, EM judging, efficiency metrics, haystack probes
//! - [`config`]: run configuration and the flat key-value config format

pub mod bank;
pub mod baselines;
pub mod bookmark;
pub mod config;
pub mod error;
pub mod eval;
pub mod grounding;
pub mod lexical;
pub mod oracle;
pub mod spans;
pub mod stopwords;
pub mod storyline;
pub mod sync;

/// Engine version stamped into run outputs for provenance.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
