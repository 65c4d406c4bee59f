//! Role-tagged gateway for every generative/classification call the engine
//! makes. All calls go through [`Gateway::call`], which routes to a remote
//! chat-completion endpoint or a deterministic scripted backend and keeps an
//! append-only response cache keyed on (role, model, prompt, temperature).

mod backend;
mod cache;
mod gateway;
pub mod prompts;
mod roles;

pub use backend::{Backend, RemoteBackend, ScriptedBackend, ScriptedRule};
pub use cache::{CacheRecord, CacheStats, ResponseCache};
pub use gateway::{BackendKind, Gateway, GatewayConfig, PromptRecord, RetryPolicy};
pub use roles::{
    Actor, BehaviorSummarizer, ConceptSummarizer, DeriveInitializer, EmJudge, EvidenceFilter,
    GatewayOracles, Proposer, RelationJudge, StateTransitioner, SyncOracles,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::OracleError;

/// Every call the engine makes carries exactly one role, so backends can be
/// mapped per role (e.g. a strong model for acting, an auxiliary model for
/// everything else) and scripted rules can dispatch on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OracleRole {
    Proposer,
    RelationJudge,
    DeriveInitializer,
    StateTransitioner,
    EvidenceFilter,
    BehaviorSummarizer,
    ConceptSummarizer,
    Actor,
    EMJudge,
    ProfileUpdater,
}

impl OracleRole {
    pub const ALL: [OracleRole; 10] = [
        OracleRole::Proposer,
        OracleRole::RelationJudge,
        OracleRole::DeriveInitializer,
        OracleRole::StateTransitioner,
        OracleRole::EvidenceFilter,
        OracleRole::BehaviorSummarizer,
        OracleRole::ConceptSummarizer,
        OracleRole::Actor,
        OracleRole::EMJudge,
        OracleRole::ProfileUpdater,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OracleRole::Proposer => "Proposer",
            OracleRole::RelationJudge => "RelationJudge",
            OracleRole::DeriveInitializer => "DeriveInitializer",
            OracleRole::StateTransitioner => "StateTransitioner",
            OracleRole::EvidenceFilter => "EvidenceFilter",
            OracleRole::BehaviorSummarizer => "BehaviorSummarizer",
            OracleRole::ConceptSummarizer => "ConceptSummarizer",
            OracleRole::Actor => "Actor",
            OracleRole::EMJudge => "EMJudge",
            OracleRole::ProfileUpdater => "ProfileUpdater",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for OracleRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully rendered request. Prompts are deterministic functions of their
/// inputs (see [`prompts`]), which is what makes caching and replay sound.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRequest {
    pub role: OracleRole,
    pub prompt: String,
    pub max_output: u32,
    pub temperature: f32,
}

impl OracleRequest {
    pub fn new(role: OracleRole, prompt: impl Into<String>) -> Self {
        OracleRequest {
            role,
            prompt: prompt.into(),
            max_output: 512,
            temperature: 0.0,
        }
    }
}

/// Relation between a proposed query and a candidate bookmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// Same maintained memory target: share the existing bookmark slot.
    Reuse,
    /// Not identical, but the candidate's answer is a useful starting basis.
    Derive,
    /// Not sufficiently relevant.
    None,
}

/// Parse a relation answer leniently: trimmed, case-folded, punctuation
/// stripped. Anything unrecognized is logged and treated as `None`.
pub fn parse_relation(raw: &str) -> Relation {
    match normalize_constrained(raw).as_str() {
        "reuse" => Relation::Reuse,
        "derive" => Relation::Derive,
        "none" => Relation::None,
        other => {
            log::warn!("unparseable relation answer {other:?}; treating as none");
            Relation::None
        }
    }
}

/// Parse a yes/no answer leniently; anything unrecognized is logged and
/// treated as negative.
pub fn parse_yes_no(raw: &str) -> bool {
    match normalize_constrained(raw).as_str() {
        "yes" => true,
        "no" => false,
        other => {
            log::warn!("unparseable yes/no answer {other:?}; treating as no");
            false
        }
    }
}

fn normalize_constrained(raw: &str) -> String {
    raw.trim()
        .trim_matches(|c: char| c.is_ascii_punctuation())
        .to_lowercase()
}

/// Hash used for cache keys and for naming prompts in error messages.
pub fn prompt_hash(role: OracleRole, model: &str, prompt: &str, temperature: f32) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(role.as_str().as_bytes());
    hasher.update([0]);
    hasher.update(model.as_bytes());
    hasher.update([0]);
    hasher.update(prompt.as_bytes());
    hasher.update([0]);
    hasher.update(format!("{temperature}").as_bytes());
    hex_string(&hasher.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Convenience alias used throughout the engine.
pub type OracleResult<T> = Result<T, OracleError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_names_round_trip() {
        for role in OracleRole::ALL {
            assert_eq!(OracleRole::parse(role.as_str()), Some(role));
        }
        assert_eq!(OracleRole::parse("actor"), None);
    }

    #[test]
    fn yes_no_parsing_is_lenient() {
        assert!(parse_yes_no("yes"));
        assert!(parse_yes_no("Yes."));
        assert!(parse_yes_no(" YES!\n"));
        assert!(!parse_yes_no("no"));
        assert!(!parse_yes_no("maybe"));
        assert!(!parse_yes_no(""));
    }

    #[test]
    fn relation_parsing_is_lenient() {
        assert_eq!(parse_relation("Reuse"), Relation::Reuse);
        assert_eq!(parse_relation("derive."), Relation::Derive);
        assert_eq!(parse_relation("none"), Relation::None);
        assert_eq!(parse_relation("unrelated"), Relation::None);
    }

    #[test]
    fn prompt_hash_depends_on_all_fields() {
        let base = prompt_hash(OracleRole::Actor, "m", "p", 0.0);
        assert_ne!(base, prompt_hash(OracleRole::EMJudge, "m", "p", 0.0));
        assert_ne!(base, prompt_hash(OracleRole::Actor, "m2", "p", 0.0));
        assert_ne!(base, prompt_hash(OracleRole::Actor, "m", "p2", 0.0));
        assert_ne!(base, prompt_hash(OracleRole::Actor, "m", "p", 0.7));
        assert_eq!(base, prompt_hash(OracleRole::Actor, "m", "p", 0.0));
    }
}
