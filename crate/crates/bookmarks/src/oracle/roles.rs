//! Typed interfaces, one per oracle role. Engine code depends on these
//! narrow traits; [`GatewayOracles`] implements them all by rendering the
//! role's prompt template and parsing its constrained output, while tests
//! substitute deterministic stubs.

use crate::bookmark::{Bookmark, BookmarkKind};
use crate::oracle::gateway::Gateway;
use crate::oracle::{prompts, OracleResult, OracleRole, Relation};

pub trait Proposer {
    /// Raw proposal text; the grounding engine parses the line grammar.
    fn propose(&self, character: &str, scene: &str, k: usize) -> OracleResult<String>;
}

pub trait RelationJudge {
    fn relation(
        &self,
        query: &str,
        kind: BookmarkKind,
        candidate: &Bookmark,
    ) -> OracleResult<Relation>;
}

pub trait DeriveInitializer {
    fn derive_answer(
        &self,
        parent_question: &str,
        parent_answer: &str,
        question: &str,
    ) -> OracleResult<String>;
}

pub trait StateTransitioner {
    /// Fold one rendered chunk of actions into the current answer.
    fn transition(&self, question: &str, answer: &str, chunk: &str) -> OracleResult<String>;
}

pub trait EvidenceFilter {
    /// Does this action directly evidence the queried behavioral pattern?
    fn is_evidence(
        &self,
        question: &str,
        subject: &str,
        action: &str,
        context: &str,
    ) -> OracleResult<bool>;
}

pub trait BehaviorSummarizer {
    fn summarize_behavior(
        &self,
        question: &str,
        subject: &str,
        snippets: &str,
    ) -> OracleResult<String>;
}

pub trait ConceptSummarizer {
    fn summarize_concept(
        &self,
        question: &str,
        answer: &str,
        evidence: &str,
    ) -> OracleResult<String>;
}

pub trait Actor {
    fn act(&self, character: &str, scene: &str, grounding: &str) -> OracleResult<String>;
}

pub trait EmJudge {
    fn same_key_move(&self, predicted: &str, reference: &str) -> OracleResult<bool>;
}

pub trait ProfileUpdater {
    fn update_profile(
        &self,
        character: &str,
        profile: &str,
        action: &str,
        context: &str,
    ) -> OracleResult<String>;
}

/// The synchronization operators' oracle bundle.
#[derive(Clone, Copy)]
pub struct SyncOracles<'a> {
    pub state: &'a dyn StateTransitioner,
    pub evidence: &'a dyn EvidenceFilter,
    pub behavior: &'a dyn BehaviorSummarizer,
    pub concept: &'a dyn ConceptSummarizer,
}

/// Gateway-backed implementation of every role trait.
#[derive(Clone, Copy)]
pub struct GatewayOracles<'a> {
    gateway: &'a Gateway,
}

impl<'a> GatewayOracles<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        GatewayOracles { gateway }
    }

    pub fn gateway(&self) -> &'a Gateway {
        self.gateway
    }

    pub fn sync_oracles(&'a self) -> SyncOracles<'a> {
        SyncOracles {
            state: self,
            evidence: self,
            behavior: self,
            concept: self,
        }
    }
}

impl Proposer for GatewayOracles<'_> {
    fn propose(&self, character: &str, scene: &str, k: usize) -> OracleResult<String> {
        self.gateway
            .call_role(OracleRole::Proposer, prompts::proposer(character, scene, k), 512)
    }
}

impl RelationJudge for GatewayOracles<'_> {
    fn relation(
        &self,
        query: &str,
        kind: BookmarkKind,
        candidate: &Bookmark,
    ) -> OracleResult<Relation> {
        self.gateway.classify_relation(prompts::relation_judge(
            query,
            kind,
            &candidate.question,
            candidate.kind,
        ))
    }
}

impl DeriveInitializer for GatewayOracles<'_> {
    fn derive_answer(
        &self,
        parent_question: &str,
        parent_answer: &str,
        question: &str,
    ) -> OracleResult<String> {
        let prompt = prompts::derive_initializer(parent_question, parent_answer, question);
        Ok(self
            .gateway
            .call_role(OracleRole::DeriveInitializer, prompt, 256)?
            .trim()
            .to_string())
    }
}

impl StateTransitioner for GatewayOracles<'_> {
    fn transition(&self, question: &str, answer: &str, chunk: &str) -> OracleResult<String> {
        let prompt = prompts::state_transitioner(question, answer, chunk);
        Ok(self
            .gateway
            .call_role(OracleRole::StateTransitioner, prompt, 256)?
            .trim()
            .to_string())
    }
}

impl EvidenceFilter for GatewayOracles<'_> {
    fn is_evidence(
        &self,
        question: &str,
        subject: &str,
        action: &str,
        context: &str,
    ) -> OracleResult<bool> {
        let prompt = prompts::evidence_filter(question, subject, action, context);
        self.gateway.classify_binary(OracleRole::EvidenceFilter, prompt)
    }
}

impl BehaviorSummarizer for GatewayOracles<'_> {
    fn summarize_behavior(
        &self,
        question: &str,
        subject: &str,
        snippets: &str,
    ) -> OracleResult<String> {
        let prompt = prompts::behavior_summarizer(question, subject, snippets);
        Ok(self
            .gateway
            .call_role(OracleRole::BehaviorSummarizer, prompt, 512)?
            .trim()
            .to_string())
    }
}

impl ConceptSummarizer for GatewayOracles<'_> {
    fn summarize_concept(
        &self,
        question: &str,
        answer: &str,
        evidence: &str,
    ) -> OracleResult<String> {
        let prompt = prompts::concept_summarizer(question, answer, evidence);
        Ok(self
            .gateway
            .call_role(OracleRole::ConceptSummarizer, prompt, 512)?
            .trim()
            .to_string())
    }
}

impl Actor for GatewayOracles<'_> {
    fn act(&self, character: &str, scene: &str, grounding: &str) -> OracleResult<String> {
        let prompt = prompts::actor(character, scene, grounding);
        Ok(self
            .gateway
            .call_role(OracleRole::Actor, prompt, 256)?
            .trim()
            .to_string())
    }
}

impl EmJudge for GatewayOracles<'_> {
    fn same_key_move(&self, predicted: &str, reference: &str) -> OracleResult<bool> {
        let prompt = prompts::em_judge(predicted, reference);
        self.gateway.classify_binary(OracleRole::EMJudge, prompt)
    }
}

impl ProfileUpdater for GatewayOracles<'_> {
    fn update_profile(
        &self,
        character: &str,
        profile: &str,
        action: &str,
        context: &str,
    ) -> OracleResult<String> {
        let prompt = prompts::profile_updater(character, profile, action, context);
        Ok(self
            .gateway
            .call_role(OracleRole::ProfileUpdater, prompt, 512)?
            .trim()
            .to_string())
    }
}
