//! LLM-backed crossover and mutation over a chat-completions HTTP contract.
//!
//! Crossover asks the model for a child of two scored parents and falls back
//! to the graph crossover whenever the reply is unusable. Mutation sends one
//! molecule as SELFIES and returns nothing on failure.

mod client;
pub mod mock;
mod prompts;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genetic_ops::{crossover, OperatorLimits};
use crate::molgraph::Molecule;

pub use client::{
    ChatClient, ChatMessage, Clock, Completion, FnClient, HttpChatClient, LlmEndpoint,
    ManualClock, RateLimiter, SystemClock,
};
pub use prompts::{
    extract_boxed, parse_reply, render_caption, render_crossover, render_mutation,
    render_mutation_for, task_ids, TaskPrompt, TemplateId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("prompt template error: {0}")]
    Template(String),
    #[error("{template:?} prompt takes {expected} inputs, got {found}")]
    Arity {
        template: TemplateId,
        expected: usize,
        found: usize,
    },
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingKey(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    BadResponse(String),
}

impl LlmError {
    /// Whether a retry may succeed: connection problems, timeouts, rate
    /// limiting and server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Network(_) => true,
            LlmError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Default)]
pub struct OperatorStats {
    queries: AtomicU64,
    invalid: AtomicU64,
    fallbacks: AtomicU64,
    improved: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    /// HTTP requests sent, retries included.
    pub queries: u64,
    /// Requests that produced no usable molecule.
    pub invalid: u64,
    /// Crossovers answered by the graph operator instead.
    pub fallbacks: u64,
    /// LLM children that beat their best parent.
    pub improved: u64,
}

impl OperatorStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            queries: self.queries.load(Ordering::SeqCst),
            invalid: self.invalid.load(Ordering::SeqCst),
            fallbacks: self.fallbacks.load(Ordering::SeqCst),
            improved: self.improved.load(Ordering::SeqCst),
        }
    }

    pub fn record_improvement(&self) {
        self.improved.fetch_add(1, Ordering::SeqCst);
    }

    /// Continues counting from a saved snapshot.
    pub fn restore(&self, s: StatsSnapshot) {
        self.queries.store(s.queries, Ordering::SeqCst);
        self.invalid.store(s.invalid, Ordering::SeqCst);
        self.fallbacks.store(s.fallbacks, Ordering::SeqCst);
        self.improved.store(s.improved, Ordering::SeqCst);
    }
}

/// Position of an operator call within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotTag {
    pub generation: u32,
    pub slot: u32,
}

/// One prompt/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub generation: u32,
    pub slot: u32,
    pub template: TemplateId,
    pub prompt: String,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Canonical SMILES accepted from the reply.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted: Option<String>,
}

/// Result of an LLM crossover.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverOutcome {
    pub child: Option<Molecule>,
    /// `true` when the child came from the graph operator.
    pub fallback: bool,
}

/// Chat client bound to a task prompt, with counters and a transcript.
pub struct LlmOperator {
    client: Arc<dyn ChatClient>,
    prompt: TaskPrompt,
    stats: OperatorStats,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl LlmOperator {
    /// Fails if `prompt` lacks the slots the given templates need.
    pub fn new(
        client: Arc<dyn ChatClient>,
        prompt: TaskPrompt,
        templates: &[TemplateId],
    ) -> Result<Self, LlmError> {
        for t in templates {
            match t {
                TemplateId::Gpt4Crossover => render_crossover(&prompt, &[("C", 0.0), ("C", 0.0)]).map(drop),
                TemplateId::Biot5Mutation => render_mutation(&prompt, "[C]").map(drop),
                TemplateId::MolstmCaption => render_caption(&prompt).map(drop),
            }?;
        }
        Ok(LlmOperator {
            client,
            prompt,
            stats: OperatorStats::default(),
            transcript: Mutex::new(Vec::new()),
        })
    }

    pub fn stats(&self) -> &OperatorStats {
        &self.stats
    }

    pub fn prompt(&self) -> &TaskPrompt {
        &self.prompt
    }

    /// Removes and returns the transcript, ordered by generation and slot.
    pub fn drain_transcript(&self) -> Vec<TranscriptEntry> {
        let mut entries = std::mem::take(&mut *self.transcript.lock().unwrap_or_else(|p| p.into_inner()));
        entries.sort_by_key(|e| (e.generation, e.slot));
        entries
    }

    fn exchange(&self, prompt: String, template: TemplateId, tag: SlotTag) -> Option<Molecule> {
        let completion = self.client.complete(&[ChatMessage::user(prompt.clone())]);
        self.stats
            .queries
            .fetch_add(u64::from(completion.attempts), Ordering::SeqCst);
        let (reply, error, child) = match completion.reply {
            Ok(text) => {
                let child = parse_reply(&text, template).filter(|m| m.components().len() == 1);
                (Some(text), None, child)
            }
            Err(e) => (None, Some(e.to_string()), None),
        };
        if child.is_none() {
            self.stats.invalid.fetch_add(1, Ordering::SeqCst);
        }
        self.transcript
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(TranscriptEntry {
                generation: tag.generation,
                slot: tag.slot,
                template,
                prompt,
                attempts: completion.attempts,
                reply,
                error,
                accepted: child.as_ref().map(Molecule::to_smiles),
            });
        child
    }

    /// Asks for a child of two scored parents. An unusable reply or a
    /// failed request falls back to [`crossover`] with the untouched `rng`,
    /// so the child matches what the graph operator alone would produce.
    pub fn crossover(
        &self,
        a: (&Molecule, f64),
        b: (&Molecule, f64),
        limits: &OperatorLimits,
        rng: &mut impl Rng,
        tag: SlotTag,
    ) -> CrossoverOutcome {
        let (sa, sb) = (a.0.to_smiles(), b.0.to_smiles());
        let prompt = render_crossover(&self.prompt, &[(&sa, a.1), (&sb, b.1)])
            .expect("slots checked at construction");
        if let Some(child) = self.exchange(prompt, TemplateId::Gpt4Crossover, tag) {
            return CrossoverOutcome {
                child: Some(child),
                fallback: false,
            };
        }
        self.stats.fallbacks.fetch_add(1, Ordering::SeqCst);
        CrossoverOutcome {
            child: crossover(a.0, b.0, limits, rng),
            fallback: true,
        }
    }

    /// Asks for an edited version of `mol`; `None` if the molecule has no
    /// SELFIES form or the reply is unusable.
    pub fn mutate(&self, mol: &Molecule, tag: SlotTag) -> Option<Molecule> {
        let prompt = match render_mutation_for(&self.prompt, mol) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("skipping LLM mutation of {}: {e}", mol.to_smiles());
                return None;
            }
        };
        self.exchange(prompt, TemplateId::Biot5Mutation, tag)
    }
}
