//! Prompt → checklist decomposition.
//!
//! Two interchangeable paths produce a [`Checklist`]: [`plan_rule`] parses
//! the prompt with a deterministic closed-vocabulary grammar (no model
//! calls), and [`plan_remote`] asks a remote planner model for a numbered
//! list of yes/no questions and classifies each line by keyword heuristics.

mod grammar;
mod lexicon;
mod remote;

pub use grammar::plan_rule;
pub use lexicon::GrammarLexicons;
pub use remote::{classify_line, plan_remote};

use crate::backends::PlannerBackend;
use crate::core::Checklist;
use std::sync::Arc;
use thiserror::Error;

/// Why planning failed.
#[derive(Debug, Error)]
pub enum PlanError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("planner backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("planner response unparseable: {0}")]
    UnparseableResponse(String),
}

/// Anything that can turn a prompt into a checklist.
pub trait ChecklistPlanner: Send + Sync {
    fn plan(&self, prompt: &str) -> Result<Checklist, PlanError>;

    /// Short tag for traces ("rule" / "remote").
    fn name(&self) -> &'static str;
}

/// The deterministic grammar path. Stateless; every call is a pure function
/// of the prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct RulePlanner;

impl ChecklistPlanner for RulePlanner {
    fn plan(&self, prompt: &str) -> Result<Checklist, PlanError> {
        plan_rule(prompt)
    }

    fn name(&self) -> &'static str {
        "rule"
    }
}

/// Delegates planning to a remote model behind a [`PlannerBackend`].
pub struct RemotePlanner {
    backend: Arc<dyn PlannerBackend>,
}

impl RemotePlanner {
    pub fn new(backend: Arc<dyn PlannerBackend>) -> Self {
        RemotePlanner { backend }
    }
}

impl ChecklistPlanner for RemotePlanner {
    fn plan(&self, prompt: &str) -> Result<Checklist, PlanError> {
        plan_remote(prompt, self.backend.as_ref())
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}
