//! Closed-loop prompt refinement: a planner decomposes a prompt into a
//! checklist of verifiable constraints, then a checker/editor/verifier loop
//! repairs one failed constraint at a time until the image passes or the
//! round budget runs out.
//!
//! The crate is split into five layers:
//!
//! * [`core`] — shared domain types (constraints, checklists, verdicts,
//!   edit instructions, image references) and their validation rules.
//! * [`planner`] — prompt → checklist decomposition, either via a
//!   deterministic grammar or a remote language model.
//! * [`backends`] — the agent traits (`Checker`, `Editor`, `Verifier`) plus
//!   the HTTP wire protocol and response parsing for remote agents.
//! * [`simworld`] — a deterministic scene-graph world that stands in for a
//!   real image model: oracle constraint evaluation, seeded imperfect
//!   editing, and corruption for building test corpora.
//! * [`engine`] — the refinement loop itself, with retry budgets, skip
//!   escape hatches, monotonic acceptance, and a JSONL event trace.

pub mod backends;
pub mod config;
pub mod core;
pub mod engine;
pub mod planner;
pub mod simworld;

pub use crate::core::{
    CheckResult, Checklist, Constraint, ConstraintKind, EditInstruction, EditOp, ImageRef,
    RefineConfig, Verdict,
};
pub use crate::engine::{
    refine, refine_oneline, Agents, EngineError, ItemStatus, RefineAbort, RefineOutcome,
    RefineState, TraceEvent,
};
