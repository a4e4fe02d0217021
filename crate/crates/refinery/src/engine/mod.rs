//! The multi-round refinement loop: sweep the checklist, repair one failed
//! constraint at a time under a K-attempt budget, accept only verified
//! improvements, and emit a full event trace.

mod oneline;

pub use oneline::{refine_oneline, write_trace};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::backends::{
    verify, AlignmentScorer, BackendError, Checker, Editor, Verifier,
};
use crate::core::{
    digest_hex, Checklist, Constraint, CoreError, EditInstruction, ImageRef, RefineConfig, Verdict,
};
use crate::planner::{ChecklistPlanner, PlanError};

// ============================================================
// Types
// ============================================================

/// Lifecycle of one checklist item. `Passed` and `Skipped` are absorbing:
/// once set, the engine never touches the item again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemStatus {
    /// Not yet confirmed; re-checked at the top of each sweep.
    Pending,
    /// Confirmed satisfied by a checker call.
    Passed,
    /// Escape hatch: every edit attempt was rejected, so the item is
    /// abandoned for all remaining rounds.
    Skipped,
}

impl ItemStatus {
    pub fn name(self) -> &'static str {
        match self {
            ItemStatus::Pending => "pending",
            ItemStatus::Passed => "passed",
            ItemStatus::Skipped => "skipped",
        }
    }
}

/// Mutable run state threaded through the loop.
#[derive(Debug, Clone, Serialize)]
pub struct RefineState {
    pub prompt: String,
    pub checklist: Checklist,
    pub statuses: BTreeMap<u32, ItemStatus>,
    /// The best image so far; only verified improvements replace it.
    pub best: ImageRef,
    /// 1-based round counter; 0 before the first sweep starts.
    pub round: u32,
    pub editor_calls: u64,
    /// Alignment scores recorded when a score probe is configured: the
    /// initial score, then one entry per accepted edit.
    pub accepted_scores: Vec<f64>,
}

impl RefineState {
    pub fn pending_count(&self) -> usize {
        self.statuses.values().filter(|s| **s == ItemStatus::Pending).count()
    }
}

/// The event vocabulary of a run trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Plan,
    CheckPass,
    CheckFail,
    EditAttempt,
    Verdict,
    Accept,
    Reject,
    Skip,
    Finish,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Plan => "plan",
            EventKind::CheckPass => "check_pass",
            EventKind::CheckFail => "check_fail",
            EventKind::EditAttempt => "edit_attempt",
            EventKind::Verdict => "verdict",
            EventKind::Accept => "accept",
            EventKind::Reject => "reject",
            EventKind::Skip => "skip",
            EventKind::Finish => "finish",
        }
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of the JSONL run trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEvent {
    pub run_id: String,
    /// Strictly increasing within a run, starting at 0.
    pub seq: u64,
    /// Round the event belongs to; 0 for pre-loop events (plan).
    pub round: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_id: Option<u32>,
    pub event: EventKind,
    pub payload: Value,
    /// Digest of the best image at emission time; accept events carry the
    /// newly accepted digest, reject events the unchanged one.
    pub best_digest: String,
}

/// Append-only event sink with sequence numbering.
#[derive(Debug)]
pub struct Tracer {
    run_id: String,
    events: Vec<TraceEvent>,
}

impl Tracer {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self { run_id: run_id.into(), events: Vec::new() }
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    fn emit(
        &mut self,
        round: u32,
        constraint_id: Option<u32>,
        event: EventKind,
        payload: Value,
        best_digest: &str,
    ) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            run_id: self.run_id.clone(),
            seq,
            round,
            constraint_id,
            event,
            payload,
            best_digest: best_digest.to_string(),
        });
    }
}

/// The four agents a run needs, plus an optional alignment probe used to
/// record `accepted_scores` (exact in simulator mode; omit for remote
/// backends where no ground-truth score exists).
#[derive(Clone)]
pub struct Agents {
    pub planner: Arc<dyn ChecklistPlanner>,
    pub checker: Arc<dyn Checker>,
    pub editor: Arc<dyn Editor>,
    pub verifier: Arc<dyn Verifier>,
    pub score_probe: Option<Arc<dyn AlignmentScorer>>,
}

/// Failures that abort a run.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("planner failed: {0}")]
    PlannerFailed(#[from] PlanError),
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("invalid input: {0}")]
    Invalid(#[from] CoreError),
    #[error("no refinement config found: {0}")]
    ConfigNotFound(String),
    #[error("bad refinement config: {0}")]
    BadConfig(String),
    #[error("cannot load image `{path}`: {detail}")]
    BadImage { path: String, detail: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// A completed run: the final best image, the end state, and every event.
#[derive(Debug)]
pub struct RefineOutcome {
    pub final_image: ImageRef,
    pub state: RefineState,
    pub trace: Vec<TraceEvent>,
}

/// An aborted run. Progress is never discarded: the best image reached so
/// far lives in `state`, and the trace covers everything up to the failure.
#[derive(Debug)]
pub struct RefineAbort {
    pub error: EngineError,
    /// `None` only when the run failed before planning produced a state.
    pub state: Option<RefineState>,
    pub trace: Vec<TraceEvent>,
}

impl std::fmt::Display for RefineAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "refinement aborted: {}", self.error)
    }
}

impl std::error::Error for RefineAbort {}

/// Result of the K-attempt inner loop for one constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixOutcome {
    /// A candidate was verified as better and became the new best.
    Accepted,
    /// All attempts were rejected; the constraint is now `Skipped`.
    Exhausted,
}

// ============================================================
// The loop
// ============================================================

/// Derive the default run id: the first 12 hex digits of the digest of
/// `prompt` and the initial image digest.
pub fn derive_run_id(prompt: &str, initial: &ImageRef) -> String {
    let tag = format!("{prompt}:{}", initial.digest);
    digest_hex(tag.as_bytes())[..12].to_string()
}

/// Run the refinement loop with a derived run id. See [`refine_run`].
pub fn refine(
    prompt: &str,
    initial: &ImageRef,
    agents: &Agents,
    config: &RefineConfig,
) -> Result<RefineOutcome, Box<RefineAbort>> {
    refine_run(&derive_run_id(prompt, initial), prompt, initial, agents, config)
}

/// Run the refinement loop.
///
/// Plans a checklist, then sweeps it for up to `config.max_rounds` rounds.
/// Each sweep re-checks every still-pending constraint against the current
/// best image; a failing check triggers the K-attempt edit/verify loop
/// ([`attempt_fix`]). The run ends early once nothing is pending.
pub fn refine_run(
    run_id: &str,
    prompt: &str,
    initial: &ImageRef,
    agents: &Agents,
    config: &RefineConfig,
) -> Result<RefineOutcome, Box<RefineAbort>> {
    let mut tracer = Tracer::new(run_id);

    if let Err(e) = config.validate() {
        return Err(abort(e.into(), None, tracer));
    }
    if let Err(e) = initial.validate() {
        return Err(abort(e.into(), None, tracer));
    }

    let checklist = match agents.planner.plan(prompt) {
        Ok(c) => c,
        Err(e) => return Err(abort(e.into(), None, tracer)),
    };
    tracer.emit(
        0,
        None,
        EventKind::Plan,
        json!({ "planner": agents.planner.name(), "items": checklist.items.len() }),
        &initial.digest,
    );

    let mut state = RefineState {
        prompt: prompt.to_string(),
        statuses: checklist.items.iter().map(|c| (c.id, ItemStatus::Pending)).collect(),
        checklist,
        best: initial.clone(),
        round: 0,
        editor_calls: 0,
        accepted_scores: Vec::new(),
    };

    if let Some(probe) = &agents.score_probe {
        match probe.score(prompt, &state.best) {
            Ok(s) => state.accepted_scores.push(s),
            Err(e) => return Err(abort(e.into(), Some(state), tracer)),
        }
    }

    let mut outcome_tag = "exhausted";
    for round in 1..=config.max_rounds {
        state.round = round;
        for idx in 0..state.checklist.items.len() {
            let c = state.checklist.items[idx].clone();
            if state.statuses[&c.id] != ItemStatus::Pending {
                continue;
            }

            let outcome = match agents.checker.check(&state.best, &c) {
                Ok(o) => o,
                Err(e) => return Err(abort(e.into(), Some(state), tracer)),
            };
            if outcome.result.passed {
                state.statuses.insert(c.id, ItemStatus::Passed);
                tracer.emit(
                    round,
                    Some(c.id),
                    EventKind::CheckPass,
                    json!({ "question": c.question }),
                    &state.best.digest,
                );
                continue;
            }

            tracer.emit(
                round,
                Some(c.id),
                EventKind::CheckFail,
                json!({ "reason": outcome.result.reason }),
                &state.best.digest,
            );
            // The checker's failure reason doubles as the edit instruction.
            let instruction = outcome
                .instruction
                .unwrap_or_else(|| EditInstruction::new(outcome.result.reason.clone(), vec![]));

            if let Err(e) = attempt_fix(&mut state, &mut tracer, &c, &instruction, agents, config)
            {
                return Err(abort(e, Some(state), tracer));
            }
        }
        if state.pending_count() == 0 {
            outcome_tag = "complete";
            break;
        }
    }

    let statuses: BTreeMap<String, &'static str> =
        state.statuses.iter().map(|(id, s)| (id.to_string(), s.name())).collect();
    tracer.emit(
        state.round,
        None,
        EventKind::Finish,
        json!({
            "outcome": outcome_tag,
            "rounds": state.round,
            "editor_calls": state.editor_calls,
            "statuses": statuses,
        }),
        &state.best.digest,
    );

    Ok(RefineOutcome { final_image: state.best.clone(), state, trace: tracer.into_events() })
}

/// The K-attempt edit/verify inner loop for one failing constraint.
///
/// Every editor invocation counts against the budget, including rejected
/// edits. A candidate identical to the current best short-circuits to
/// `Same` without consulting the verifier. Only a `Better` verdict replaces
/// the best image; after K rejections the constraint is skipped for the
/// rest of the run.
pub fn attempt_fix(
    state: &mut RefineState,
    tracer: &mut Tracer,
    c: &Constraint,
    instruction: &EditInstruction,
    agents: &Agents,
    config: &RefineConfig,
) -> Result<FixOutcome, EngineError> {
    let round = state.round;
    for attempt in 1..=config.retry_budget_k {
        let pre_digest = state.best.digest.clone();
        state.editor_calls += 1;
        tracer.emit(
            round,
            Some(c.id),
            EventKind::EditAttempt,
            json!({
                "attempt": attempt,
                "instruction": instruction.surface,
                "ops": instruction.ops.len(),
            }),
            &pre_digest,
        );

        let candidate = match agents.editor.edit(&state.best, instruction) {
            Ok(img) => img,
            Err(BackendError::EditRejected(detail)) => {
                // An editor refusal consumes the attempt but is not verified
                // and never aborts the run.
                tracer.emit(
                    round,
                    Some(c.id),
                    EventKind::Reject,
                    json!({ "attempt": attempt, "edit_rejected": detail }),
                    &pre_digest,
                );
                continue;
            }
            Err(other) => return Err(other.into()),
        };

        let verdict = verify(&state.prompt, &state.best, &candidate, agents.verifier.as_ref())?;
        tracer.emit(
            round,
            Some(c.id),
            EventKind::Verdict,
            json!({ "attempt": attempt, "verdict": verdict }),
            &pre_digest,
        );

        if verdict == Verdict::Better {
            state.best = candidate;
            let mut payload = json!({ "attempt": attempt });
            if let Some(probe) = &agents.score_probe {
                let s = probe.score(&state.prompt, &state.best)?;
                state.accepted_scores.push(s);
                payload["score"] = json!(s);
            }
            tracer.emit(round, Some(c.id), EventKind::Accept, payload, &state.best.digest);
            return Ok(FixOutcome::Accepted);
        }
        tracer.emit(
            round,
            Some(c.id),
            EventKind::Reject,
            json!({ "attempt": attempt, "verdict": verdict }),
            &pre_digest,
        );
    }

    state.statuses.insert(c.id, ItemStatus::Skipped);
    tracer.emit(
        round,
        Some(c.id),
        EventKind::Skip,
        json!({ "attempts": config.retry_budget_k }),
        &state.best.digest,
    );
    Ok(FixOutcome::Exhausted)
}

fn abort(error: EngineError, state: Option<RefineState>, tracer: Tracer) -> Box<RefineAbort> {
    Box::new(RefineAbort { error, state, trace: tracer.into_events() })
}
