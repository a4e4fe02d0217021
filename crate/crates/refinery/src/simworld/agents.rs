//! Adapters exposing the simulator as checker/editor/scorer agents over a
//! shared content-addressed [`SceneStore`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{
    alignment_score, apply_edit, eval_constraint, sim_refine_instruction, SceneStore, SimError,
};
use crate::backends::{AlignmentScorer, BackendError, CheckOutcome, Checker, Editor};
use crate::core::{Constraint, EditInstruction, ImageRef};
use crate::planner::plan_rule;

fn image_error(err: SimError) -> BackendError {
    match err {
        SimError::SceneNotFound(d) => BackendError::ImageUnavailable(d),
        other => BackendError::ImageUnavailable(other.to_string()),
    }
}

// ============================================================
// Checker
// ============================================================

/// Oracle checker: a constraint passes exactly when the scene satisfies it,
/// and a failing check carries the simulator's own fix as its instruction.
pub struct SimChecker {
    store: Arc<SceneStore>,
}

impl SimChecker {
    pub fn new(store: Arc<SceneStore>) -> Self {
        Self { store }
    }
}

impl Checker for SimChecker {
    fn check(&self, image: &ImageRef, c: &Constraint) -> Result<CheckOutcome, BackendError> {
        let scene = self.store.get(image).map_err(image_error)?;
        let passed = eval_constraint(&scene, c)
            .map_err(|e| BackendError::Unparseable(e.to_string()))?;
        if passed {
            return Ok(CheckOutcome::pass());
        }
        let instruction = sim_refine_instruction(c, &scene)
            .map_err(|e| BackendError::Unparseable(e.to_string()))?;
        Ok(CheckOutcome::fail(instruction))
    }
}

// ============================================================
// Editor
// ============================================================

/// Structured editor over the store. Each call draws a fresh seed from
/// `base_seed` and a call counter, so a retried edit can land differently
/// while the whole run stays reproducible.
pub struct SimEditor {
    store: Arc<SceneStore>,
    p_fail: f64,
    base_seed: u64,
    calls: AtomicU64,
}

impl SimEditor {
    pub fn new(store: Arc<SceneStore>, p_fail: f64, base_seed: u64) -> Self {
        Self { store, p_fail, base_seed, calls: AtomicU64::new(0) }
    }

    fn next_seed(&self) -> u64 {
        let seq = self.calls.fetch_add(1, Ordering::Relaxed);
        // Weyl-style mixing keeps per-call streams well separated.
        self.base_seed ^ (seq.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

impl Editor for SimEditor {
    fn edit(&self, image: &ImageRef, instr: &EditInstruction) -> Result<ImageRef, BackendError> {
        if instr.ops.is_empty() {
            return Err(BackendError::EditRejected(
                "instruction carries no structured ops".to_string(),
            ));
        }
        let scene = self.store.get(image).map_err(image_error)?;
        let edited = apply_edit(&scene, &instr.ops, self.next_seed(), self.p_fail).map_err(
            |e| match e {
                SimError::SelectorNotFound { .. }
                | SimError::Precondition(_)
                | SimError::GridFull => BackendError::EditRejected(e.to_string()),
                other => BackendError::ImageUnavailable(other.to_string()),
            },
        )?;
        Ok(self.store.insert(edited))
    }
}

// ============================================================
// Scorer
// ============================================================

/// Exact alignment scorer: re-derives the checklist from the prompt with
/// the rule planner and reports the satisfied fraction.
pub struct SimScorer {
    store: Arc<SceneStore>,
}

impl SimScorer {
    pub fn new(store: Arc<SceneStore>) -> Self {
        Self { store }
    }
}

impl AlignmentScorer for SimScorer {
    fn score(&self, prompt: &str, image: &ImageRef) -> Result<f64, BackendError> {
        let scene = self.store.get(image).map_err(image_error)?;
        let checklist =
            plan_rule(prompt).map_err(|e| BackendError::ScorerFailure(e.to_string()))?;
        alignment_score(&scene, &checklist).map_err(|e| BackendError::ScorerFailure(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{EditOp, Position};
    use crate::simworld::Scene;

    fn store_with_pandas(n: usize) -> (Arc<SceneStore>, ImageRef) {
        let store = Arc::new(SceneStore::new());
        let mut s = Scene::new();
        for i in 0..n {
            s.add_object("panda", None, Position::new(4 + i as i32, 4), None);
        }
        let image = store.insert(s);
        (store, image)
    }

    #[test]
    fn checker_passes_and_fails_with_the_oracle() {
        let (store, image) = store_with_pandas(4);
        let checker = SimChecker::new(store);

        let ok = checker.check(&image, &Constraint::presence(1, "panda")).unwrap();
        assert!(ok.result.passed);
        assert!(ok.instruction.is_none());

        let bad = checker.check(&image, &Constraint::count(2, "panda", 5)).unwrap();
        assert!(!bad.result.passed);
        assert_eq!(bad.result.reason, "Add 1 panda so there are exactly 5");
        assert_eq!(bad.instruction.unwrap().ops.len(), 1);
    }

    #[test]
    fn editor_round_trips_through_the_store() {
        let (store, image) = store_with_pandas(4);
        let editor = SimEditor::new(store.clone(), 0.0, 11);
        let instr = EditInstruction::new(
            "Add 1 panda so there are exactly 5",
            vec![EditOp::Add { category: "panda".to_string(), color: None, position: None }],
        );
        let out = editor.edit(&image, &instr).unwrap();
        assert_ne!(out.digest, image.digest);
        assert_eq!(store.get(&out).unwrap().count_of("panda"), 5);
    }

    #[test]
    fn editor_rejects_empty_ops_and_bad_selectors() {
        let (store, image) = store_with_pandas(1);
        let editor = SimEditor::new(store, 0.0, 11);

        let empty = EditInstruction::new("do something", vec![]);
        assert!(matches!(
            editor.edit(&image, &empty),
            Err(BackendError::EditRejected(_))
        ));

        let ghost = EditInstruction::new(
            "Remove the unicorn",
            vec![EditOp::Remove { selector: "unicorn".to_string() }],
        );
        assert!(matches!(
            editor.edit(&image, &ghost),
            Err(BackendError::EditRejected(_))
        ));
    }

    #[test]
    fn editor_seeds_differ_per_call_but_runs_reproduce() {
        let (store, image) = store_with_pandas(3);
        let instr = EditInstruction::new(
            "Add a panda",
            vec![EditOp::Add { category: "panda".to_string(), color: None, position: None }],
        );

        let run = |seed: u64| {
            let editor = SimEditor::new(store.clone(), 0.5, seed);
            (0..6).map(|_| editor.edit(&image, &instr).unwrap().digest).collect::<Vec<_>>()
        };
        assert_eq!(run(21), run(21));
    }

    #[test]
    fn scorer_matches_direct_alignment() {
        let (store, image) = store_with_pandas(4);
        let scorer = SimScorer::new(store);
        let score = scorer.score("A photo of five pandas", &image).unwrap();
        // presence holds, count of five does not: 1 of 2.
        assert_eq!(score, 0.5);
    }

    #[test]
    fn missing_scene_is_image_unavailable() {
        let store = Arc::new(SceneStore::new());
        let checker = SimChecker::new(store);
        let ghost = ImageRef::scene("0".repeat(64), "0".repeat(64));
        assert!(matches!(
            checker.check(&ghost, &Constraint::presence(1, "panda")),
            Err(BackendError::ImageUnavailable(_))
        ));
    }
}
