//! Batch simulator experiments: generate prompts, build satisfying scenes,
//! corrupt them, refine each run, and aggregate statistics.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use refinery::backends::ScoreVerifier;
use refinery::core::{ConstraintKind, RefineConfig};
use refinery::engine::{refine, Agents, RefineState, TraceEvent};
use refinery::planner::{plan_rule, RulePlanner};
use refinery::simworld::{
    alignment_score, build_satisfying_scene, corrupt, eval_constraint, SceneStore, SimChecker,
    SimEditor, SimError, SimScorer,
};

use crate::corpus::generate_prompt;

/// Knobs for one batch experiment. `violations` is the per-run cap; each
/// run draws its violation count uniformly from 1 up to the cap (bounded by
/// the checklist's evaluable size).
#[derive(Debug, Clone)]
pub struct SimulateParams {
    pub corpus_size: usize,
    pub violations: u32,
    pub p_fail: f64,
    pub k: u32,
    pub max_rounds: u32,
    pub seed: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        let d = RefineConfig::default();
        Self {
            corpus_size: 200,
            violations: 3,
            p_fail: 0.0,
            k: d.retry_budget_k,
            max_rounds: d.max_rounds,
            seed: 0,
        }
    }
}

impl SimulateParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.corpus_size == 0 {
            return Err("corpus size must be at least 1".to_string());
        }
        if !(1..=3).contains(&self.violations) {
            return Err(format!("violations must be within 1..=3, got {}", self.violations));
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(format!("p-fail must be within [0, 1], got {}", self.p_fail));
        }
        if self.k == 0 || self.max_rounds == 0 {
            return Err("k and max-rounds must be at least 1".to_string());
        }
        Ok(())
    }

    fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            max_rounds: self.max_rounds,
            retry_budget_k: self.k,
            verifier_epsilon: 0.0,
        }
    }
}

/// One completed run with everything the acceptance checks inspect.
#[derive(Debug)]
pub struct SimRun {
    pub prompt: String,
    pub run_id: String,
    /// Constraints violated in the corrupted scene, by re-evaluation.
    pub violated: Vec<(u32, ConstraintKind)>,
    /// Ids from `violated` that the final scene satisfies.
    pub fixed: Vec<u32>,
    pub initial_score: f64,
    pub final_score: f64,
    pub state: RefineState,
    pub trace: Vec<TraceEvent>,
}

/// Per-kind violated/fixed tallies.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct KindFixRate {
    pub violated: u64,
    pub fixed: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StatusTally {
    pub passed: u64,
    pub skipped: u64,
    pub pending: u64,
}

/// Aggregate statistics; serialization is deterministic for a fixed seed
/// (field order fixed, no wall-clock values).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SimStats {
    pub corpus_size: usize,
    pub max_violations: u32,
    pub p_fail: f64,
    pub k: u32,
    pub max_rounds: u32,
    pub seed: u64,
    pub aborted_runs: usize,
    pub mean_initial_alignment: f64,
    pub mean_final_alignment: f64,
    pub perfect_final_runs: usize,
    pub mean_editor_calls: f64,
    pub termination_bound_violations: usize,
    pub statuses: StatusTally,
    pub fix_rates: BTreeMap<String, KindFixRate>,
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub stats: SimStats,
    pub runs: Vec<SimRun>,
}

/// The standard simulator agent set over a fresh store.
pub fn sim_agents(store: Arc<SceneStore>, p_fail: f64, editor_seed: u64) -> Agents {
    let scorer = Arc::new(SimScorer::new(store.clone()));
    Agents {
        planner: Arc::new(RulePlanner),
        checker: Arc::new(SimChecker::new(store.clone())),
        editor: Arc::new(SimEditor::new(store, p_fail, editor_seed)),
        verifier: Arc::new(ScoreVerifier::new(scorer.clone(), 0.0)),
        score_probe: Some(scorer),
    }
}

/// Run a batch with the standard simulator agents.
pub fn simulate(params: &SimulateParams) -> Result<SimulateOutcome, String> {
    let p_fail = params.p_fail;
    simulate_with(params, |store, run_seed| sim_agents(store, p_fail, run_seed))
}

/// Run a batch with a caller-supplied agent factory — the hook for
/// injecting rigged editors or verifiers in tests. The factory receives
/// each run's scene store and per-run seed.
pub fn simulate_with<F>(params: &SimulateParams, factory: F) -> Result<SimulateOutcome, String>
where
    F: Fn(Arc<SceneStore>, u64) -> Agents + Sync,
{
    params.validate()?;

    let results: Vec<Option<SimRun>> = (0..params.corpus_size)
        .into_par_iter()
        .map(|index| run_one(index, params, &factory))
        .collect::<Result<_, String>>()?;

    let aborted_runs = results.iter().filter(|r| r.is_none()).count();
    let runs: Vec<SimRun> = results.into_iter().flatten().collect();

    Ok(SimulateOutcome { stats: aggregate(params, aborted_runs, &runs), runs })
}

fn run_one<F>(index: usize, params: &SimulateParams, factory: &F) -> Result<Option<SimRun>, String>
where
    F: Fn(Arc<SceneStore>, u64) -> Agents + Sync,
{
    let run_seed = mix(params.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);

    let prompt = generate_prompt(&mut rng);
    let checklist = plan_rule(&prompt).map_err(|e| format!("{prompt:?}: {e}"))?;
    let scene =
        build_satisfying_scene(&checklist, &mut rng).map_err(|e| format!("{prompt:?}: {e}"))?;

    let evaluable = checklist
        .items
        .iter()
        .filter(|c| c.kind != ConstraintKind::FreeForm)
        .count() as u32;
    let cap = params.violations.min(evaluable).max(1);
    let mut n = rng.gen_range(1..=cap) as usize;
    let corrupt_seed: u64 = rng.gen();
    let corrupted = loop {
        match corrupt(&scene, &checklist, n, corrupt_seed) {
            Ok(s) => break s,
            Err(SimError::CorruptionInfeasible(_)) if n > 1 => n -= 1,
            Err(e) => return Err(format!("{prompt:?}: {e}")),
        }
    };

    let mut violated = Vec::new();
    for c in &checklist.items {
        if c.kind == ConstraintKind::FreeForm {
            continue;
        }
        let ok = eval_constraint(&corrupted, c).map_err(|e| e.to_string())?;
        if !ok {
            violated.push((c.id, c.kind));
        }
    }
    let initial_score =
        alignment_score(&corrupted, &checklist).map_err(|e| e.to_string())?;

    let store = Arc::new(SceneStore::new());
    let initial = store.insert(corrupted);
    let agents = factory(store.clone(), run_seed);

    let outcome = match refine(&prompt, &initial, &agents, &params.refine_config()) {
        Ok(o) => o,
        // An aborted run is tallied, not fatal to the batch.
        Err(_) => return Ok(None),
    };

    let final_scene = store.get(&outcome.final_image).map_err(|e| e.to_string())?;
    let final_score = alignment_score(&final_scene, &checklist).map_err(|e| e.to_string())?;
    let fixed = violated
        .iter()
        .filter(|(id, _)| {
            let c = &checklist.items[(*id - 1) as usize];
            eval_constraint(&final_scene, c).unwrap_or(false)
        })
        .map(|(id, _)| *id)
        .collect();

    let run_id = outcome.trace.first().map(|e| e.run_id.clone()).unwrap_or_default();
    Ok(Some(SimRun {
        prompt,
        run_id,
        violated,
        fixed,
        initial_score,
        final_score,
        state: outcome.state,
        trace: outcome.trace,
    }))
}

fn aggregate(params: &SimulateParams, aborted_runs: usize, runs: &[SimRun]) -> SimStats {
    let count = runs.len().max(1) as f64;
    let mean = |f: &dyn Fn(&SimRun) -> f64| runs.iter().map(f).sum::<f64>() / count;

    let mut statuses = StatusTally { passed: 0, skipped: 0, pending: 0 };
    let mut bound_violations = 0usize;
    let mut by_kind: BTreeMap<String, KindFixRate> = BTreeMap::new();
    for run in runs {
        for status in run.state.statuses.values() {
            match status.name() {
                "passed" => statuses.passed += 1,
                "skipped" => statuses.skipped += 1,
                _ => statuses.pending += 1,
            }
        }
        let bound = u64::from(params.max_rounds)
            * run.state.checklist.items.len() as u64
            * u64::from(params.k);
        if run.state.editor_calls > bound {
            bound_violations += 1;
        }
        for (id, kind) in &run.violated {
            let entry = by_kind
                .entry(kind.name().to_string())
                .or_insert(KindFixRate { violated: 0, fixed: 0, rate: 0.0 });
            entry.violated += 1;
            if run.fixed.contains(id) {
                entry.fixed += 1;
            }
        }
    }
    for entry in by_kind.values_mut() {
        entry.rate = entry.fixed as f64 / entry.violated.max(1) as f64;
    }

    SimStats {
        corpus_size: params.corpus_size,
        max_violations: params.violations,
        p_fail: params.p_fail,
        k: params.k,
        max_rounds: params.max_rounds,
        seed: params.seed,
        aborted_runs,
        mean_initial_alignment: mean(&|r| r.initial_score),
        mean_final_alignment: mean(&|r| r.final_score),
        perfect_final_runs: runs.iter().filter(|r| r.final_score == 1.0).count(),
        mean_editor_calls: mean(&|r| r.state.editor_calls as f64),
        termination_bound_violations: bound_violations,
        statuses,
        fix_rates: by_kind,
    }
}

/// SplitMix-style index mixing so per-run seeds are decorrelated while the
/// whole batch stays a pure function of the master seed.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p_fail: f64, violations: u32, n: usize, seed: u64) -> SimulateParams {
        SimulateParams {
            corpus_size: n,
            violations,
            p_fail,
            seed,
            ..SimulateParams::default()
        }
    }

    #[test]
    fn perfect_agents_fix_everything() {
        let out = simulate(&small(0.0, 3, 40, 1)).unwrap();
        assert_eq!(out.stats.aborted_runs, 0);
        assert_eq!(out.stats.perfect_final_runs, 40);
        assert_eq!(out.stats.mean_final_alignment, 1.0);
        assert_eq!(out.stats.termination_bound_violations, 0);
        assert_eq!(out.stats.statuses.skipped, 0);
        assert_eq!(out.stats.statuses.pending, 0);
        assert!(out.stats.fix_rates.values().all(|k| k.rate == 1.0));
        assert!(out.stats.mean_initial_alignment < 1.0);
    }

    #[test]
    fn statistics_are_byte_identical_for_a_fixed_seed() {
        let a = simulate(&small(0.25, 2, 30, 9)).unwrap();
        let b = simulate(&small(0.25, 2, 30, 9)).unwrap();
        assert_eq!(
            serde_json::to_string(&a.stats).unwrap(),
            serde_json::to_string(&b.stats).unwrap()
        );
        let ids_a: Vec<&str> = a.runs.iter().map(|r| r.run_id.as_str()).collect();
        let ids_b: Vec<&str> = b.runs.iter().map(|r| r.run_id.as_str()).collect();
        assert_eq!(ids_a, ids_b);
    }

    #[test]
    fn hopeless_editor_fixes_nothing() {
        let out = simulate(&small(1.0, 1, 25, 4)).unwrap();
        assert_eq!(out.stats.perfect_final_runs, 0);
        assert!(out.stats.fix_rates.values().all(|k| k.rate == 0.0));
        assert!(out.stats.statuses.skipped > 0);
        assert_eq!(out.stats.termination_bound_violations, 0);
    }

    #[test]
    fn violation_counts_respect_the_cap() {
        let out = simulate(&small(0.0, 1, 30, 7)).unwrap();
        assert!(out.runs.iter().all(|r| r.violated.len() == 1));

        let out = simulate(&small(0.0, 3, 30, 7)).unwrap();
        assert!(out.runs.iter().all(|r| (1..=3).contains(&r.violated.len())));
        assert!(out.runs.iter().any(|r| r.violated.len() > 1));
    }

    #[test]
    fn parameter_validation_catches_nonsense() {
        assert!(small(0.0, 0, 10, 1).validate().is_err());
        assert!(small(0.0, 4, 10, 1).validate().is_err());
        assert!(small(-0.1, 1, 10, 1).validate().is_err());
        assert!(small(0.0, 1, 0, 1).validate().is_err());
    }
}
