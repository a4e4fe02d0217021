//! Subcommand implementations. Each returns the stdout body; `main` prints
//! it and maps errors onto exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use refinery::backends::{ChatClient, RemotePlannerBackend};
use refinery::config::{ConfigFile, Mode};
use refinery::core::{digest_hex, Checklist, ImageRef};
use refinery::engine::{refine, RefineState, TraceEvent};
use refinery::planner::{plan_rule, ChecklistPlanner, RemotePlanner};
use refinery::simworld::{alignment_score, Scene, SceneStore};

use crate::report::{parse_trace, render_narrative, validate_trace};
use crate::sim::{simulate, SimulateParams};
use crate::CliError;

/// Planner backing for `plan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlannerChoice {
    /// Deterministic grammar over the built-in lexicon.
    Rule,
    /// The configured remote planner endpoint.
    Remote,
}

// ============================================================
// plan
// ============================================================

pub fn cmd_plan(
    prompt: &str,
    planner: PlannerChoice,
    config: Option<&Path>,
    json: bool,
) -> Result<String, CliError> {
    let checklist = match planner {
        PlannerChoice::Rule => plan_rule(prompt)?,
        PlannerChoice::Remote => {
            let (_, cfg) = ConfigFile::discover(config).map_err(|e| CliError::Config(e.to_string()))?;
            let endpoint = cfg.endpoints.planner.clone().ok_or_else(|| {
                CliError::Config("remote planner requested but the config has no `planner` endpoint".to_string())
            })?;
            let client =
                ChatClient::new(endpoint).map_err(|e| CliError::Config(e.to_string()))?;
            let remote = RemotePlanner::new(Arc::new(RemotePlannerBackend::new(client)));
            remote.plan(prompt)?
        }
    };
    if json {
        return Ok(serde_json::to_string_pretty(&checklist).expect("checklist serializes"));
    }
    Ok(render_checklist(&checklist))
}

fn render_checklist(checklist: &Checklist) -> String {
    let mut out = format!("prompt: {}\n", checklist.prompt);
    let width = checklist
        .items
        .iter()
        .map(|c| c.kind.name().len())
        .max()
        .unwrap_or(4);
    for c in &checklist.items {
        let _ = writeln!(out, "{:>3}  {:width$}  {}", c.id, c.kind.name(), c.question);
    }
    out
}

// ============================================================
// refine
// ============================================================

#[derive(Debug, Clone)]
pub struct RefineArgs {
    pub prompt: String,
    pub image: PathBuf,
    pub config: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatusSummary {
    pub passed: usize,
    pub skipped: usize,
}

/// The per-run result printed by `refine`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub run_id: String,
    pub prompt: String,
    pub rounds_used: u32,
    pub editor_calls: u64,
    pub statuses: StatusSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_score: Option<f64>,
    pub wall_time_ms: u64,
    pub output_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

pub fn cmd_refine(args: &RefineArgs) -> Result<String, CliError> {
    let started = Instant::now();
    let (_, cfg) =
        ConfigFile::discover(args.config.as_deref()).map_err(|e| CliError::Config(e.to_string()))?;
    let (agents, store) = cfg.build_agents().map_err(|e| CliError::Config(e.to_string()))?;

    let initial_scene;
    let initial = match cfg.mode {
        Mode::Sim => {
            let raw = std::fs::read_to_string(&args.image)?;
            let scene = Scene::parse(&raw).map_err(|e| {
                CliError::Usage(format!("cannot parse scene `{}`: {e}", args.image.display()))
            })?;
            initial_scene = Some(scene.clone());
            store.as_ref().expect("sim mode always has a store").insert(scene)
        }
        Mode::Remote => {
            let bytes = std::fs::read(&args.image)?;
            initial_scene = None;
            ImageRef::file(args.image.display().to_string(), digest_hex(&bytes))
        }
    };

    let outcome = match refine(&args.prompt, &initial, &agents, &cfg.refine_config()) {
        Ok(o) => o,
        Err(abort) => {
            // Keep the evidence: trace plus the best image reached so far.
            let trace_path = emit_trace(&abort.trace, &args.image, args.trace_out.as_deref())?;
            if let Some(state) = &abort.state {
                let _ = save_output(&cfg, store.as_deref(), &state.best, &args.image);
            }
            let mut message = abort.error.to_string();
            if let Some(p) = trace_path {
                let _ = write!(message, " (trace saved to {})", p.display());
            }
            return Err(CliError::Aborted(message));
        }
    };

    let output_path = save_output(&cfg, store.as_deref(), &outcome.final_image, &args.image)?;
    let trace_path = emit_trace(&outcome.trace, &args.image, args.trace_out.as_deref())?;

    let report = build_report(
        &outcome.state,
        &outcome.trace,
        initial_scene.as_ref(),
        store.as_deref(),
        &outcome.final_image,
        started.elapsed().as_millis() as u64,
        &output_path,
        trace_path.as_deref(),
    )?;

    if args.json {
        return Ok(serde_json::to_string_pretty(&report).expect("report serializes"));
    }
    Ok(render_report(&report))
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    state: &RefineState,
    trace: &[TraceEvent],
    initial_scene: Option<&Scene>,
    store: Option<&SceneStore>,
    final_image: &ImageRef,
    wall_time_ms: u64,
    output_path: &Path,
    trace_path: Option<&Path>,
) -> Result<RunReport, CliError> {
    let mut initial_score = None;
    let mut final_score = None;
    if let (Some(scene), Some(store)) = (initial_scene, store) {
        initial_score = Some(
            alignment_score(scene, &state.checklist).map_err(|e| CliError::Internal(e.to_string()))?,
        );
        let final_scene =
            store.get(final_image).map_err(|e| CliError::Internal(e.to_string()))?;
        final_score = Some(
            alignment_score(&final_scene, &state.checklist)
                .map_err(|e| CliError::Internal(e.to_string()))?,
        );
    }

    let passed = state.statuses.values().filter(|s| s.name() == "passed").count();
    let skipped = state.statuses.values().filter(|s| s.name() == "skipped").count();

    Ok(RunReport {
        run_id: trace.first().map(|e| e.run_id.clone()).unwrap_or_default(),
        prompt: state.prompt.clone(),
        rounds_used: state.round,
        editor_calls: state.editor_calls,
        statuses: StatusSummary { passed, skipped },
        initial_score,
        final_score,
        wall_time_ms,
        output_path: output_path.display().to_string(),
        trace_path: trace_path.map(|p| p.display().to_string()),
    })
}

fn render_report(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run {}", r.run_id);
    let _ = writeln!(out, "prompt:       {}", r.prompt);
    let _ = writeln!(
        out,
        "result:       {} passed, {} skipped in {} round(s), {} editor call(s)",
        r.statuses.passed, r.statuses.skipped, r.rounds_used, r.editor_calls
    );
    if let (Some(a), Some(b)) = (r.initial_score, r.final_score) {
        let _ = writeln!(out, "alignment:    {a:.3} -> {b:.3}");
    }
    let _ = writeln!(out, "output:       {}", r.output_path);
    if let Some(t) = &r.trace_path {
        let _ = writeln!(out, "trace:        {t}");
    }
    let _ = writeln!(out, "wall time:    {} ms", r.wall_time_ms);
    out
}

/// `scene.json` → `scene.refined.json`; extensionless inputs get a plain
/// `.refined` suffix.
fn refined_path(image: &Path) -> PathBuf {
    let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    let name = match image.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.refined.{ext}"),
        None => format!("{stem}.refined"),
    };
    image.with_file_name(name)
}

fn parent_dir(image: &Path) -> &Path {
    match image.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn save_output(
    cfg: &ConfigFile,
    store: Option<&SceneStore>,
    image: &ImageRef,
    input: &Path,
) -> Result<PathBuf, CliError> {
    let out = refined_path(input);
    match cfg.mode {
        Mode::Sim => {
            let store = store.expect("sim mode always has a store");
            let scene = store.get(image).map_err(|e| CliError::Internal(e.to_string()))?;
            std::fs::write(&out, scene.canonical_json())?;
        }
        Mode::Remote => {
            std::fs::copy(&image.locator, &out)?;
        }
    }
    Ok(out)
}

/// Write the trace to `--trace-out` if given, else beside the image as
/// `{run_id}.trace.jsonl`. An empty trace writes nothing.
fn emit_trace(
    trace: &[TraceEvent],
    image: &Path,
    trace_out: Option<&Path>,
) -> Result<Option<PathBuf>, CliError> {
    let Some(first) = trace.first() else { return Ok(None) };
    let path = match trace_out {
        Some(p) => p.to_path_buf(),
        None => parent_dir(image).join(format!("{}.trace.jsonl", first.run_id)),
    };
    let mut body = String::new();
    for event in trace {
        body.push_str(&serde_json::to_string(event).map_err(|e| CliError::Internal(e.to_string()))?);
        body.push('\n');
    }
    std::fs::write(&path, body)?;
    Ok(Some(path))
}

// ============================================================
// simulate
// ============================================================

pub fn cmd_simulate(params: &SimulateParams, json: bool) -> Result<String, CliError> {
    params.validate().map_err(CliError::Usage)?;
    let outcome = simulate(params).map_err(CliError::Internal)?;
    let stats = outcome.stats;
    if json {
        return Ok(serde_json::to_string_pretty(&stats).expect("stats serialize"));
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} run(s), seed {}, <= {} violation(s), p_fail {}, K {}, max {} round(s)",
        stats.corpus_size, stats.seed, stats.max_violations, stats.p_fail, stats.k, stats.max_rounds
    );
    let _ = writeln!(
        out,
        "alignment:    mean {:.4} -> {:.4} ({} / {} perfect)",
        stats.mean_initial_alignment,
        stats.mean_final_alignment,
        stats.perfect_final_runs,
        stats.corpus_size - stats.aborted_runs
    );
    let _ = writeln!(
        out,
        "loop:         mean {:.2} editor call(s); {} aborted; {} bound violation(s)",
        stats.mean_editor_calls, stats.aborted_runs, stats.termination_bound_violations
    );
    let _ = writeln!(
        out,
        "statuses:     {} passed, {} skipped, {} pending",
        stats.statuses.passed, stats.statuses.skipped, stats.statuses.pending
    );
    let _ = writeln!(out, "fix rates:");
    for (kind, fr) in &stats.fix_rates {
        let _ = writeln!(out, "  {:18} {:>4}/{:<4}  {:.3}", kind, fr.fixed, fr.violated, fr.rate);
    }
    Ok(out)
}

// ============================================================
// report
// ============================================================

pub fn cmd_report(path: &Path, json: bool) -> Result<String, CliError> {
    let body = std::fs::read_to_string(path)?;
    let events = parse_trace(&body).map_err(CliError::CorruptTrace)?;
    let summary = validate_trace(&events).map_err(CliError::CorruptTrace)?;

    if json {
        return Ok(serde_json::to_string_pretty(&summary).expect("summary serializes"));
    }
    let mut out = render_narrative(&events);
    let _ = writeln!(
        out,
        "-- run {}: {} event(s), {} round(s), {} accepted, {} rejected, {} skipped{}",
        summary.run_id,
        summary.events,
        summary.rounds,
        summary.accepts,
        summary.rejects,
        summary.skips,
        if summary.finished { "" } else { " (no finish event)" }
    );
    Ok(out)
}
