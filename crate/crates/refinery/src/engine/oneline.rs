//! Single-call convenience wrapper: discover config, refine an image file,
//! write the result beside the input.

use std::path::{Path, PathBuf};

use super::{refine, EngineError, TraceEvent};
use crate::config::{ConfigError, ConfigFile, Mode};
use crate::core::{digest_hex, ImageRef};
use crate::simworld::Scene;

/// Refine the image at `image_path` against `prompt` using the discovered
/// config (`REFINERY_CONFIG`, else `./refinery.json`).
///
/// Writes the final result beside the input with a `.refined` suffix
/// before the extension (`scene.json` → `scene.refined.json`) plus a
/// `{run_id}.trace.jsonl` event log, and returns the output path. An
/// aborted run writes the trace but no output file.
pub fn refine_oneline(prompt: &str, image_path: &Path) -> Result<PathBuf, EngineError> {
    refine_oneline_at(prompt, image_path, None)
}

/// [`refine_oneline`] with an explicit config path instead of discovery.
pub fn refine_oneline_at(
    prompt: &str,
    image_path: &Path,
    config_path: Option<&Path>,
) -> Result<PathBuf, EngineError> {
    let (_, cfg) = ConfigFile::discover(config_path).map_err(config_error)?;
    let (agents, store) = cfg.build_agents().map_err(config_error)?;

    let initial = match cfg.mode {
        Mode::Sim => {
            let raw = std::fs::read_to_string(image_path)?;
            let scene = Scene::parse(&raw).map_err(|e| EngineError::BadImage {
                path: image_path.display().to_string(),
                detail: e.to_string(),
            })?;
            store.as_ref().expect("sim mode always has a store").insert(scene)
        }
        Mode::Remote => {
            let bytes = std::fs::read(image_path)?;
            ImageRef::file(image_path.display().to_string(), digest_hex(&bytes))
        }
    };

    let trace_dir = parent_dir(image_path);
    let outcome = match refine(prompt, &initial, &agents, &cfg.refine_config()) {
        Ok(o) => o,
        Err(abort) => {
            // Keep the evidence even though the run failed.
            if !abort.trace.is_empty() {
                let _ = write_trace(&abort.trace, trace_dir);
            }
            return Err(abort.error);
        }
    };

    let out_path = refined_path(image_path);
    match cfg.mode {
        Mode::Sim => {
            let store = store.expect("sim mode always has a store");
            let scene = store.get(&outcome.final_image).map_err(|e| EngineError::BadImage {
                path: outcome.final_image.locator.clone(),
                detail: e.to_string(),
            })?;
            std::fs::write(&out_path, scene.canonical_json())?;
        }
        Mode::Remote => {
            std::fs::copy(&outcome.final_image.locator, &out_path)?;
        }
    }
    write_trace(&outcome.trace, trace_dir)?;
    Ok(out_path)
}

/// Write a run trace as JSON Lines to `dir/{run_id}.trace.jsonl` and return
/// the path. The trace must be non-empty (the run id comes from it).
pub fn write_trace(trace: &[TraceEvent], dir: &Path) -> std::io::Result<PathBuf> {
    let Some(first) = trace.first() else {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty trace"));
    };
    let path = dir.join(format!("{}.trace.jsonl", first.run_id));
    let mut body = String::new();
    for event in trace {
        body.push_str(
            &serde_json::to_string(event)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
        );
        body.push('\n');
    }
    std::fs::write(&path, body)?;
    Ok(path)
}

fn config_error(err: ConfigError) -> EngineError {
    match err {
        ConfigError::NotFound(path) => EngineError::ConfigNotFound(path),
        other => EngineError::BadConfig(other.to_string()),
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn refined_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let name = match input.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.refined.{ext}"),
        None => format!("{stem}.refined"),
    };
    input.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Position;

    fn write_sim_config(dir: &Path) -> PathBuf {
        let path = dir.join("refinery.json");
        std::fs::write(&path, r#"{"mode":"sim"}"#).unwrap();
        path
    }

    fn write_panda_scene(dir: &Path, n: usize) -> PathBuf {
        let mut scene = Scene::new();
        for i in 0..n {
            scene.add_object("panda", None, Position::new(3 + i as i32, 3), None);
        }
        let path = dir.join("scene.json");
        std::fs::write(&path, scene.canonical_json()).unwrap();
        path
    }

    #[test]
    fn sim_scene_is_refined_beside_the_input() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_sim_config(dir.path());
        let scene_path = write_panda_scene(dir.path(), 4);

        let out = refine_oneline_at("A photo of five pandas", &scene_path, Some(&cfg)).unwrap();

        assert_eq!(out, dir.path().join("scene.refined.json"));
        let refined = Scene::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(refined.count_of("panda"), 5);

        let traces: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".trace.jsonl"))
            .collect();
        assert_eq!(traces.len(), 1);
    }

    #[test]
    fn missing_config_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let scene_path = write_panda_scene(dir.path(), 1);
        let missing = dir.path().join("absent.json");
        let err = refine_oneline_at("a panda", &scene_path, Some(&missing)).unwrap_err();
        assert!(matches!(err, EngineError::ConfigNotFound(_)));
    }

    #[test]
    fn unreachable_remote_backend_leaves_no_output() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("remote.json");
        // Port reserved and normally closed; connection should be refused.
        std::fs::write(
            &cfg_path,
            r#"{
                "mode": "remote",
                "endpoints": {
                    "checker":  {"base_url": "http://127.0.0.1:9", "model_name": "m", "max_retries_transport": 0},
                    "editor":   {"base_url": "http://127.0.0.1:9", "model_name": "m", "max_retries_transport": 0},
                    "verifier": {"base_url": "http://127.0.0.1:9", "model_name": "m", "max_retries_transport": 0}
                }
            }"#,
        )
        .unwrap();
        let image = dir.path().join("input.png");
        std::fs::write(&image, b"not really a png").unwrap();

        let err = refine_oneline_at("a panda", &image, Some(&cfg_path)).unwrap_err();
        assert!(matches!(err, EngineError::Backend(_)));
        assert!(!dir.path().join("input.refined.png").exists());
    }

    #[test]
    fn garbage_scene_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_sim_config(dir.path());
        let bad = dir.path().join("scene.json");
        std::fs::write(&bad, "definitely not a scene").unwrap();
        let err = refine_oneline_at("a panda", &bad, Some(&cfg)).unwrap_err();
        assert!(matches!(err, EngineError::BadImage { .. }));
    }

    #[test]
    fn trace_files_are_named_by_run_id_and_parse_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_sim_config(dir.path());
        let scene_path = write_panda_scene(dir.path(), 4);
        refine_oneline_at("A photo of five pandas", &scene_path, Some(&cfg)).unwrap();

        let trace_path = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| p.to_string_lossy().ends_with(".trace.jsonl"))
            .unwrap();
        let body = std::fs::read_to_string(&trace_path).unwrap();
        let events: Vec<TraceEvent> =
            body.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(!events.is_empty());
        let stem = trace_path.file_name().unwrap().to_string_lossy().to_string();
        assert_eq!(stem, format!("{}.trace.jsonl", events[0].run_id));
        for (i, e) in events.iter().enumerate() {
            assert_eq!(e.seq, i as u64);
        }
    }

    #[test]
    fn empty_trace_cannot_be_written() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_trace(&[], dir.path()).is_err());
    }
}
