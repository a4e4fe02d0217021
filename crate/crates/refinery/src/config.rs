//! Run configuration: one JSON file selecting simulator or remote agents,
//! endpoint coordinates, and loop parameters.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::wire::{AgentEndpointConfig, ChatClient};
use crate::backends::{
    RemoteChecker, RemoteEditor, RemotePlannerBackend, RemoteVerifier, ScoreVerifier,
};
use crate::core::RefineConfig;
use crate::engine::Agents;
use crate::planner::{RemotePlanner, RulePlanner};
use crate::simworld::{SceneStore, SimChecker, SimEditor, SimScorer};

/// Environment variable overriding the config file location.
pub const CONFIG_ENV: &str = "REFINERY_CONFIG";

/// Default config path, resolved relative to the working directory.
pub const DEFAULT_CONFIG_PATH: &str = "refinery.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found at `{0}`")]
    NotFound(String),
    #[error("cannot read config `{path}`: {detail}")]
    Unreadable { path: String, detail: String },
    #[error("config `{path}` is not valid JSON: {detail}")]
    Malformed { path: String, detail: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which family of agents a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Deterministic scene-graph simulator; no network.
    Sim,
    /// HTTP chat endpoints for checker/editor/verifier (and optionally the
    /// planner).
    Remote,
}

/// Endpoint coordinates for remote mode, one slot per agent role.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker: Option<AgentEndpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub editor: Option<AgentEndpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<AgentEndpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<AgentEndpointConfig>,
}

/// Loop parameters; field names match the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_max_rounds() -> u32 {
    RefineConfig::default().max_rounds
}

fn default_k() -> u32 {
    RefineConfig::default().retry_budget_k
}

impl Default for RefineSection {
    fn default() -> Self {
        let d = RefineConfig::default();
        Self { max_rounds: d.max_rounds, k: d.retry_budget_k, epsilon: d.verifier_epsilon }
    }
}

/// Simulator knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Per-primitive edit failure probability.
    #[serde(default)]
    pub p_fail: f64,
    /// Base seed for the simulator editor's random stream.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { p_fail: 0.0, seed: 0 }
    }
}

/// The whole config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Mode,
    #[serde(default)]
    pub endpoints: EndpointsConfig,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub sim: SimSection,
}

impl ConfigFile {
    /// An all-defaults simulator config.
    pub fn sim() -> Self {
        Self {
            mode: Mode::Sim,
            endpoints: EndpointsConfig::default(),
            refine: RefineSection::default(),
            sim: SimSection::default(),
        }
    }

    /// Read and validate a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let display = path.display().to_string();
        let raw = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                ConfigError::NotFound(display.clone())
            } else {
                ConfigError::Unreadable { path: display.clone(), detail: e.to_string() }
            }
        })?;
        let cfg: ConfigFile = serde_json::from_str(&raw)
            .map_err(|e| ConfigError::Malformed { path: display, detail: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolve the config location: explicit path, then the
    /// `REFINERY_CONFIG` environment variable, then `./refinery.json`.
    pub fn discover(explicit: Option<&Path>) -> Result<(PathBuf, Self), ConfigError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => PathBuf::from(p),
                None => PathBuf::from(DEFAULT_CONFIG_PATH),
            },
        };
        let cfg = Self::load(&path)?;
        Ok((path, cfg))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.refine_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.sim.p_fail) {
            return Err(ConfigError::Invalid(format!(
                "sim.p_fail must be within [0, 1], got {}",
                self.sim.p_fail
            )));
        }
        if self.mode == Mode::Remote {
            for (role, slot) in [
                ("checker", &self.endpoints.checker),
                ("editor", &self.endpoints.editor),
                ("verifier", &self.endpoints.verifier),
            ] {
                let ep = slot
                    .as_ref()
                    .ok_or_else(|| {
                        ConfigError::Invalid(format!("remote mode needs an `{role}` endpoint"))
                    })?;
                ep.validate().map_err(|e| ConfigError::Invalid(format!("{role}: {e}")))?;
            }
            if let Some(ep) = &self.endpoints.planner {
                ep.validate().map_err(|e| ConfigError::Invalid(format!("planner: {e}")))?;
            }
        }
        Ok(())
    }

    /// Loop parameters in engine form.
    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            max_rounds: self.refine.max_rounds,
            retry_budget_k: self.refine.k,
            verifier_epsilon: self.refine.epsilon,
        }
    }

    /// Construct the agent set this config describes. In sim mode the
    /// returned store is the handle for loading scenes in and out; remote
    /// mode has no store. A missing planner endpoint in remote mode falls
    /// back to the deterministic rule planner.
    pub fn build_agents(&self) -> Result<(Agents, Option<Arc<SceneStore>>), ConfigError> {
        match self.mode {
            Mode::Sim => {
                let store = Arc::new(SceneStore::new());
                let scorer = Arc::new(SimScorer::new(store.clone()));
                let agents = Agents {
                    planner: Arc::new(RulePlanner),
                    checker: Arc::new(SimChecker::new(store.clone())),
                    editor: Arc::new(SimEditor::new(store.clone(), self.sim.p_fail, self.sim.seed)),
                    verifier: Arc::new(ScoreVerifier::new(scorer.clone(), self.refine.epsilon)),
                    score_probe: Some(scorer),
                };
                Ok((agents, Some(store)))
            }
            Mode::Remote => {
                let client = |slot: &Option<AgentEndpointConfig>, role: &str| {
                    let ep = slot.as_ref().ok_or_else(|| {
                        ConfigError::Invalid(format!("remote mode needs an `{role}` endpoint"))
                    })?;
                    ChatClient::new(ep.clone())
                        .map_err(|e| ConfigError::Invalid(format!("{role}: {e}")))
                };
                let planner: Arc<dyn crate::planner::ChecklistPlanner> =
                    match &self.endpoints.planner {
                        Some(_) => Arc::new(RemotePlanner::new(Arc::new(
                            RemotePlannerBackend::new(client(&self.endpoints.planner, "planner")?),
                        ))),
                        None => Arc::new(RulePlanner),
                    };
                let agents = Agents {
                    planner,
                    checker: Arc::new(RemoteChecker::new(client(&self.endpoints.checker, "checker")?)),
                    editor: Arc::new(RemoteEditor::new(client(&self.endpoints.editor, "editor")?)),
                    verifier: Arc::new(RemoteVerifier::new(client(
                        &self.endpoints.verifier,
                        "verifier",
                    )?)),
                    score_probe: None,
                };
                Ok((agents, None))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sim_config_parses_with_defaults() {
        let cfg: ConfigFile = serde_json::from_str(r#"{"mode":"sim"}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mode, Mode::Sim);
        assert_eq!(cfg.refine.max_rounds, 5);
        assert_eq!(cfg.refine.k, 2);
        assert_eq!(cfg.refine.epsilon, 0.0);
        assert_eq!(cfg.sim.p_fail, 0.0);
        assert_eq!(cfg.sim.seed, 0);
    }

    #[test]
    fn full_config_round_trips() {
        let raw = r#"{
            "mode": "remote",
            "endpoints": {
                "checker":  {"base_url": "http://127.0.0.1:9001", "model_name": "check-1"},
                "editor":   {"base_url": "http://127.0.0.1:9002", "model_name": "edit-1"},
                "verifier": {"base_url": "http://127.0.0.1:9003", "model_name": "verify-1"}
            },
            "refine": {"max_rounds": 3, "k": 1, "epsilon": 0.05},
            "sim": {"p_fail": 0.5, "seed": 7}
        }"#;
        let cfg: ConfigFile = serde_json::from_str(raw).unwrap();
        cfg.validate().unwrap();
        let rc = cfg.refine_config();
        assert_eq!((rc.max_rounds, rc.retry_budget_k, rc.verifier_epsilon), (3, 1, 0.05));
        let back: ConfigFile =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back.refine.max_rounds, 3);
    }

    #[test]
    fn remote_mode_requires_core_endpoints() {
        let cfg: ConfigFile = serde_json::from_str(r#"{"mode":"remote"}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(ref m) if m.contains("checker")));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"mode":"sim","bogus":1}"#).is_err());
    }

    #[test]
    fn load_distinguishes_missing_from_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.json");
        assert!(matches!(ConfigFile::load(&missing), Err(ConfigError::NotFound(_))));

        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, "{ not json").unwrap();
        assert!(matches!(ConfigFile::load(&bad), Err(ConfigError::Malformed { .. })));
    }

    #[test]
    fn sim_agents_come_with_a_store_and_probe() {
        let (agents, store) = ConfigFile::sim().build_agents().unwrap();
        assert!(store.is_some());
        assert!(agents.score_probe.is_some());
        assert_eq!(agents.planner.name(), "rule");
    }

    #[test]
    fn out_of_range_p_fail_is_invalid() {
        let cfg: ConfigFile =
            serde_json::from_str(r#"{"mode":"sim","sim":{"p_fail":1.5}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
