//! Settings merged from defaults, a JSON file, the environment and
//! command-line flags, in increasing order of precedence.
//!
//! ```json
//! {
//!   "bind": "127.0.0.1:8080",
//!   "auth_token": "secret",
//!   "backend": {"backend_kind": "scripted", "script_path": "replies.json"},
//!   "default_mode": "medium",
//!   "theta": 0.2,
//!   "rqi_weights": [0.3333, 0.3333, 0.3334],
//!   "storage_dir": "traces"
//! }
//! ```
//!
//! Unknown keys are errors, at the top level and inside `backend`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::backend::{BackendConfig, BackendKind, TOKEN_ENV};
use crate::metrics::{RqiWeights, Theta};
use crate::protocol::ReasoningMode;

pub const CONFIG_ENV: &str = "PENLOOP_CONFIG";

const FILE_KEYS: [&str; 7] = [
    "bind",
    "auth_token",
    "backend",
    "default_mode",
    "theta",
    "rqi_weights",
    "storage_dir",
];

const BACKEND_KEYS: [&str; 7] = [
    "backend_kind",
    "endpoint",
    "model_name",
    "timeout_ms",
    "script_path",
    "response_path",
    "include_mode",
];

/// Environment variables that override individual file keys.
const ENV_KEYS: [(&str, &str); 5] = [
    ("PENLOOP_BIND", "bind"),
    ("PENLOOP_AUTH_TOKEN", "auth_token"),
    ("PENLOOP_MODE", "default_mode"),
    ("PENLOOP_THETA", "theta"),
    ("PENLOOP_STORAGE_DIR", "storage_dir"),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config error at `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub bind: SocketAddr,
    pub auth_token: Option<String>,
    pub backend: Option<BackendConfig>,
    /// Bearer token for the HTTP backend, only ever read from the environment.
    pub backend_token: Option<String>,
    pub default_mode: ReasoningMode,
    pub theta: Theta,
    pub rqi_weights: RqiWeights,
    pub storage_dir: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            auth_token: None,
            backend: None,
            backend_token: None,
            default_mode: ReasoningMode::Medium,
            theta: Theta::DEFAULT,
            rqi_weights: RqiWeights::default(),
            storage_dir: None,
        }
    }
}

/// Values given on the command line, as typed by the operator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFlags {
    pub bind: Option<String>,
    pub mode: Option<String>,
    pub theta: Option<String>,
    pub storage_dir: Option<String>,
    /// Shorthand for a scripted backend reading this file.
    pub backend_script: Option<String>,
}

/// Load settings. `path` is the explicit config file (from `--config`); when
/// absent, `PENLOOP_CONFIG` in `env` names it; with neither, only defaults,
/// environment and flags apply. Pure given the file bytes, `env` and `flags`.
pub fn load_config(
    path: Option<&Path>,
    env: &HashMap<String, String>,
    flags: &ConfigFlags,
) -> Result<Settings, ConfigError> {
    let path = path
        .map(Path::to_path_buf)
        .or_else(|| env.get(CONFIG_ENV).filter(|p| !p.is_empty()).map(PathBuf::from));
    let file = match &path {
        Some(p) => {
            let bytes = std::fs::read(p)
                .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", p.display())))?;
            Some(bytes)
        }
        None => None,
    };
    let mut settings = match &file {
        Some(bytes) => parse_file(bytes)?,
        None => Settings::default(),
    };

    for (var, key) in ENV_KEYS {
        if let Some(value) = env.get(var) {
            apply_text(&mut settings, key, value)?;
        }
    }
    settings.backend_token = env.get(TOKEN_ENV).cloned();

    let flag_values = [
        ("bind", &flags.bind),
        ("default_mode", &flags.mode),
        ("theta", &flags.theta),
        ("storage_dir", &flags.storage_dir),
    ];
    for (key, value) in flag_values {
        if let Some(value) = value {
            apply_text(&mut settings, key, value)?;
        }
    }
    if let Some(script) = &flags.backend_script {
        settings.backend = Some(BackendConfig::scripted(script));
    }
    if let Some(backend) = &settings.backend {
        backend
            .validate()
            .map_err(|(key, reason)| ConfigError::new(format!("backend.{key}"), reason))?;
    }
    Ok(settings)
}

/// Parse file bytes over the defaults. Empty or whitespace-only input yields
/// the defaults.
pub fn parse_file(bytes: &[u8]) -> Result<Settings, ConfigError> {
    let mut settings = Settings::default();
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(settings);
    }
    let value: Value = serde_json::from_slice(bytes)
        .map_err(|e| ConfigError::new("config", format!("not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(ConfigError::new("config", "top level must be a JSON object"));
    };
    reject_unknown(&map, &FILE_KEYS, "")?;
    for (key, value) in &map {
        if value.is_null() {
            continue;
        }
        match key.as_str() {
            "bind" => settings.bind = parse_bind(&field::<String>(key, value)?)?,
            "auth_token" => settings.auth_token = Some(field(key, value)?),
            "default_mode" => settings.default_mode = parse_mode(&field::<String>(key, value)?)?,
            "theta" => settings.theta = parse_theta(field(key, value)?)?,
            "rqi_weights" => {
                settings.rqi_weights = RqiWeights::new(field(key, value)?)
                    .map_err(|e| ConfigError::new(key, e.to_string()))?
            }
            "storage_dir" => settings.storage_dir = Some(field(key, value)?),
            "backend" => settings.backend = Some(parse_backend(value)?),
            _ => unreachable!("keys checked above"),
        }
    }
    Ok(settings)
}

fn reject_unknown(map: &Map<String, Value>, known: &[&str], prefix: &str) -> Result<(), ConfigError> {
    match map.keys().find(|k| !known.contains(&k.as_str())) {
        Some(key) => Err(ConfigError::new(format!("{prefix}{key}"), "unknown key")),
        None => Ok(()),
    }
}

fn field<T: DeserializeOwned>(key: &str, value: &Value) -> Result<T, ConfigError> {
    serde_json::from_value(value.clone()).map_err(|e| ConfigError::new(key, e.to_string()))
}

fn parse_backend(value: &Value) -> Result<BackendConfig, ConfigError> {
    let Value::Object(map) = value else {
        return Err(ConfigError::new("backend", "must be a JSON object"));
    };
    reject_unknown(map, &BACKEND_KEYS, "backend.")?;
    if !map.contains_key("backend_kind") {
        return Err(ConfigError::new("backend.backend_kind", "required"));
    }
    for (key, value) in map {
        let checked = match key.as_str() {
            "backend_kind" => field::<BackendKind>(key, value).map(drop),
            "timeout_ms" => field::<u64>(key, value).map(drop),
            "include_mode" => field::<bool>(key, value).map(drop),
            _ => field::<Option<String>>(key, value).map(drop),
        };
        checked.map_err(|e| ConfigError::new(format!("backend.{key}"), e.reason))?;
    }
    let config: BackendConfig = field("backend", value)?;
    config
        .validate()
        .map_err(|(key, reason)| ConfigError::new(format!("backend.{key}"), reason))?;
    Ok(config)
}

fn parse_bind(text: &str) -> Result<SocketAddr, ConfigError> {
    text.parse()
        .map_err(|e| ConfigError::new("bind", format!("`{text}` is not host:port: {e}")))
}

fn parse_mode(text: &str) -> Result<ReasoningMode, ConfigError> {
    text.parse().map_err(|e: String| ConfigError::new("default_mode", e))
}

fn parse_theta(value: f64) -> Result<Theta, ConfigError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(ConfigError::new("theta", format!("{value} is out of [0,1]")));
    }
    Theta::new(value).map_err(|e| ConfigError::new("theta", e.to_string()))
}

fn apply_text(settings: &mut Settings, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "bind" => settings.bind = parse_bind(value)?,
        "auth_token" => settings.auth_token = Some(value.to_string()).filter(|t| !t.is_empty()),
        "default_mode" => settings.default_mode = parse_mode(value)?,
        "theta" => {
            let theta: f64 = value
                .trim()
                .parse()
                .map_err(|_| ConfigError::new("theta", format!("`{value}` is not a number")))?;
            settings.theta = parse_theta(theta)?;
        }
        "storage_dir" => settings.storage_dir = Some(PathBuf::from(value)),
        _ => return Err(ConfigError::new(key, "unknown key")),
    }
    Ok(())
}
