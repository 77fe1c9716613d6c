//! Backend configuration file: TOML with one `[backends.<id>]` section per
//! backend, an optional `[roles]` assignment, and optional `[limits]`.
//!
//! API keys are never written in the file — each HTTP backend names the
//! environment variable that holds its key.
//!
//! ```toml
//! [limits]
//! requests_per_second = 5
//!
//! [roles]
//! generator = "gen"
//! evaluator = "judge"
//! optimiser = "gen"
//!
//! [backends.gen]
//! kind = "openai_chat"
//! model = "gpt-3.5-turbo"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [backends.judge]
//! kind = "mock"
//! script = "script.jsonl"
//! default_response = "Score: 50"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sumforge_core::gateway::RoleAssignment;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("no backends defined in {path}")]
    NoBackends { path: String },
    #[error("backend {id}: {message}")]
    BadBackend { id: String, message: String },
    #[error("role {role} references unknown backend {id}")]
    UnknownRoleBackend { role: &'static str, id: String },
    #[error("no role assignment: provide a [roles] section or --generator/--evaluator/--optimiser flags")]
    MissingRoles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// An OpenAI-style chat-completions HTTP endpoint.
    OpenaiChat,
    /// A deterministic scripted mock.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: BackendKind,
    /// Model name sent to HTTP backends.
    pub model: Option<String>,
    /// Chat-completions URL.
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    /// Overrides the per-role default temperature when set.
    pub temperature: Option<f64>,
    pub max_attempts: Option<u32>,
    pub base_delay_ms: Option<u64>,
    pub max_delay_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
    /// Mock script path, relative to the config file.
    pub script: Option<PathBuf>,
    /// Mock fallback reply for unscripted keys.
    pub default_response: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub requests_per_second: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawConfig {
    #[serde(default)]
    limits: Limits,
    roles: Option<RoleAssignment>,
    backends: BTreeMap<String, BackendSpec>,
}

/// A parsed, validated backend configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendsConfig {
    pub backends: BTreeMap<String, BackendSpec>,
    pub roles: Option<RoleAssignment>,
    pub limits: Limits,
    /// Directory the config file lives in; mock script paths resolve
    /// against it.
    pub base_dir: PathBuf,
}

impl BackendsConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            source: e,
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if raw.backends.is_empty() {
            return Err(ConfigError::NoBackends {
                path: path.display().to_string(),
            });
        }
        for (id, spec) in &raw.backends {
            match spec.kind {
                BackendKind::OpenaiChat => {
                    for (field, value) in [
                        ("model", &spec.model),
                        ("endpoint", &spec.endpoint),
                        ("api_key_env", &spec.api_key_env),
                    ] {
                        if value.is_none() {
                            return Err(ConfigError::BadBackend {
                                id: id.clone(),
                                message: format!("openai_chat backends need `{field}`"),
                            });
                        }
                    }
                }
                BackendKind::Mock => {
                    if spec.script.is_none() && spec.default_response.is_none() {
                        return Err(ConfigError::BadBackend {
                            id: id.clone(),
                            message: "mock backends need `script` and/or `default_response`"
                                .to_string(),
                        });
                    }
                }
            }
        }
        let config = Self {
            base_dir: path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
            backends: raw.backends,
            roles: raw.roles,
            limits: raw.limits,
        };
        if let Some(roles) = &config.roles {
            config.validate_assignment(roles)?;
        }
        Ok(config)
    }

    pub fn validate_assignment(&self, assignment: &RoleAssignment) -> Result<(), ConfigError> {
        for (role, id) in [
            ("generator", &assignment.generator),
            ("evaluator", &assignment.evaluator),
            ("optimiser", &assignment.optimiser),
        ] {
            if !self.backends.contains_key(id) {
                return Err(ConfigError::UnknownRoleBackend {
                    role,
                    id: id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Role assignment from the file, with CLI overrides taking precedence.
    pub fn resolve_roles(
        &self,
        generator: Option<String>,
        evaluator: Option<String>,
        optimiser: Option<String>,
    ) -> Result<RoleAssignment, ConfigError> {
        let base = self.roles.clone();
        let pick = |flag: Option<String>, from_file: Option<String>| flag.or(from_file);
        let assignment = RoleAssignment {
            generator: pick(generator, base.as_ref().map(|r| r.generator.clone()))
                .ok_or(ConfigError::MissingRoles)?,
            evaluator: pick(evaluator, base.as_ref().map(|r| r.evaluator.clone()))
                .ok_or(ConfigError::MissingRoles)?,
            optimiser: pick(optimiser, base.map(|r| r.optimiser))
                .ok_or(ConfigError::MissingRoles)?,
        };
        self.validate_assignment(&assignment)?;
        Ok(assignment)
    }

    /// True when every configured backend is a scripted mock, in which case
    /// runs are fully deterministic and can use virtual time.
    pub fn all_mock(&self) -> bool {
        self.backends
            .values()
            .all(|spec| spec.kind == BackendKind::Mock)
    }

    pub fn script_path(&self, spec: &BackendSpec) -> Option<PathBuf> {
        spec.script.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.base_dir.join(p)
            }
        })
    }
}
