//! The gateway that every oracle call flows through: role→model routing,
//! response caching, bounded retries, call accounting, and an optional
//! prompt log for leakage auditing.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{ConfigError, OracleError};
use crate::oracle::backend::{Backend, RemoteBackend, ScriptedBackend};
use crate::oracle::cache::ResponseCache;
use crate::oracle::{parse_relation, parse_yes_no, prompt_hash, OracleRequest, OracleResult, OracleRole, Relation};

/// Bounded retry policy for transient backend failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

/// Which backend the gateway dispatches to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    Remote {
        endpoint: String,
        credential_env: Option<String>,
    },
    Scripted {
        script: PathBuf,
    },
}

/// Parsed gateway configuration. Built from the flat key-value config file;
/// see the crate README for the key list.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub backend: BackendKind,
    pub role_models: BTreeMap<OracleRole, String>,
    pub default_model: String,
    pub role_temperatures: BTreeMap<OracleRole, f32>,
    pub default_temperature: f32,
    pub cache_path: Option<PathBuf>,
    pub retry: RetryPolicy,
}

impl GatewayConfig {
    /// A scripted-backend config pointing at a rules file.
    pub fn scripted(script: impl Into<PathBuf>) -> Self {
        GatewayConfig {
            backend: BackendKind::Scripted {
                script: script.into(),
            },
            role_models: BTreeMap::new(),
            default_model: "default".to_string(),
            role_temperatures: BTreeMap::new(),
            default_temperature: 0.0,
            cache_path: None,
            retry: RetryPolicy::default(),
        }
    }

    /// Extract gateway settings from flat `key = value` pairs. Consumes the
    /// `backend.*`, `roles.*`, `cache.*`, and `retry.*` namespaces; rejects
    /// unknown keys inside them.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut backend_kind: Option<String> = None;
        let mut endpoint: Option<String> = None;
        let mut credential_env: Option<String> = None;
        let mut script: Option<PathBuf> = None;
        let mut role_models = BTreeMap::new();
        let mut default_model = "default".to_string();
        let mut role_temperatures = BTreeMap::new();
        let mut default_temperature = 0.0f32;
        let mut cache_path = None;
        let mut retry = RetryPolicy::default();

        for (key, value) in kv {
            match key.as_str() {
                "backend.kind" => backend_kind = Some(value.clone()),
                "backend.endpoint" => endpoint = Some(value.clone()),
                "backend.credential_env" => credential_env = Some(value.clone()),
                "backend.script" => script = Some(PathBuf::from(value)),
                "cache.path" => cache_path = Some(PathBuf::from(value)),
                "retry.attempts" => {
                    retry.attempts = parse_number(key, value)?;
                }
                "retry.backoff_ms" => {
                    retry.backoff_ms = parse_number(key, value)?;
                }
                _ => {
                    if let Some(rest) = key.strip_prefix("roles.") {
                        let (role_name, field) =
                            rest.split_once('.').ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
                        let role = if role_name == "*" {
                            None
                        } else {
                            Some(
                                OracleRole::parse(role_name)
                                    .ok_or_else(|| ConfigError::UnknownRole(role_name.to_string()))?,
                            )
                        };
                        match field {
                            "model" => match role {
                                Some(r) => {
                                    role_models.insert(r, value.clone());
                                }
                                None => default_model = value.clone(),
                            },
                            "temperature" => {
                                let t: f32 = value.parse().map_err(|_| ConfigError::InvalidValue {
                                    key: key.clone(),
                                    message: format!("`{value}` is not a number"),
                                })?;
                                match role {
                                    Some(r) => {
                                        role_temperatures.insert(r, t);
                                    }
                                    None => default_temperature = t,
                                }
                            }
                            _ => return Err(ConfigError::UnknownKey(key.clone())),
                        }
                    } else if key.starts_with("backend.") || key.starts_with("cache.") || key.starts_with("retry.") {
                        return Err(ConfigError::UnknownKey(key.clone()));
                    }
                    // other namespaces belong to the run config
                }
            }
        }

        let backend = match backend_kind.as_deref() {
            Some("remote") => BackendKind::Remote {
                endpoint: endpoint.ok_or(ConfigError::MissingKey("backend.endpoint"))?,
                credential_env,
            },
            Some("scripted") => BackendKind::Scripted {
                script: script.ok_or(ConfigError::MissingKey("backend.script"))?,
            },
            Some(other) => {
                return Err(ConfigError::InvalidValue {
                    key: "backend.kind".to_string(),
                    message: format!("`{other}` is not `remote` or `scripted`"),
                })
            }
            None => return Err(ConfigError::MissingKey("backend.kind")),
        };

        Ok(GatewayConfig {
            backend,
            role_models,
            default_model,
            role_temperatures,
            default_temperature,
            cache_path,
            retry,
        })
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        message: format!("`{value}` is not a number"),
    })
}

/// A prompt the gateway saw, tagged with the replay step active at the time.
/// Only recorded when the prompt log is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRecord {
    pub role: OracleRole,
    /// Target index of the replay step during which the call was issued;
    /// 0 outside any step.
    pub step: usize,
    pub prompt: String,
}

/// Role-tagged oracle gateway. Safe for concurrent calls: the cache append is
/// serialized, counters are mutex-guarded, reads hit the in-memory index.
pub struct Gateway {
    backend: Box<dyn Backend>,
    cache: ResponseCache,
    role_models: BTreeMap<OracleRole, String>,
    default_model: String,
    role_temperatures: BTreeMap<OracleRole, f32>,
    default_temperature: f32,
    retry: RetryPolicy,
    calls: Mutex<BTreeMap<OracleRole, u64>>,
    prompt_log: Mutex<Option<Vec<PromptRecord>>>,
    step_marker: AtomicUsize,
}

impl Gateway {
    /// Build a gateway from config. Fails fast on a missing credential
    /// environment variable or unreadable script/cache files.
    pub fn configure(config: &GatewayConfig) -> Result<Self, OracleError> {
        let backend: Box<dyn Backend> = match &config.backend {
            BackendKind::Remote {
                endpoint,
                credential_env,
            } => {
                let api_key = match credential_env {
                    Some(var) => Some(
                        std::env::var(var)
                            .map_err(|_| OracleError::MissingCredential(var.clone()))?,
                    ),
                    None => None,
                };
                Box::new(RemoteBackend::new(endpoint.clone(), api_key))
            }
            BackendKind::Scripted { script } => Box::new(ScriptedBackend::load(script)?),
        };
        let cache = match &config.cache_path {
            Some(path) => ResponseCache::open(path)?,
            None => ResponseCache::in_memory(),
        };
        Ok(Gateway {
            backend,
            cache,
            role_models: config.role_models.clone(),
            default_model: config.default_model.clone(),
            role_temperatures: config.role_temperatures.clone(),
            default_temperature: config.default_temperature,
            retry: config.retry,
            calls: Mutex::new(BTreeMap::new()),
            prompt_log: Mutex::new(None),
            step_marker: AtomicUsize::new(0),
        })
    }

    /// Gateway over an in-code scripted backend with an in-memory cache.
    pub fn scripted(backend: ScriptedBackend) -> Self {
        Gateway {
            backend: Box::new(backend),
            cache: ResponseCache::in_memory(),
            role_models: BTreeMap::new(),
            default_model: "scripted".to_string(),
            role_temperatures: BTreeMap::new(),
            default_temperature: 0.0,
            retry: RetryPolicy {
                attempts: 1,
                backoff_ms: 0,
            },
            calls: Mutex::new(BTreeMap::new()),
            prompt_log: Mutex::new(None),
            step_marker: AtomicUsize::new(0),
        }
    }

    /// Swap the cache for a persistent one (test/CLI convenience).
    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn model_for(&self, role: OracleRole) -> &str {
        self.role_models
            .get(&role)
            .unwrap_or(&self.default_model)
    }

    pub fn temperature_for(&self, role: OracleRole) -> f32 {
        *self
            .role_temperatures
            .get(&role)
            .unwrap_or(&self.default_temperature)
    }

    /// Issue a request. A cache hit returns immediately with no backend
    /// activity; a miss dispatches with bounded retries on transient errors
    /// and appends the response to the cache.
    pub fn call(&self, req: &OracleRequest) -> OracleResult<String> {
        let model = self.model_for(req.role).to_string();
        let key = prompt_hash(req.role, &model, &req.prompt, req.temperature);
        {
            let mut calls = self.calls.lock().unwrap();
            *calls.entry(req.role).or_default() += 1;
        }
        {
            let mut guard = self.prompt_log.lock().unwrap();
            if let Some(records) = guard.as_mut() {
                records.push(PromptRecord {
                    role: req.role,
                    step: self.step_marker.load(Ordering::Relaxed),
                    prompt: req.prompt.clone(),
                });
            }
        }
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let mut attempt = 0;
        let response = loop {
            attempt += 1;
            match self
                .backend
                .complete(req.role, &model, &req.prompt, req.temperature, req.max_output)
            {
                Ok(r) => break r,
                Err(OracleError::Network { role, message, .. }) if attempt < self.retry.attempts => {
                    log::warn!(
                        "{role} call attempt {attempt}/{} failed: {message}; retrying",
                        self.retry.attempts
                    );
                    std::thread::sleep(std::time::Duration::from_millis(self.retry.backoff_ms));
                }
                Err(OracleError::Network { role, message, .. }) => {
                    return Err(OracleError::Network {
                        role,
                        attempts: attempt,
                        message,
                    })
                }
                Err(e) => return Err(e),
            }
        };
        self.cache.put(&key, req.role.as_str(), &model, &response)?;
        Ok(response)
    }

    /// Call with the configured temperature for the role.
    pub fn call_role(&self, role: OracleRole, prompt: String, max_output: u32) -> OracleResult<String> {
        self.call(&OracleRequest {
            role,
            prompt,
            max_output,
            temperature: self.temperature_for(role),
        })
    }

    /// Binary classification under the constrained yes/no grammar.
    /// Unparseable output is logged and treated as negative.
    pub fn classify_binary(&self, role: OracleRole, prompt: String) -> OracleResult<bool> {
        let raw = self.call_role(role, prompt, 8)?;
        Ok(parse_yes_no(&raw))
    }

    /// Relation classification under the constrained reuse/derive/none
    /// grammar. Unparseable output is logged and treated as none.
    pub fn classify_relation(&self, prompt: String) -> OracleResult<Relation> {
        let raw = self.call_role(OracleRole::RelationJudge, prompt, 8)?;
        Ok(parse_relation(&raw))
    }

    /// Logical call counts per role (cache hits included).
    pub fn call_counts(&self) -> BTreeMap<String, u64> {
        self.calls
            .lock()
            .unwrap()
            .iter()
            .map(|(role, count)| (role.as_str().to_string(), *count))
            .collect()
    }

    /// Network round-trips performed by the backend (0 for scripted).
    pub fn network_calls(&self) -> u64 {
        self.backend.network_calls()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    /// Start recording prompts (for leakage audits).
    pub fn enable_prompt_log(&self) {
        *self.prompt_log.lock().unwrap() = Some(Vec::new());
    }

    /// Tag subsequent prompts with the given replay step index.
    pub fn set_step_marker(&self, step: usize) {
        self.step_marker.store(step, Ordering::Relaxed);
    }

    /// Drain the recorded prompts.
    pub fn take_prompt_log(&self) -> Vec<PromptRecord> {
        self.prompt_log
            .lock()
            .unwrap()
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }
}
