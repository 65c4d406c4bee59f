//! Oracle backends: a remote chat-completion endpoint and a deterministic
//! scripted backend for tests and desk-scale replays.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use regex::Regex;
use serde::Deserialize;

use crate::error::OracleError;
use crate::oracle::{prompt_hash, OracleResult, OracleRole};

/// A completion backend. Implementations must be pure with respect to the
/// request: the same (role, model, prompt, temperature) always yields the
/// same response, which is what makes cached replay sound.
pub trait Backend: Send + Sync {
    fn complete(
        &self,
        role: OracleRole,
        model: &str,
        prompt: &str,
        temperature: f32,
        max_output: u32,
    ) -> OracleResult<String>;

    /// Number of network round-trips performed so far (0 for local backends).
    fn network_calls(&self) -> u64 {
        0
    }
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

/// Rule file format, JSON:
///
/// ```json
/// {
///   "schema_version": 1,
///   "fixtures": [
///     {"role": "Actor", "prompt": "<exact prompt text>", "response": "..."}
///   ],
///   "rules": [
///     {"role": "Proposer", "when_contains": "marker", "response": "..."},
///     {"role": "StateTransitioner", "kind": "extract_last",
///      "pattern": "at the (\\w+)", "fallback_pattern": "(?m)^Current answer: (.*)$"},
///     {"role": "EMJudge", "kind": "yes_if_equal",
///      "pattern_a": "(?m)^Reference action: (.*)$",
///      "pattern_b": "(?m)^Predicted action: (.*)$"},
///     {"role": "ProfileUpdater", "kind": "extract_join",
///      "patterns": ["(?s)Profile so far:\\n(.*?)\\n<<<", "(trait_\\w+)"], "join": " "}
///   ]
/// }
/// ```
///
/// Fixtures match on exact (role, prompt). Rules are tried in order; a rule
/// applies when its `role` (if any) and `when_contains` substring (if any)
/// both match the request. Rule kinds:
/// - `const` (default): return `response` verbatim.
/// - `extract_last`: return the last capture of `pattern` in the prompt,
///   falling back to the last capture of `fallback_pattern`.
/// - `yes_if_equal`: capture `pattern_a` and `pattern_b`; "yes" iff both
///   captured and equal, else "no".
/// - `extract_join`: first capture of each of `patterns`, joined by `join`.
/// - `error`: fail with `message` (for exercising error paths).
#[derive(Debug, Deserialize)]
struct ScriptFile {
    #[serde(default = "default_schema_version")]
    schema_version: u32,
    #[serde(default)]
    fixtures: Vec<FixtureSpec>,
    #[serde(default)]
    rules: Vec<RuleSpec>,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
struct FixtureSpec {
    role: String,
    prompt: String,
    response: String,
}

#[derive(Debug, Deserialize)]
struct RuleSpec {
    #[serde(default)]
    role: Option<String>,
    #[serde(default)]
    when_contains: Option<String>,
    #[serde(default = "default_rule_kind")]
    kind: String,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    pattern: Option<String>,
    #[serde(default)]
    fallback_pattern: Option<String>,
    #[serde(default)]
    pattern_a: Option<String>,
    #[serde(default)]
    pattern_b: Option<String>,
    #[serde(default)]
    patterns: Option<Vec<String>>,
    #[serde(default)]
    join: Option<String>,
    #[serde(default)]
    message: Option<String>,
}

fn default_rule_kind() -> String {
    "const".to_string()
}

#[derive(Debug, Clone)]
enum RuleBody {
    Const(String),
    ExtractLast {
        pattern: Regex,
        fallback: Option<Regex>,
    },
    YesIfEqual {
        pattern_a: Regex,
        pattern_b: Regex,
    },
    ExtractJoin {
        patterns: Vec<Regex>,
        join: String,
    },
    Error(String),
}

/// One scripted response rule. Built from files or programmatically in tests.
#[derive(Debug, Clone)]
pub struct ScriptedRule {
    role: Option<OracleRole>,
    when_contains: Option<String>,
    body: RuleBody,
}

impl ScriptedRule {
    pub fn constant(role: Option<OracleRole>, when_contains: Option<&str>, response: &str) -> Self {
        ScriptedRule {
            role,
            when_contains: when_contains.map(str::to_string),
            body: RuleBody::Const(response.to_string()),
        }
    }

    pub fn extract_last(
        role: Option<OracleRole>,
        pattern: &str,
        fallback_pattern: Option<&str>,
    ) -> Result<Self, regex::Error> {
        Ok(ScriptedRule {
            role,
            when_contains: None,
            body: RuleBody::ExtractLast {
                pattern: Regex::new(pattern)?,
                fallback: fallback_pattern.map(Regex::new).transpose()?,
            },
        })
    }

    pub fn yes_if_equal(
        role: Option<OracleRole>,
        pattern_a: &str,
        pattern_b: &str,
    ) -> Result<Self, regex::Error> {
        Ok(ScriptedRule {
            role,
            when_contains: None,
            body: RuleBody::YesIfEqual {
                pattern_a: Regex::new(pattern_a)?,
                pattern_b: Regex::new(pattern_b)?,
            },
        })
    }

    fn from_spec(spec: RuleSpec) -> Result<Self, String> {
        let role = match &spec.role {
            Some(name) => Some(
                OracleRole::parse(name).ok_or_else(|| format!("unknown role `{name}` in rule"))?,
            ),
            None => None,
        };
        let compile = |p: &str| Regex::new(p).map_err(|e| format!("bad pattern `{p}`: {e}"));
        let body = match spec.kind.as_str() {
            "const" => RuleBody::Const(
                spec.response
                    .ok_or_else(|| "const rule needs `response`".to_string())?,
            ),
            "extract_last" => RuleBody::ExtractLast {
                pattern: compile(
                    spec.pattern
                        .as_deref()
                        .ok_or_else(|| "extract_last rule needs `pattern`".to_string())?,
                )?,
                fallback: spec
                    .fallback_pattern
                    .as_deref()
                    .map(compile)
                    .transpose()?,
            },
            "yes_if_equal" => RuleBody::YesIfEqual {
                pattern_a: compile(
                    spec.pattern_a
                        .as_deref()
                        .ok_or_else(|| "yes_if_equal rule needs `pattern_a`".to_string())?,
                )?,
                pattern_b: compile(
                    spec.pattern_b
                        .as_deref()
                        .ok_or_else(|| "yes_if_equal rule needs `pattern_b`".to_string())?,
                )?,
            },
            "extract_join" => RuleBody::ExtractJoin {
                patterns: spec
                    .patterns
                    .unwrap_or_default()
                    .iter()
                    .map(|p| compile(p))
                    .collect::<Result<Vec<_>, _>>()?,
                join: spec.join.unwrap_or_else(|| " ".to_string()),
            },
            "error" => RuleBody::Error(
                spec.message
                    .unwrap_or_else(|| "scripted error".to_string()),
            ),
            other => return Err(format!("unknown rule kind `{other}`")),
        };
        Ok(ScriptedRule {
            role,
            when_contains: spec.when_contains,
            body,
        })
    }

    fn applies(&self, role: OracleRole, prompt: &str) -> bool {
        if let Some(r) = self.role {
            if r != role {
                return false;
            }
        }
        if let Some(s) = &self.when_contains {
            if !prompt.contains(s.as_str()) {
                return false;
            }
        }
        true
    }

    fn apply(&self, role: OracleRole, prompt: &str) -> OracleResult<String> {
        let last_capture = |re: &Regex| -> Option<String> {
            re.captures_iter(prompt)
                .last()
                .map(|c| c.get(1).map_or_else(|| c[0].to_string(), |m| m.as_str().to_string()))
        };
        match &self.body {
            RuleBody::Const(response) => Ok(response.clone()),
            RuleBody::ExtractLast { pattern, fallback } => last_capture(pattern)
                .or_else(|| fallback.as_ref().and_then(last_capture))
                .ok_or_else(|| OracleError::Backend {
                    role,
                    message: "extract_last rule matched no pattern".to_string(),
                }),
            RuleBody::YesIfEqual {
                pattern_a,
                pattern_b,
            } => {
                let a = last_capture(pattern_a);
                let b = last_capture(pattern_b);
                Ok(match (a, b) {
                    (Some(a), Some(b)) if a == b => "yes".to_string(),
                    _ => "no".to_string(),
                })
            }
            RuleBody::ExtractJoin { patterns, join } => {
                let parts: Vec<String> = patterns
                    .iter()
                    .filter_map(|re| {
                        re.captures(prompt).map(|c| {
                            c.get(1)
                                .map_or_else(|| c[0].to_string(), |m| m.as_str().to_string())
                        })
                    })
                    .collect();
                if parts.is_empty() {
                    return Err(OracleError::Backend {
                        role,
                        message: "extract_join rule captured nothing".to_string(),
                    });
                }
                Ok(parts.join(join))
            }
            RuleBody::Error(message) => Err(OracleError::Backend {
                role,
                message: message.clone(),
            }),
        }
    }
}

/// Deterministic backend: exact-prompt fixtures first, then ordered rules.
/// A call matching neither is an error naming the role and prompt hash, so
/// unplanned oracle use can never silently pass in tests.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    fixtures: Vec<(OracleRole, String, String)>,
    rules: Vec<ScriptedRule>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load from a rules JSON file, or from a directory of `*.json` rule
    /// files applied in filename order.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        let path = path.as_ref();
        let mut backend = ScriptedBackend::new();
        if path.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(path)
                .map_err(OracleError::CacheIo)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
                .collect();
            files.sort();
            for file in files {
                backend.load_file(&file)?;
            }
        } else {
            backend.load_file(path)?;
        }
        Ok(backend)
    }

    fn load_file(&mut self, path: &Path) -> Result<(), OracleError> {
        let raw = std::fs::read_to_string(path).map_err(OracleError::CacheIo)?;
        let file: ScriptFile = serde_json::from_str(&raw).map_err(|e| OracleError::Backend {
            role: OracleRole::Proposer,
            message: format!("bad script file {}: {e}", path.display()),
        })?;
        if file.schema_version != 1 {
            return Err(OracleError::Backend {
                role: OracleRole::Proposer,
                message: format!(
                    "unsupported script schema version {} in {}",
                    file.schema_version,
                    path.display()
                ),
            });
        }
        for fixture in file.fixtures {
            let role = OracleRole::parse(&fixture.role).ok_or_else(|| OracleError::Backend {
                role: OracleRole::Proposer,
                message: format!("unknown role `{}` in fixture", fixture.role),
            })?;
            self.fixtures.push((role, fixture.prompt, fixture.response));
        }
        for spec in file.rules {
            let rule = ScriptedRule::from_spec(spec).map_err(|message| OracleError::Backend {
                role: OracleRole::Proposer,
                message,
            })?;
            self.rules.push(rule);
        }
        Ok(())
    }

    pub fn with_rule(mut self, rule: ScriptedRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn with_fixture(mut self, role: OracleRole, prompt: &str, response: &str) -> Self {
        self.fixtures
            .push((role, prompt.to_string(), response.to_string()));
        self
    }

    pub fn push_rule(&mut self, rule: ScriptedRule) {
        self.rules.push(rule);
    }
}

impl Backend for ScriptedBackend {
    fn complete(
        &self,
        role: OracleRole,
        model: &str,
        prompt: &str,
        temperature: f32,
        _max_output: u32,
    ) -> OracleResult<String> {
        for (frole, fprompt, fresponse) in &self.fixtures {
            if *frole == role && fprompt == prompt {
                return Ok(fresponse.clone());
            }
        }
        for rule in &self.rules {
            if rule.applies(role, prompt) {
                return rule.apply(role, prompt);
            }
        }
        Err(OracleError::Unscripted {
            role,
            prompt_hash: prompt_hash(role, model, prompt, temperature),
        })
    }
}

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f32,
    max_tokens: u32,
}

#[derive(Debug, serde::Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Chat-completion client: POSTs `{model, messages, temperature, max_tokens}`
/// and reads the first choice's message content. Transport failures and 5xx
/// statuses surface as retryable [`OracleError::Network`]; other statuses
/// surface the response body.
pub struct RemoteBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    network_calls: AtomicU64,
}

impl RemoteBackend {
    pub fn new(endpoint: String, api_key: Option<String>) -> Self {
        RemoteBackend {
            endpoint,
            api_key,
            client: reqwest::blocking::Client::new(),
            network_calls: AtomicU64::new(0),
        }
    }
}

impl Backend for RemoteBackend {
    fn complete(
        &self,
        role: OracleRole,
        model: &str,
        prompt: &str,
        temperature: f32,
        max_output: u32,
    ) -> OracleResult<String> {
        self.network_calls.fetch_add(1, Ordering::Relaxed);
        let body = ChatRequest {
            model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature,
            max_tokens: max_output,
        };
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| OracleError::Network {
            role,
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| OracleError::Network {
            role,
            attempts: 1,
            message: e.to_string(),
        })?;
        if status.is_server_error() {
            return Err(OracleError::Network {
                role,
                attempts: 1,
                message: format!("{status}: {text}"),
            });
        }
        if !status.is_success() {
            return Err(OracleError::Backend {
                role,
                message: format!("{status}: {text}"),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| OracleError::Backend {
                role,
                message: format!("unexpected response shape: {e}"),
            })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| OracleError::Backend {
                role,
                message: "response had no choices".to_string(),
            })
    }

    fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::Relaxed)
    }
}
