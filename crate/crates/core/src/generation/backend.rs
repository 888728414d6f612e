use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::mock::mock_respond;
use super::{GenerationError, DEFAULT_RETRIES, GENERATION_TEMPERATURE, PREDICTION_TEMPERATURE};

/// What a request is for; selects the sampling temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Generate,
    Predict,
    Modify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Regular expression matched against the whole prompt.
    pub pattern: String,
    pub response: String,
}

fn default_timeout() -> u64 {
    120
}
fn default_max_tokens() -> u32 {
    4096
}
fn default_in_flight() -> usize {
    4
}
fn default_mutation_rate() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorBackendConfig {
    /// Chat-completion service over HTTPS.
    Remote {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the bearer token.
        #[serde(default)]
        auth_env: Option<String>,
        /// Generation temperature; predictions always use 0.
        #[serde(default)]
        temperature: Option<f64>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
        #[serde(default)]
        requests_per_minute: Option<u32>,
    },
    Mock {
        seed: u64,
        #[serde(default = "default_mutation_rate")]
        mutation_rate: f64,
    },
    /// Fixed responses chosen by the first rule whose pattern matches.
    Scripted {
        #[serde(default)]
        rules: Vec<ScriptRule>,
        /// JSON file holding a list of rules, appended after `rules`.
        #[serde(default)]
        path: Option<PathBuf>,
    },
}

impl GeneratorBackendConfig {
    pub fn mock(seed: u64) -> Self {
        GeneratorBackendConfig::Mock { seed, mutation_rate: default_mutation_rate() }
    }

    pub fn scripted(rules: Vec<ScriptRule>) -> Self {
        GeneratorBackendConfig::Scripted { rules, path: None }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        match self {
            GeneratorBackendConfig::Remote { endpoint, model, timeout_secs, max_in_flight, .. } => {
                if endpoint.trim().is_empty() || model.trim().is_empty() {
                    return Err(GenerationError::Config("remote backend needs an endpoint and a model id".into()));
                }
                if *timeout_secs == 0 || *max_in_flight == 0 {
                    return Err(GenerationError::Config("timeout and in-flight limit must be positive".into()));
                }
            }
            GeneratorBackendConfig::Mock { mutation_rate, .. } => {
                if !(0.0..=1.0).contains(mutation_rate) {
                    return Err(GenerationError::Config("mutation rate must lie in [0, 1]".into()));
                }
            }
            GeneratorBackendConfig::Scripted { .. } => {}
        }
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorBackendConfig::Remote { .. } => "remote",
            GeneratorBackendConfig::Mock { .. } => "mock",
            GeneratorBackendConfig::Scripted { .. } => "scripted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: usize,
    /// Delay before the second attempt; doubles afterwards. Only remote
    /// backends sleep.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: DEFAULT_RETRIES, base_delay_ms: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub unix_ms: u128,
    pub backend: String,
    pub task: Task,
    pub attempt: usize,
    pub request_fingerprint: String,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// Append-only JSON-lines log of every request and response.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl AuditLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        AuditLog { path: path.into(), lock: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, rec: &AuditRecord) -> Result<(), GenerationError> {
        let _g = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(|e| GenerationError::Io(e.to_string()))?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| GenerationError::Io(e.to_string()))?;
        let line = serde_json::to_string(rec).expect("audit record serializes");
        writeln!(f, "{line}").map_err(|e| GenerationError::Io(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Vec<AuditRecord>, GenerationError> {
        let text = fs::read_to_string(path).map_err(|e| GenerationError::Io(e.to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| GenerationError::Io(e.to_string())))
            .collect()
    }
}

/// Token bucket plus an in-flight cap.
#[derive(Debug)]
struct Throttle {
    state: Mutex<(usize, f64, Instant)>,
    freed: Condvar,
    max_in_flight: usize,
    per_second: Option<f64>,
}

impl Throttle {
    fn new(max_in_flight: usize, per_minute: Option<u32>) -> Self {
        let per_second = per_minute.map(|r| r.max(1) as f64 / 60.0);
        Throttle {
            state: Mutex::new((0, 1.0, Instant::now())),
            freed: Condvar::new(),
            max_in_flight: max_in_flight.max(1),
            per_second,
        }
    }

    fn acquire(&self) {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if s.0 < self.max_in_flight {
                match self.per_second {
                    None => break,
                    Some(rate) => {
                        let now = Instant::now();
                        s.1 = (s.1 + now.duration_since(s.2).as_secs_f64() * rate).min(1.0);
                        s.2 = now;
                        if s.1 >= 1.0 {
                            s.1 -= 1.0;
                            break;
                        }
                        let wait = Duration::from_secs_f64((1.0 - s.1) / rate);
                        s = self.freed.wait_timeout(s, wait).unwrap_or_else(|e| e.into_inner()).0;
                        continue;
                    }
                }
            }
            s = self.freed.wait(s).unwrap_or_else(|e| e.into_inner());
        }
        s.0 += 1;
    }

    fn release(&self) {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        s.0 -= 1;
        self.freed.notify_one();
    }
}

#[derive(Debug)]
enum Inner {
    Remote {
        agent: ureq::Agent,
        endpoint: String,
        model: String,
        token: Option<String>,
        temperature: f64,
        max_tokens: u32,
        throttle: Throttle,
    },
    Mock {
        seed: u64,
        mutation_rate: f64,
    },
    Scripted {
        rules: Vec<(Regex, String)>,
    },
}

/// A ready-to-use backend built from a [`GeneratorBackendConfig`].
#[derive(Debug)]
pub struct Generator {
    config: GeneratorBackendConfig,
    inner: Inner,
    retry: RetryPolicy,
    audit: Option<AuditLog>,
}

impl Generator {
    pub fn new(config: &GeneratorBackendConfig) -> Result<Self, GenerationError> {
        config.validate()?;
        let inner = match config {
            GeneratorBackendConfig::Remote {
                endpoint,
                model,
                auth_env,
                temperature,
                timeout_secs,
                max_tokens,
                max_in_flight,
                requests_per_minute,
            } => {
                let token = match auth_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        GenerationError::Config(format!("environment variable {var} holding the token is not set"))
                    })?),
                    None => None,
                };
                let agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs(*timeout_secs)))
                    .http_status_as_error(false)
                    .build()
                    .new_agent();
                Inner::Remote {
                    agent,
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    token,
                    temperature: temperature.unwrap_or(GENERATION_TEMPERATURE),
                    max_tokens: *max_tokens,
                    throttle: Throttle::new(*max_in_flight, *requests_per_minute),
                }
            }
            GeneratorBackendConfig::Mock { seed, mutation_rate } => {
                Inner::Mock { seed: *seed, mutation_rate: *mutation_rate }
            }
            GeneratorBackendConfig::Scripted { rules, path } => {
                let mut all = rules.clone();
                if let Some(p) = path {
                    let text = fs::read_to_string(p).map_err(|e| GenerationError::Io(format!("{}: {e}", p.display())))?;
                    let more: Vec<ScriptRule> =
                        serde_json::from_str(&text).map_err(|e| GenerationError::Config(format!("script file: {e}")))?;
                    all.extend(more);
                }
                let rules = all
                    .into_iter()
                    .map(|r| {
                        Regex::new(&r.pattern)
                            .map(|re| (re, r.response))
                            .map_err(|e| GenerationError::Config(format!("script pattern: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                Inner::Scripted { rules }
            }
        };
        Ok(Generator { config: config.clone(), inner, retry: RetryPolicy::default(), audit: None })
    }

    pub fn with_audit(mut self, log: AuditLog) -> Self {
        self.audit = Some(log);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &GeneratorBackendConfig {
        &self.config
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    pub fn audit(&self) -> Option<&AuditLog> {
        self.audit.as_ref()
    }

    /// One request, no retry.
    pub fn complete(&self, prompt: &str, task: Task) -> Result<String, GenerationError> {
        match &self.inner {
            Inner::Mock { seed, mutation_rate } => Ok(mock_respond(prompt, task, *seed, *mutation_rate)),
            Inner::Scripted { rules } => rules
                .iter()
                .find(|(re, _)| re.is_match(prompt))
                .map(|(_, r)| r.clone())
                .ok_or_else(|| GenerationError::Backend("no scripted response matches the prompt".into())),
            Inner::Remote { agent, endpoint, model, token, temperature, max_tokens, throttle } => {
                let temperature = if task == Task::Predict { PREDICTION_TEMPERATURE } else { *temperature };
                let body = json!({
                    "model": model,
                    "messages": [{ "role": "user", "content": prompt }],
                    "temperature": temperature,
                    "max_tokens": max_tokens,
                });
                throttle.acquire();
                let result = remote_call(agent, endpoint, token.as_deref(), &body);
                throttle.release();
                result
            }
        }
    }

    /// Calls the backend until `parse` accepts the response or the retry
    /// budget is spent. Every attempt is audited.
    pub fn request<T>(
        &self,
        prompt: &str,
        task: Task,
        fingerprint: &str,
        mut parse: impl FnMut(&str) -> Result<T, GenerationError>,
    ) -> Result<T, GenerationError> {
        let attempts = self.retry.attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            if attempt > 1 && matches!(self.inner, Inner::Remote { .. }) {
                thread::sleep(Duration::from_millis(self.retry.base_delay_ms << (attempt - 2).min(10)));
            }
            let outcome = self.complete(prompt, task).and_then(|raw| Ok((parse(&raw)?, raw)));
            let (response, error) = match &outcome {
                Ok((_, raw)) => (Some(raw.clone()), None),
                Err(e) => (e.raw_text().map(str::to_string), Some(e.to_string())),
            };
            if let Some(log) = &self.audit {
                let rec = AuditRecord {
                    unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
                    backend: self.config.kind().into(),
                    task,
                    attempt,
                    request_fingerprint: fingerprint.into(),
                    prompt: prompt.into(),
                    response,
                    error,
                };
                if let Err(e) = log.append(&rec) {
                    log::warn!("audit log {}: {e}", log.path().display());
                }
            }
            match outcome {
                Ok((v, _)) => return Ok(v),
                Err(e) if e.retryable() && attempt < attempts => {
                    log::warn!("attempt {attempt} of {attempts} failed: {e}");
                    last = Some(e);
                }
                Err(GenerationError::BackendTimeout { .. }) => return Err(GenerationError::BackendTimeout { attempts: attempt }),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or(GenerationError::BackendTimeout { attempts }))
    }
}

fn remote_call(
    agent: &ureq::Agent,
    endpoint: &str,
    token: Option<&str>,
    body: &serde_json::Value,
) -> Result<String, GenerationError> {
    let mut req = agent.post(endpoint).header("Content-Type", "application/json");
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    let mut resp = req.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => GenerationError::BackendTimeout { attempts: 1 },
        other => GenerationError::Backend(other.to_string()),
    })?;
    let status = resp.status();
    let text = resp.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => GenerationError::BackendTimeout { attempts: 1 },
        other => GenerationError::Backend(other.to_string()),
    })?;
    if !status.is_success() {
        return Err(GenerationError::Backend(format!("HTTP {status}: {}", text.chars().take(500).collect::<String>())));
    }
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|_| GenerationError::MalformedResponse { raw: text.clone() })?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or(GenerationError::MalformedResponse { raw: text })
}
