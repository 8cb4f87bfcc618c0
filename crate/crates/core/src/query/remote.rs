//! Client for an E-utilities `esearch` endpoint.
//!
//! Requests are form-encoded POSTs. A client-side limiter spaces requests
//! (retries included) at least `1 / rate_limit` seconds apart across all
//! clones of a client. Transient failures (5xx, 429, timeouts, connection
//! errors) are retried with exponential backoff.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{render_query, QueryError, QuerySpec};

pub const DEFAULT_BASE_URL: &str = "https://eutils.ncbi.nlm.nih.gov";
const ESEARCH_PATH: &str = "/entrez/eutils/esearch.fcgi";
/// Added to the limiter interval so server-side clocks never see a burst
/// above the limit because of network jitter.
const LIMITER_GUARD: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub db: String,
    /// Requests per second; must be positive.
    pub rate_limit: f64,
    pub timeout: Duration,
    pub retries: u32,
    pub retmax: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff: Duration,
    pub api_key: Option<String>,
    pub tool: String,
    pub email: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            db: "pubmed".to_string(),
            rate_limit: 3.0,
            timeout: Duration::from_secs(30),
            retries: 3,
            retmax: 200,
            backoff: Duration::from_millis(500),
            api_key: None,
            tool: concat!("branchsearch/", env!("CARGO_PKG_VERSION")).to_string(),
            email: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("server returned {status}: {body}")]
    Status { status: u16, body: String },
    #[error("could not parse esearch response: {0}")]
    Parse(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl RemoteError {
    fn is_transient(&self) -> bool {
        match self {
            RemoteError::Status { status, .. } => *status >= 500 || *status == 429,
            RemoteError::Timeout | RemoteError::Transport(_) => true,
            _ => false,
        }
    }
}

/// Spaces calls at least `interval` apart.
#[derive(Debug)]
struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(rate: f64) -> Self {
        RateLimiter { interval: Duration::from_secs_f64(1.0 / rate) + LIMITER_GUARD, next_slot: Mutex::new(None) }
    }

    fn acquire(&self) {
        let wait_until = {
            let mut next = self.next_slot.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if wait_until > now {
            thread::sleep(wait_until - now);
        }
    }
}

#[derive(Debug, Clone)]
pub struct EsearchClient {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    limiter: Arc<RateLimiter>,
}

fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &body[..i]),
        None => body.to_string(),
    }
}

/// Pull the id list out of a JSON esearch response.
pub fn parse_esearch_json(body: &str) -> Result<Vec<String>, RemoteError> {
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| RemoteError::Parse(e.to_string()))?;
    let result = value.get("esearchresult").ok_or_else(|| RemoteError::Parse("missing esearchresult".into()))?;
    if let Some(err) = result.get("ERROR").and_then(|e| e.as_str()) {
        return Err(RemoteError::Parse(format!("esearch error: {err}")));
    }
    let list =
        result.get("idlist").and_then(|l| l.as_array()).ok_or_else(|| RemoteError::Parse("missing idlist".into()))?;
    list.iter()
        .map(|v| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(RemoteError::Parse(format!("non-id entry {other}"))),
        })
        .collect()
}

impl EsearchClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self, RemoteError> {
        if !(cfg.rate_limit.is_finite() && cfg.rate_limit > 0.0) {
            return Err(RemoteError::Config(format!("rate_limit must be positive, got {}", cfg.rate_limit)));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .user_agent(cfg.tool.as_str())
            .build()
            .into();
        let limiter = Arc::new(RateLimiter::new(cfg.rate_limit));
        Ok(EsearchClient { cfg, agent, limiter })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn endpoint(&self) -> String {
        format!("{}{}", self.cfg.base_url.trim_end_matches('/'), ESEARCH_PATH)
    }

    fn attempt(&self, form: &[(&str, String)]) -> Result<Vec<String>, RemoteError> {
        self.limiter.acquire();
        let sent = self.agent.post(&self.endpoint()).send_form(form.iter().map(|(k, v)| (*k, v.as_str())));
        let mut resp = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(RemoteError::Timeout),
            Err(ureq::Error::Io(e)) if e.kind() == std::io::ErrorKind::TimedOut => return Err(RemoteError::Timeout),
            Err(e) => return Err(RemoteError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let body = match resp.body_mut().read_to_string() {
            Ok(b) => b,
            Err(ureq::Error::Timeout(_)) => return Err(RemoteError::Timeout),
            Err(e) => return Err(RemoteError::Transport(e.to_string())),
        };
        if !(200..300).contains(&status) {
            return Err(RemoteError::Status { status, body: excerpt(&body) });
        }
        parse_esearch_json(&body)
    }

    /// Run `term` (already rendered) and return the matching uids.
    pub fn esearch_term(&self, term: &str) -> Result<Vec<String>, RemoteError> {
        let mut form = vec![
            ("db", self.cfg.db.clone()),
            ("term", term.to_string()),
            ("retmax", self.cfg.retmax.to_string()),
            ("retmode", "json".to_string()),
            ("tool", self.cfg.tool.clone()),
        ];
        if let Some(key) = &self.cfg.api_key {
            form.push(("api_key", key.clone()));
        }
        if let Some(email) = &self.cfg.email {
            form.push(("email", email.clone()));
        }
        let mut attempt = 0;
        loop {
            match self.attempt(&form) {
                Err(e) if e.is_transient() && attempt < self.cfg.retries => {
                    let delay = self.cfg.backoff.saturating_mul(1 << attempt.min(16));
                    log::warn!("esearch attempt {} failed ({e}); retrying in {delay:?}", attempt + 1);
                    thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    pub fn esearch(&self, qs: &QuerySpec) -> Result<Vec<String>, RemoteError> {
        let term = render_query(qs)?;
        self.esearch_term(&term)
    }
}

/// One-shot search with a fresh client.
pub fn esearch_remote(qs: &QuerySpec, cfg: &RemoteConfig) -> Result<Vec<String>, RemoteError> {
    EsearchClient::new(cfg.clone())?.esearch(qs)
}
