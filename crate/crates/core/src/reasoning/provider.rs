//! Rating providers: an offline fixture-backed mock and an HTTP client.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RatingMode;

pub const ENV_ENDPOINT: &str = "MRLAYOUT_PROVIDER_URL";
pub const ENV_API_KEY: &str = "MRLAYOUT_PROVIDER_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("no mock response for image `{image}`, mode {mode}, seed {seed}")]
    MissingFixture { image: String, mode: &'static str, seed: u64 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited (HTTP 429) after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("HTTP status {status} after {attempts} attempt(s)")]
    Status { status: u16, attempts: u32 },
}

/// Everything a provider sees for one model instance. `image` and
/// `attachments` are opaque references passed through untouched.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderRequest {
    pub context: String,
    pub prompt: String,
    pub image: String,
    pub attachments: Vec<String>,
    pub mode: RatingMode,
    pub seed: u64,
}

pub trait RatingProvider: Send + Sync {
    fn query(&self, request: &ProviderRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    pub image: String,
    pub mode: RatingMode,
    pub seed: u64,
    pub text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MockFile {
    responses: Vec<MockFixture>,
}

/// Returns canned text keyed by (image, mode, seed).
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    responses: HashMap<(String, RatingMode, u64), String>,
}

impl MockProvider {
    pub fn new(fixtures: impl IntoIterator<Item = MockFixture>) -> Self {
        let responses = fixtures.into_iter().map(|f| ((f.image, f.mode, f.seed), f.text)).collect();
        Self { responses }
    }

    /// Parses `{"responses": [{image, mode, seed, text}, ...]}`; later
    /// entries override earlier ones with the same key.
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let file: MockFile =
            serde_json::from_str(text).map_err(|e| ProviderError::Config(format!("mock fixtures: {e}")))?;
        Ok(Self::new(file.responses))
    }
}

impl RatingProvider for MockProvider {
    fn query(&self, r: &ProviderRequest) -> Result<String, ProviderError> {
        self.responses.get(&(r.image.clone(), r.mode, r.seed)).cloned().ok_or_else(|| ProviderError::MissingFixture {
            image: r.image.clone(),
            mode: r.mode.name(),
            seed: r.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles each time.
    pub backoff: Duration,
}

impl HttpConfig {
    /// Endpoint and key from the environment, other settings at defaults.
    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| ProviderError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        Ok(Self {
            endpoint,
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(500),
        })
    }
}

/// POSTs the request as JSON and returns the response body as text.
pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn attempt(&self, request: &ProviderRequest, attempts: u32) -> Result<String, (ProviderError, bool)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(request) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if (200..300).contains(&status) {
                    resp.body_mut()
                        .read_to_string()
                        .map_err(|e| (ProviderError::Transport { attempts, message: e.to_string() }, true))
                } else if status == 429 {
                    Err((ProviderError::RateLimited { attempts }, true))
                } else {
                    Err((ProviderError::Status { status, attempts }, status >= 500))
                }
            }
            Err(ureq::Error::Timeout(_)) => Err((ProviderError::Timeout { attempts }, true)),
            Err(e) => Err((ProviderError::Transport { attempts, message: e.to_string() }, true)),
        }
    }
}

impl RatingProvider for HttpProvider {
    fn query(&self, request: &ProviderRequest) -> Result<String, ProviderError> {
        let mut delay = self.config.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(request, attempts) {
                Ok(body) => return Ok(body),
                Err((err, retryable)) => {
                    if !retryable || attempts > self.config.max_retries {
                        return Err(err);
                    }
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

/// Queries one instance per seed with at most `in_flight` concurrent
/// requests. Results come back in seed order.
pub fn run_instances<P: RatingProvider + ?Sized>(
    provider: &P,
    requests: &[ProviderRequest],
    in_flight: usize,
) -> Result<Vec<Result<String, ProviderError>>, ProviderError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(in_flight.max(1))
        .build()
        .map_err(|e| ProviderError::Config(e.to_string()))?;
    Ok(pool.install(|| requests.par_iter().map(|r| provider.query(r)).collect()))
}
