//! HTTP client for a remote block model.
//!
//! Wire protocol (UTF-8 JSON):
//!
//! ```text
//! POST /v1/score    {"prefix", "suffix", "target"}                                  -> {"logprobs": [f64]}
//! POST /v1/generate {"prefix", "suffix", "max_tokens", "temperature", "top_k", "seed"} -> {"tokens": str, "logprobs": [f64]}
//! ```
//!
//! Scoring requests are never retried so that a score is either the server's
//! answer or an error. Generation requests are retried with exponential
//! backoff.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    tokenize, BlockContext, BlockFill, BlockModel, Distribution, LogProbSeries, ModelError, SamplingParams, Vocabulary,
};

/// Environment variable naming the remote endpoint.
pub const MODEL_URL_ENV: &str = "BIPRO_MODEL_URL";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prefix: String,
    pub suffix: String,
    pub target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub logprobs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prefix: String,
    pub suffix: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub tokens: String,
    pub logprobs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    /// Maximum number of requests in flight at once.
    pub max_connections: usize,
    /// Retries for generation requests only.
    pub generate_retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            max_connections: 8,
            generate_retries: 2,
            initial_backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads the endpoint from [`MODEL_URL_ENV`].
    pub fn from_env() -> Result<Self, ModelError> {
        std::env::var(MODEL_URL_ENV)
            .map(Self::new)
            .map_err(|_| ModelError::Transport(format!("{MODEL_URL_ENV} is not set")))
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(slots: usize) -> Self {
        Self { available: Mutex::new(slots.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("limiter poisoned");
        while *available == 0 {
            available = self.freed.wait(available).expect("limiter poisoned");
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("limiter poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Remote block model. The vocabulary is the set of tokens the caller wants
/// distributions over; next-token distributions are the server's scores for
/// each vocabulary token, renormalized over that set.
pub struct RemoteModel {
    config: RemoteConfig,
    vocab: Vocabulary,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl RemoteModel {
    pub fn new(config: RemoteConfig, vocab: Vocabulary) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).build().into();
        let limiter = Limiter::new(config.max_connections);
        Self { config, vocab, agent, limiter }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, ModelError> {
        let _permit = self.limiter.acquire();
        let mut response = self.agent.post(&self.url(path)).send_json(body).map_err(transport)?;
        response
            .body_mut()
            .read_json::<R>()
            .map_err(|e| ModelError::Protocol(format!("bad response body from {path}: {e}")))
    }

    fn score_text(&self, ctx: &BlockContext, target: &[String]) -> Result<Vec<f64>, ModelError> {
        let request = ScoreRequest { prefix: ctx.prefix_text(), suffix: ctx.suffix_text(), target: target.concat() };
        let response: ScoreResponse = self.post("/v1/score", &request)?;
        if response.logprobs.len() != target.len() {
            return Err(ModelError::Protocol(format!(
                "expected {} log-probabilities, got {}",
                target.len(),
                response.logprobs.len()
            )));
        }
        Ok(response.logprobs)
    }
}

fn transport(err: ureq::Error) -> ModelError {
    ModelError::Transport(err.to_string())
}

impl BlockModel for RemoteModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_distribution(&self, ctx: &BlockContext, generated: &[String]) -> Result<Distribution, ModelError> {
        let mut target = generated.to_vec();
        target.push(String::new());
        let mut weights = Vec::with_capacity(self.vocab.len());
        for token in self.vocab.tokens() {
            *target.last_mut().expect("non-empty") = token.clone();
            let values = self.score_text(ctx, &target)?;
            weights.push(libm::exp(*values.last().expect("length checked")));
        }
        Distribution::from_weights(&weights)
    }

    fn score_target(&self, ctx: &BlockContext, target: &[String]) -> Result<LogProbSeries, ModelError> {
        if target.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        LogProbSeries::new(self.score_text(ctx, target)?)
    }

    fn fill_block(&self, ctx: &BlockContext, params: &SamplingParams) -> Result<BlockFill, ModelError> {
        params.validate()?;
        let request = GenerateRequest {
            prefix: ctx.prefix_text(),
            suffix: ctx.suffix_text(),
            max_tokens: params.max_block_tokens,
            temperature: params.temperature,
            top_k: params.top_k,
            seed: params.seed,
        };
        let mut backoff = self.config.initial_backoff;
        let mut attempt = 0;
        let response: GenerateResponse = loop {
            match self.post("/v1/generate", &request) {
                Ok(r) => break r,
                Err(ModelError::Transport(_)) if attempt < self.config.generate_retries => {
                    attempt += 1;
                    thread::sleep(backoff);
                    backoff *= 2;
                }
                Err(e) => return Err(e),
            }
        };
        let tokens = tokenize(&response.tokens);
        if tokens.len() > params.max_block_tokens || tokens.len() != response.logprobs.len() {
            return Err(ModelError::Protocol(format!(
                "generated {} tokens with {} log-probabilities (limit {})",
                tokens.len(),
                response.logprobs.len(),
                params.max_block_tokens
            )));
        }
        Ok(BlockFill { tokens, logprobs: LogProbSeries::new(response.logprobs)? })
    }
}
