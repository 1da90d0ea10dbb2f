//! Block generative model interface.
//!
//! A block model fills a masked span given the text before and after it. The
//! crate needs three things from such a model: the distribution of the next
//! token inside the block, an autoregressive block fill, and per-token
//! log-probabilities of a given target placed in the block.

mod mock;
mod remote;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{mock_weight, MockModel, WeightSide};
pub use remote::{
    GenerateRequest, GenerateResponse, RemoteConfig, RemoteModel, ScoreRequest, ScoreResponse, MODEL_URL_ENV,
};

/// Literal marking the masked block inside rendered prompts. It may never
/// appear in the visible context itself.
pub const MASK_SENTINEL: &str = "[MASK]";

/// Tolerance on the total mass of a next-token distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid block context: {0}")]
    Context(String),
    #[error("token {token:?} is not in the model vocabulary")]
    UnknownToken { token: String },
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("empty token in vocabulary")]
    EmptyToken,
    #[error("empty scoring target")]
    EmptyTarget,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Index of a token in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered, deduplicated set of token strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary, keeping the first occurrence of duplicates.
    pub fn new<I, S>(tokens: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list = Vec::new();
        let mut index = HashMap::new();
        for token in tokens {
            let token = token.into();
            if token.is_empty() {
                return Err(ModelError::EmptyToken);
            }
            if index.contains_key(&token) {
                continue;
            }
            index.insert(token.clone(), TokenId(list.len() as u32));
            list.push(token);
        }
        if list.is_empty() {
            return Err(ModelError::EmptyVocabulary);
        }
        Ok(Self { tokens: list, index })
    }

    /// One token per distinct character, in sorted character order.
    pub fn from_chars<I: IntoIterator<Item = char>>(chars: I) -> Result<Self, ModelError> {
        let mut chars: Vec<char> = chars.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        Self::new(chars.into_iter().map(String::from))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn text(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as u32).map(TokenId)
    }
}

/// Character-level tokenization: one character per token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.chars().map(String::from).collect()
}

/// Visible text around a masked block. The block sits right after `prefix`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockContext {
    prefix: Vec<String>,
    suffix: Vec<String>,
}

impl BlockContext {
    pub fn new(prefix: Vec<String>, suffix: Vec<String>) -> Result<Self, ModelError> {
        let ctx = Self { prefix, suffix };
        if ctx.prefix_text().contains(MASK_SENTINEL) || ctx.suffix_text().contains(MASK_SENTINEL) {
            return Err(ModelError::Context(format!("context text contains the mask sentinel {MASK_SENTINEL}")));
        }
        Ok(ctx)
    }

    /// Tokenizes both sides character by character.
    pub fn from_text(prefix: &str, suffix: &str) -> Result<Self, ModelError> {
        Self::new(tokenize(prefix), tokenize(suffix))
    }

    pub fn empty() -> Self {
        Self { prefix: Vec::new(), suffix: Vec::new() }
    }

    pub fn prefix(&self) -> &[String] {
        &self.prefix
    }

    pub fn suffix(&self) -> &[String] {
        &self.suffix
    }

    pub fn block_position(&self) -> usize {
        self.prefix.len()
    }

    pub fn prefix_text(&self) -> String {
        self.prefix.concat()
    }

    pub fn suffix_text(&self) -> String {
        self.suffix.concat()
    }
}

/// Sampling controls for block filling. `top_k = None` means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub seed: u64,
    pub max_block_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { temperature: 1.0, top_k: None, seed: 0, max_block_tokens: 7 }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::InvalidParams(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.top_k == Some(0) {
            return Err(ModelError::InvalidParams("top_k must be at least 1".into()));
        }
        if self.max_block_tokens == 0 {
            return Err(ModelError::InvalidParams("max_block_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-token natural-log probabilities of a target span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProbSeries(Vec<f64>);

impl LogProbSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v > 0.0) {
            return Err(ModelError::Protocol(format!("log-probability {bad} is not <= 0")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.sum() / self.0.len() as f64)
        }
    }
}

/// Next-token distribution over a model's vocabulary, indexed by [`TokenId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(ModelError::Protocol("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(ModelError::Protocol(format!("distribution sums to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self, ModelError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(ModelError::Protocol("weights carry no mass".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs[id.index()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Sampling weights after temperature scaling and top-k truncation.
    /// The result is unnormalized; ties at the top-k boundary keep lower ids.
    pub fn sampling_weights(&self, temperature: f64, top_k: Option<usize>) -> Vec<f64> {
        let mut weights: Vec<f64> = if temperature == 1.0 {
            self.probs.clone()
        } else {
            self.probs.iter().map(|&p| if p > 0.0 { libm::pow(p, 1.0 / temperature) } else { 0.0 }).collect()
        };
        if let Some(k) = top_k {
            if k < weights.len() {
                let mut order: Vec<usize> = (0..weights.len()).collect();
                order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
                for &dropped in &order[k..] {
                    weights[dropped] = 0.0;
                }
            }
        }
        weights
    }
}

/// Draws an index proportionally to `weights`. Returns `None` when no
/// weight is positive.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let threshold = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last_positive = Some(i);
        if threshold < cumulative {
            return Some(i);
        }
    }
    last_positive
}

/// Tokens produced by a block fill with their model log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFill {
    pub tokens: Vec<String>,
    pub logprobs: LogProbSeries,
}

impl BlockFill {
    pub fn text(&self) -> String {
        self.tokens.concat()
    }
}

/// A block generative model.
///
/// Implementations must be usable from several threads at once; all three
/// operations are read-only.
pub trait BlockModel: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Distribution of the token following `generated` inside the block.
    fn next_token_distribution(&self, ctx: &BlockContext, generated: &[String]) -> Result<Distribution, ModelError>;

    /// `values[i]` is the log-probability of `target[i]` given the context and
    /// `target[..i]`.
    fn score_target(&self, ctx: &BlockContext, target: &[String]) -> Result<LogProbSeries, ModelError>;

    /// Autoregressive block fill. The recorded log-probabilities are those of
    /// the model distribution, before temperature or top-k adjustment, so that
    /// a replay through [`BlockModel::next_token_distribution`] reproduces them.
    fn fill_block(&self, ctx: &BlockContext, params: &SamplingParams) -> Result<BlockFill, ModelError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut tokens = Vec::with_capacity(params.max_block_tokens);
        let mut logprobs = Vec::with_capacity(params.max_block_tokens);
        for _ in 0..params.max_block_tokens {
            let dist = self.next_token_distribution(ctx, &tokens)?;
            let weights = dist.sampling_weights(params.temperature, params.top_k);
            let Some(idx) = sample_index(&weights, &mut rng) else {
                break;
            };
            let id = TokenId(idx as u32);
            tokens.push(self.vocabulary().text(id).to_string());
            logprobs.push(libm::log(dist.prob(id)));
        }
        Ok(BlockFill { tokens, logprobs: LogProbSeries::new(logprobs)? })
    }
}
