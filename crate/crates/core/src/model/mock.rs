//! Deterministic mock block model.
//!
//! The bigram mock scores candidate token `c` as
//!
//! ```text
//! weight(c) = w(L, prev, c) * w(R, c, next)
//! w(side, a, b) = 1 + (first 8 bytes of SHA-256(seed_le ‖ side ‖ a ‖ 0x1F ‖ b), little endian) >> 54
//! ```
//!
//! where `prev` is the nearest in-vocabulary token before the next position
//! (scanning the generated tokens, then the context prefix, backwards) and
//! `next` is the first in-vocabulary token of the context suffix. A missing
//! neighbour contributes a factor of 1, and out-of-vocabulary context tokens
//! (template boilerplate, punctuation) are skipped. Probabilities are the
//! weights divided by their sum. Weights are integers in `[1, 1024]`, so the
//! normalization is exact up to one rounding per probability.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use super::{BlockContext, BlockModel, Distribution, LogProbSeries, ModelError, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightSide {
    /// Factor linking the previous token to the candidate.
    Left,
    /// Factor linking the candidate to the token after the block.
    Right,
}

impl WeightSide {
    fn tag(self) -> u8 {
        match self {
            WeightSide::Left => b'L',
            WeightSide::Right => b'R',
        }
    }
}

/// The mock's pairwise weight `w(side, a, b)`.
pub fn mock_weight(seed: u64, side: WeightSide, a: &str, b: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([side.tag()]);
    hasher.update(a.as_bytes());
    hasher.update([0x1F]);
    hasher.update(b.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    1 + (u64::from_le_bytes(head) >> 54)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Uniform,
    Bigram { seed: u64 },
}

type RowCache = Mutex<HashMap<(WeightSide, TokenId), Arc<Vec<u64>>>>;

/// Stateless-after-construction mock; the weight-row cache is a pure
/// memoization and never changes results.
#[derive(Debug)]
pub struct MockModel {
    vocab: Vocabulary,
    kind: Kind,
    rows: RowCache,
}

impl MockModel {
    /// Untrained mock: every next-token distribution is uniform.
    pub fn uniform(vocab: Vocabulary) -> Self {
        Self { vocab, kind: Kind::Uniform, rows: Mutex::new(HashMap::new()) }
    }

    /// Seeded bigram mock.
    pub fn bigram(vocab: Vocabulary, seed: u64) -> Self {
        Self { vocab, kind: Kind::Bigram { seed }, rows: Mutex::new(HashMap::new()) }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.kind {
            Kind::Uniform => None,
            Kind::Bigram { seed } => Some(seed),
        }
    }

    /// Row of `w(side, anchor, c)` (left) or `w(side, c, anchor)` (right)
    /// over every candidate `c` in vocabulary order.
    fn row(&self, seed: u64, side: WeightSide, anchor: TokenId) -> Arc<Vec<u64>> {
        if let Some(row) = self.rows.lock().expect("weight cache poisoned").get(&(side, anchor)) {
            return Arc::clone(row);
        }
        let anchor_text = self.vocab.text(anchor);
        let row: Vec<u64> = self
            .vocab
            .tokens()
            .iter()
            .map(|c| match side {
                WeightSide::Left => mock_weight(seed, side, anchor_text, c),
                WeightSide::Right => mock_weight(seed, side, c, anchor_text),
            })
            .collect();
        let row = Arc::new(row);
        self.rows.lock().expect("weight cache poisoned").insert((side, anchor), Arc::clone(&row));
        row
    }

    fn neighbours(&self, ctx: &BlockContext, generated: &[String]) -> (Option<TokenId>, Option<TokenId>) {
        let prev = generated.iter().rev().chain(ctx.prefix().iter().rev()).find_map(|t| self.vocab.id(t));
        let next = ctx.suffix().iter().find_map(|t| self.vocab.id(t));
        (prev, next)
    }

    /// Integer weights for every candidate.
    fn weights(&self, ctx: &BlockContext, generated: &[String]) -> Vec<u64> {
        let n = self.vocab.len();
        let Kind::Bigram { seed } = self.kind else {
            return vec![1; n];
        };
        let (prev, next) = self.neighbours(ctx, generated);
        let left = prev.map(|p| self.row(seed, WeightSide::Left, p));
        let right = next.map(|q| self.row(seed, WeightSide::Right, q));
        (0..n).map(|i| left.as_ref().map_or(1, |row| row[i]) * right.as_ref().map_or(1, |row| row[i])).collect()
    }
}

impl BlockModel for MockModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_distribution(&self, ctx: &BlockContext, generated: &[String]) -> Result<Distribution, ModelError> {
        let weights = self.weights(ctx, generated);
        let total: u64 = weights.iter().sum();
        let total = total as f64;
        Distribution::new(weights.iter().map(|&w| w as f64 / total).collect())
    }

    fn score_target(&self, ctx: &BlockContext, target: &[String]) -> Result<LogProbSeries, ModelError> {
        if target.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        let mut values = Vec::with_capacity(target.len());
        for i in 0..target.len() {
            let id = self.vocab.id(&target[i]).ok_or_else(|| ModelError::UnknownToken { token: target[i].clone() })?;
            let dist = self.next_token_distribution(ctx, &target[..i])?;
            values.push(libm::log(dist.prob(id)));
        }
        LogProbSeries::new(values)
    }
}
