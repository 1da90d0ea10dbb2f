//! Masked-span scores recomputed from hand-rendered default prompts.

use bipro::model::{tokenize, BlockContext, BlockModel};
use bipro::scorer::Phase;

/// Separators after odd and even sentences.
pub type Seps = [&'static str; 2];

pub const PUNCTUATION: Seps = ["，", "。"];

fn sep(seps: Seps, k: usize) -> &'static str {
    seps[1 - k % 2]
}

fn body(seps: Seps, sentences: &[String], range: std::ops::Range<usize>) -> String {
    range.map(|i| format!("{}{}", sentences[i], sep(seps, i + 1))).collect()
}

fn mean_logprob(model: &dyn BlockModel, prefix: &str, target: &str, suffix: &str) -> f64 {
    let ctx = BlockContext::from_text(prefix, suffix).unwrap();
    let values = model.score_target(&ctx, &tokenize(target)).unwrap();
    values.values().iter().sum::<f64>() / values.len() as f64
}

pub fn title_part(model: &dyn BlockModel, seps: Seps, title: &str, sentences: &[String]) -> f64 {
    let suffix = format!("》{}", body(seps, sentences, 0..sentences.len()));
    mean_logprob(model, "《", title, &suffix)
}

/// Score of the hidden sentence `k` (1-based).
pub fn sentence_part(model: &dyn BlockModel, seps: Seps, title: &str, sentences: &[String], k: usize) -> f64 {
    let prefix = format!("《{title}》{}", body(seps, sentences, 0..k - 1));
    let suffix = format!("{}{}", sep(seps, k), body(seps, sentences, k..sentences.len()));
    mean_logprob(model, &prefix, &sentences[k - 1], &suffix)
}

pub fn partner(k: usize, phase: Phase, n: usize) -> Option<usize> {
    let m = match phase {
        Phase::Generation => k as isize - 1,
        Phase::Revise => k as isize + 1,
        Phase::Rewrite if k % 2 == 1 => k as isize + 1,
        Phase::Rewrite => k as isize - 1,
    };
    (m >= 1 && m as usize <= n).then_some(m as usize)
}

pub struct Scorer<'a> {
    pub model: &'a dyn BlockModel,
    pub seps: Seps,
    pub title: &'a str,
    pub alpha: f64,
}

impl Scorer<'_> {
    pub fn score(&self, sentences: &[String], k: usize, phase: Phase) -> f64 {
        score(self.model, self.seps, self.title, sentences, k, phase, self.alpha)
    }
}

pub fn score(
    model: &dyn BlockModel,
    seps: Seps,
    title: &str,
    sentences: &[String],
    k: usize,
    phase: Phase,
    alpha: f64,
) -> f64 {
    let t = title_part(model, seps, title, sentences);
    match partner(k, phase, sentences.len()) {
        Some(m) => alpha * t + (1.0 - alpha) * sentence_part(model, seps, title, sentences, m),
        None => t,
    }
}
