//! Masked-target prompts and the BIPro score.
//!
//! A score masks one part of the poem (the title or a sentence), asks the
//! block model for the log-probability of the hidden text given everything
//! else, and averages over the target tokens. Higher is better.
//!
//! Templates use three placeholders. `{sentences}` expands to the poem body,
//! each sentence followed by its separator; `{title}` to the title; `{mask}`
//! marks the hidden title in the title-scoring template. When a sentence is
//! hidden, the mask falls inside the `{sentences}` expansion at that
//! sentence's slot.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{tokenize, BlockContext, BlockModel, LogProbSeries, ModelError, MASK_SENTINEL};

pub const TITLE_PLACEHOLDER: &str = "{title}";
pub const SENTENCES_PLACEHOLDER: &str = "{sentences}";
pub const MASK_PLACEHOLDER: &str = "{mask}";

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("sentence {index} does not exist (poem has {count})")]
    Index { index: usize, count: usize },
    #[error("masked content is empty")]
    EmptyTarget,
    #[error("invalid template {name}: {message}")]
    Template { name: &'static str, message: String },
    #[error("cannot read templates: {0}")]
    Config(String),
    #[error("alpha_title must lie in [0, 1], got {0}")]
    Weight(f64),
    #[error("perplexity of an empty series is undefined")]
    EmptySeries,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Title,
    Sentences,
    Mask,
}

fn parse_template(template: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut rest = template;
    while !rest.is_empty() {
        let hit = [
            (TITLE_PLACEHOLDER, Segment::Title),
            (SENTENCES_PLACEHOLDER, Segment::Sentences),
            (MASK_PLACEHOLDER, Segment::Mask),
        ]
        .into_iter()
        .find(|(p, _)| rest.starts_with(p));
        match hit {
            Some((p, seg)) => {
                if !text.is_empty() {
                    out.push(Segment::Text(std::mem::take(&mut text)));
                }
                out.push(seg);
                rest = &rest[p.len()..];
            }
            None => {
                let c = rest.chars().next().expect("non-empty");
                text.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    if !text.is_empty() {
        out.push(Segment::Text(text));
    }
    out
}

/// The three prompt templates and the body separators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplates {
    /// Context for generating a sentence: needs `{sentences}`, may use `{title}`.
    pub generation_template: String,
    /// Context for scoring the title: needs `{mask}`, may use `{sentences}`.
    pub title_score_template: String,
    /// Context for scoring a match sentence: needs `{sentences}`, may use `{title}`.
    pub sentence_score_template: String,
    /// Appended after sentences 1, 3, 5, ...
    pub odd_separator: String,
    /// Appended after sentences 2, 4, 6, ...
    pub even_separator: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            generation_template: "《{title}》{sentences}".into(),
            title_score_template: "《{mask}》{sentences}".into(),
            sentence_score_template: "《{title}》{sentences}".into(),
            odd_separator: "，".into(),
            even_separator: "。".into(),
        }
    }
}

/// What is hidden behind the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSlot {
    Title,
    /// 1-based sentence index.
    Sentence(usize),
}

impl PromptTemplates {
    /// Parses TOML with any of the template keys; missing keys keep defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, ScoreError> {
        let templates: Self = toml::from_str(text).map_err(|e| ScoreError::Config(e.to_string()))?;
        templates.validate()?;
        Ok(templates)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let count = |t: &str, seg: Segment| parse_template(t).into_iter().filter(|s| *s == seg).count();
        let check = |name: &'static str,
                     t: &str,
                     title: (usize, usize),
                     sentences: (usize, usize),
                     mask: (usize, usize)| {
            for (label, seg, (lo, hi)) in [
                (TITLE_PLACEHOLDER, Segment::Title, title),
                (SENTENCES_PLACEHOLDER, Segment::Sentences, sentences),
                (MASK_PLACEHOLDER, Segment::Mask, mask),
            ] {
                let n = count(t, seg);
                if n < lo || n > hi {
                    let expected = match (lo, hi) {
                        (0, 0) => "not allowed".to_string(),
                        (1, 1) => "required exactly once".to_string(),
                        _ => format!("allowed at most {hi} time(s)"),
                    };
                    return Err(ScoreError::Template { name, message: format!("{label} is {expected}, found {n}") });
                }
            }
            if t.contains(MASK_SENTINEL) {
                return Err(ScoreError::Template {
                    name,
                    message: format!("contains the reserved text {MASK_SENTINEL}"),
                });
            }
            Ok(())
        };
        check("generation_template", &self.generation_template, (0, 1), (1, 1), (0, 0))?;
        check("title_score_template", &self.title_score_template, (0, 0), (0, 1), (1, 1))?;
        check("sentence_score_template", &self.sentence_score_template, (0, 1), (1, 1), (0, 0))?;
        for (name, sep) in [("odd_separator", &self.odd_separator), ("even_separator", &self.even_separator)] {
            if sep.contains(MASK_SENTINEL) {
                return Err(ScoreError::Template {
                    name,
                    message: format!("contains the reserved text {MASK_SENTINEL}"),
                });
            }
        }
        Ok(())
    }

    fn separator(&self, index: usize) -> &str {
        if index % 2 == 1 {
            &self.odd_separator
        } else {
            &self.even_separator
        }
    }

    /// Renders `template`; the hidden part is returned separately as the
    /// text between prefix and suffix.
    fn render(
        &self,
        template: &str,
        title: &str,
        sentences: &[&str],
        hidden: Option<MaskSlot>,
    ) -> (String, Option<String>, String) {
        let mut before = String::new();
        let mut target: Option<String> = None;
        let mut after = String::new();
        let mut push = |text: &str, target: &Option<String>| {
            if target.is_none() {
                before.push_str(text)
            } else {
                after.push_str(text)
            }
        };
        for seg in parse_template(template) {
            match seg {
                Segment::Text(t) => push(&t, &target),
                Segment::Title => push(title, &target),
                Segment::Mask => target = Some(title.to_string()),
                Segment::Sentences => {
                    for (i, s) in sentences.iter().enumerate() {
                        let k = i + 1;
                        if hidden == Some(MaskSlot::Sentence(k)) {
                            target = Some(s.to_string());
                        } else {
                            push(s, &target);
                        }
                        push(self.separator(k), &target);
                    }
                }
            }
        }
        (before, target, after)
    }

    fn template_for(&self, slot: MaskSlot) -> &str {
        match slot {
            MaskSlot::Title => &self.title_score_template,
            MaskSlot::Sentence(_) => &self.sentence_score_template,
        }
    }

    /// The scoring template for `slot` with nothing hidden.
    pub fn render_filled(&self, title: &str, sentences: &[String], slot: MaskSlot) -> String {
        let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
        let (before, target, after) = self.render(self.template_for(slot), title, &refs, Some(slot));
        format!("{before}{}{after}", target.unwrap_or_default())
    }

    /// Context for generating sentence `index` (1-based). Sentences other than
    /// `index` stay visible; `index` may be one past the last sentence.
    pub fn generation_context(
        &self,
        title: &str,
        sentences: &[String],
        index: usize,
    ) -> Result<BlockContext, ScoreError> {
        if index == 0 || index > sentences.len() + 1 {
            return Err(ScoreError::Index { index, count: sentences.len() });
        }
        let mut refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
        if index > refs.len() {
            refs.push("");
        }
        let (before, _, after) = self.render(&self.generation_template, title, &refs, Some(MaskSlot::Sentence(index)));
        Ok(BlockContext::from_text(&before, &after)?)
    }
}

/// Hides `slot` and returns the visible context and the hidden tokens.
pub fn make_bipro_prompt(
    title: &str,
    sentences: &[String],
    slot: MaskSlot,
    templates: &PromptTemplates,
) -> Result<(BlockContext, Vec<String>), ScoreError> {
    if let MaskSlot::Sentence(k) = slot {
        if k == 0 || k > sentences.len() {
            return Err(ScoreError::Index { index: k, count: sentences.len() });
        }
    }
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    let (before, target, after) = templates.render(templates.template_for(slot), title, &refs, Some(slot));
    let target = target.unwrap_or_default();
    if target.is_empty() {
        return Err(ScoreError::EmptyTarget);
    }
    Ok((BlockContext::from_text(&before, &after)?, tokenize(&target)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Generation,
    Revise,
    Rewrite,
}

/// Partner sentence used for scoring sentence `index` (1-based).
pub fn match_sentence(index: usize, phase: Phase, count: usize) -> Option<usize> {
    debug_assert!((1..=count).contains(&index));
    match phase {
        Phase::Generation => index.checked_sub(1).filter(|&m| m >= 1),
        Phase::Revise => Some(index + 1).filter(|&m| m <= count),
        Phase::Rewrite => {
            if index % 2 == 1 {
                Some(index + 1).filter(|&m| m <= count)
            } else {
                Some(index - 1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    alpha_title: f64,
}

impl ScoreWeights {
    pub fn new(alpha_title: f64) -> Result<Self, ScoreError> {
        if !(0.0..=1.0).contains(&alpha_title) {
            return Err(ScoreError::Weight(alpha_title));
        }
        Ok(Self { alpha_title })
    }

    pub fn alpha_title(&self) -> f64 {
        self.alpha_title
    }

    pub fn alpha_match(&self) -> f64 {
        1.0 - self.alpha_title
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { alpha_title: 0.5 }
    }
}

/// Mean log-probability of a masked target; higher is better.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiproScore(pub f64);

impl BiproScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for BiproScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Mean log-probability of the hidden `slot`.
pub fn masked_mean_logprob(
    model: &dyn BlockModel,
    title: &str,
    sentences: &[String],
    slot: MaskSlot,
    templates: &PromptTemplates,
) -> Result<f64, ScoreError> {
    let (ctx, target) = make_bipro_prompt(title, sentences, slot, templates)?;
    let series = model.score_target(&ctx, &target)?;
    series.mean().ok_or(ScoreError::EmptyTarget)
}

/// Weighted title and match-sentence score of sentence `scored` (1-based).
pub fn bipro_score(
    model: &dyn BlockModel,
    title: &str,
    sentences: &[String],
    scored: usize,
    phase: Phase,
    weights: ScoreWeights,
    templates: &PromptTemplates,
) -> Result<BiproScore, ScoreError> {
    if scored == 0 || scored > sentences.len() {
        return Err(ScoreError::Index { index: scored, count: sentences.len() });
    }
    let title_part = masked_mean_logprob(model, title, sentences, MaskSlot::Title, templates)?;
    let Some(partner) = match_sentence(scored, phase, sentences.len()) else {
        return Ok(BiproScore(title_part));
    };
    let match_part = masked_mean_logprob(model, title, sentences, MaskSlot::Sentence(partner), templates)?;
    Ok(BiproScore(weights.alpha_title() * title_part + weights.alpha_match() * match_part))
}

/// `exp(-mean)` of the series.
pub fn perplexity(series: &LogProbSeries) -> Result<f64, ScoreError> {
    series.mean().map(|m| libm::exp(-m)).ok_or(ScoreError::EmptySeries)
}
