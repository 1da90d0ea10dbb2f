//! Sentence-by-sentence poem generation with revise and rewrite passes.
//!
//! Sentence `k` is generated first. Sentence `k-1` is then regenerated with
//! `k` visible and replaced only if the poem scores strictly higher. Once all
//! sentences exist, rewrite rounds regenerate every sentence in order under
//! the same acceptance rule, until a round changes nothing or the round
//! limit is reached.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{generate_constrained_sentence, BeamConfig, BeamError, Selection, SentenceResult, StepEvent};
use crate::model::BlockModel;
use crate::pingshui::{Poem, PoemFormat, Verifier, VerifyError, Violation};
use crate::scorer::{bipro_score, BiproScore, Phase, PromptTemplates, ScoreError, ScoreWeights};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub format: PoemFormat,
    /// Maximum number of rewrite rounds.
    pub max_rewrites: usize,
    pub beam: BeamConfig,
    pub weights: ScoreWeights,
    pub templates: PromptTemplates,
    pub seed: u64,
    /// Take the first finished beam for each sentence and skip revise and
    /// rewrite.
    pub direct: bool,
}

impl GenerationConfig {
    pub fn new(format: PoemFormat, seed: u64) -> Self {
        Self {
            format,
            max_rewrites: 20,
            beam: BeamConfig::default(),
            weights: ScoreWeights::default(),
            templates: PromptTemplates::default(),
            seed,
            direct: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Generated,
    Revised,
    Rewritten,
    /// A revise or rewrite candidate that was not accepted.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub sentence_index: usize,
    pub old_text: Option<String>,
    pub new_text: Option<String>,
    pub old_score: Option<f64>,
    pub new_score: Option<f64>,
    /// 0 during generation and revise, 1-based during rewrite rounds.
    pub round: usize,
}

impl TraceEvent {
    /// Scoring phase under which the event's scores were computed.
    pub fn phase(&self) -> Phase {
        match (self.kind, self.round) {
            (EventKind::Generated, _) => Phase::Generation,
            (_, 0) => Phase::Revise,
            _ => Phase::Rewrite,
        }
    }
}

/// A beam step event tagged with the beam call it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamStepRecord {
    pub sentence_index: usize,
    pub phase: Phase,
    pub round: usize,
    #[serde(flatten)]
    pub event: StepEvent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub events: Vec<TraceEvent>,
    /// Filled when the beam configuration records steps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beam_steps: Vec<BeamStepRecord>,
}

impl GenerationTrace {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, GenerateError> {
        let mut events = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| GenerateError::Trace(format!("line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(|e| GenerateError::Trace(format!("line {}: {e}", i + 1)))?);
        }
        Ok(Self { events, beam_steps: Vec::new() })
    }

    pub fn write_beam_steps_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.beam_steps {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuilds the poem from the accepted events.
    pub fn replay(&self, title: &str, format: PoemFormat) -> Result<Poem, GenerateError> {
        let mut sentences: Vec<String> = Vec::new();
        for e in &self.events {
            let text = || {
                e.new_text.clone().ok_or_else(|| GenerateError::Trace(format!("{:?} event without new_text", e.kind)))
            };
            match e.kind {
                EventKind::Generated => {
                    if e.sentence_index != sentences.len() + 1 {
                        return Err(GenerateError::Trace(format!(
                            "sentence {} generated out of order",
                            e.sentence_index
                        )));
                    }
                    sentences.push(text()?);
                }
                EventKind::Revised | EventKind::Rewritten => {
                    let slot =
                        e.sentence_index.checked_sub(1).and_then(|i| sentences.get_mut(i)).ok_or_else(|| {
                            GenerateError::Trace(format!("no sentence {} to replace", e.sentence_index))
                        })?;
                    *slot = text()?;
                }
                EventKind::Rejected => {}
            }
        }
        Ok(Poem::new(title, Some(format), sentences))
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("title is empty")]
    EmptyTitle,
    #[error("{source}")]
    Beam { source: BeamError, trace: GenerationTrace },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("generated poem fails verification: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("bad trace: {0}")]
    Trace(String),
}

impl GenerateError {
    pub fn is_exhaustion(&self) -> bool {
        matches!(self, GenerateError::Beam { source: BeamError::Exhausted { .. }, .. })
    }
}

const PHASE_GENERATE: u64 = 1;
const PHASE_REVISE: u64 = 2;
const PHASE_REWRITE: u64 = 3;

struct Run<'a> {
    model: &'a dyn BlockModel,
    verifier: &'a Verifier,
    title: &'a str,
    config: &'a GenerationConfig,
    poem: Poem,
    trace: GenerationTrace,
}

impl Run<'_> {
    fn score(&self, sentences: &[String], index: usize, phase: Phase) -> Result<BiproScore, ScoreError> {
        bipro_score(self.model, self.title, sentences, index, phase, self.config.weights, &self.config.templates)
    }

    /// Beam-generates sentence `index` with the others in `self.poem` fixed.
    fn candidate(&self, index: usize, phase: Phase, seed_parts: [u64; 3]) -> Result<SentenceResult, BeamError> {
        let ctx = self.config.templates.generation_context(self.title, &self.poem.sentences, index)?;
        let mut beam = self.config.beam;
        beam.seed = derive_seed(&[self.config.seed, seed_parts[0], seed_parts[1], seed_parts[2]]);
        let with = |c: &str| {
            let mut s = self.poem.sentences.clone();
            if index > s.len() {
                s.push(c.to_string());
            } else {
                s[index - 1] = c.to_string();
            }
            s
        };
        let score_fn = |c: &str| self.score(&with(c), index, phase);
        let selection = if self.config.direct { Selection::FirstComplete } else { Selection::Scored(&score_fn) };
        generate_constrained_sentence(self.model, &ctx, index, &self.poem, self.verifier, selection, &beam)
    }

    fn keep_steps(&mut self, index: usize, phase: Phase, round: usize, steps: &mut Vec<StepEvent>) {
        self.trace.beam_steps.extend(steps.drain(..).map(|event| BeamStepRecord {
            sentence_index: index,
            phase,
            round,
            event,
        }));
    }

    fn fail(&self, source: BeamError) -> GenerateError {
        GenerateError::Beam { source, trace: self.trace.clone() }
    }

    /// Regenerates sentence `index`; returns whether it was replaced.
    fn improve(&mut self, index: usize, phase: Phase, round: usize) -> Result<bool, GenerateError> {
        let code = if phase == Phase::Revise { PHASE_REVISE } else { PHASE_REWRITE };
        let old_text = self.poem.sentences[index - 1].clone();
        let old = self.score(&self.poem.sentences, index, phase)?;
        let (accepted, event) = match self.candidate(index, phase, [code, index as u64, round as u64]) {
            Ok(mut result) => {
                self.keep_steps(index, phase, round, &mut result.steps);
                let new = result.score.expect("scored selection");
                let accepted = new.value() > old.value();
                let kind = match (accepted, phase) {
                    (false, _) => EventKind::Rejected,
                    (true, Phase::Revise) => EventKind::Revised,
                    (true, _) => EventKind::Rewritten,
                };
                if accepted {
                    self.poem.sentences[index - 1] = result.sentence.clone();
                }
                (
                    accepted,
                    TraceEvent {
                        kind,
                        sentence_index: index,
                        old_text: Some(old_text),
                        new_text: Some(result.sentence),
                        old_score: Some(old.value()),
                        new_score: Some(new.value()),
                        round,
                    },
                )
            }
            Err(BeamError::Exhausted { .. }) => (
                false,
                TraceEvent {
                    kind: EventKind::Rejected,
                    sentence_index: index,
                    old_text: Some(old_text),
                    new_text: None,
                    old_score: Some(old.value()),
                    new_score: None,
                    round,
                },
            ),
            Err(e) => return Err(self.fail(e)),
        };
        self.trace.events.push(event);
        Ok(accepted)
    }
}

/// Generates a poem for `title`.
pub fn generate_poem(
    model: &dyn BlockModel,
    verifier: &Verifier,
    title: &str,
    config: &GenerationConfig,
) -> Result<(Poem, GenerationTrace), GenerateError> {
    if title.trim().is_empty() {
        return Err(GenerateError::EmptyTitle);
    }
    config.templates.validate()?;
    let n = config.format.sentence_count();
    let mut run = Run {
        model,
        verifier,
        title,
        config,
        poem: Poem::new(title, Some(config.format), Vec::new()),
        trace: GenerationTrace::default(),
    };
    for k in 1..=n {
        let mut result = run.candidate(k, Phase::Generation, [PHASE_GENERATE, k as u64, 0]).map_err(|e| run.fail(e))?;
        run.keep_steps(k, Phase::Generation, 0, &mut result.steps);
        run.poem.sentences.push(result.sentence.clone());
        run.trace.events.push(TraceEvent {
            kind: EventKind::Generated,
            sentence_index: k,
            old_text: None,
            new_text: Some(result.sentence),
            old_score: None,
            new_score: result.score.map(BiproScore::value),
            round: 0,
        });
        if k > 1 && !config.direct {
            run.improve(k - 1, Phase::Revise, 0)?;
        }
    }
    if !config.direct {
        for round in 1..=config.max_rewrites {
            let mut changed = false;
            for i in 1..=n {
                changed |= run.improve(i, Phase::Rewrite, round)?;
            }
            if !changed {
                break;
            }
        }
    }
    let verdict = verifier.verify(&run.poem)?;
    if !verdict.is_valid() {
        return Err(GenerateError::Invalid(verdict.violations().to_vec()));
    }
    Ok((run.poem, run.trace))
}

/// Generates one poem per title on up to `jobs` threads. Title `i` uses the
/// seed derived from `(config.seed, i)`; results keep the input order.
pub fn generate_batch(
    model: &dyn BlockModel,
    verifier: &Verifier,
    titles: &[String],
    config: &GenerationConfig,
    jobs: usize,
) -> Vec<Result<(Poem, GenerationTrace), GenerateError>> {
    let work = || {
        titles
            .par_iter()
            .enumerate()
            .map(|(i, title)| {
                let mut cfg = config.clone();
                cfg.seed = derive_seed(&[config.seed, i as u64]);
                generate_poem(model, verifier, title, &cfg)
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostParams {
    /// Sentences in the poem.
    pub n: u64,
    /// Tokens per sentence generation.
    pub s: u64,
    /// Rewrite rounds.
    pub m: u64,
    /// Title (target) length.
    pub t: u64,
    /// Beam size.
    pub k: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    SingleSentence,
    WithRevise,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("{0} must be at least 1")]
    NonPositive(&'static str),
    #[error("token count overflows 64 bits")]
    Overflow,
}

/// Tokens spent by generation: `k(t+s)` for one sentence, `2nk(t+s)` for a
/// poem with revise, `nk(m+2)(t+s)` with rewrite rounds. Parameters a mode
/// does not use are ignored.
pub fn estimate_token_cost(p: &CostParams, mode: CostMode) -> Result<u64, CostError> {
    let used: &[(&'static str, u64)] = match mode {
        CostMode::SingleSentence => &[("k", p.k), ("t", p.t), ("s", p.s)],
        CostMode::WithRevise => &[("n", p.n), ("k", p.k), ("t", p.t), ("s", p.s)],
        CostMode::Full => &[("n", p.n), ("k", p.k), ("m", p.m), ("t", p.t), ("s", p.s)],
    };
    if let Some((name, _)) = used.iter().find(|(_, v)| *v == 0) {
        return Err(CostError::NonPositive(name));
    }
    let per_sentence = p.t.checked_add(p.s).and_then(|ts| ts.checked_mul(p.k)).ok_or(CostError::Overflow)?;
    let factor = match mode {
        CostMode::SingleSentence => Some(1),
        CostMode::WithRevise => p.n.checked_mul(2),
        CostMode::Full => p.m.checked_add(2).and_then(|m2| m2.checked_mul(p.n)),
    };
    factor.and_then(|f| f.checked_mul(per_sentence)).ok_or(CostError::Overflow)
}
