//! Beam generation of one sentence under the Pingshui rules.
//!
//! Each step extends every active beam by one sampled character and checks
//! the new prefix. Beams whose prefix can no longer be completed die. Every
//! dead slot is then refilled by branching again from a beam's pre-step
//! state with a character not yet tried from that state. Donor states whose
//! extension survived come first, highest log-probability first. When all
//! beams reach the sentence length they are scored and the best is kept.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{sample_index, BlockContext, BlockModel, Distribution, ModelError, TokenId};
use crate::pingshui::{verify_sentence_prefix, Feasibility, Poem, RhymeDictionary, Verifier, VerifyError, Violation};
use crate::scorer::{BiproScore, ScoreError};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Re-branching attempts allowed per step; `new` sets 8 per beam.
    pub max_replacements_per_step: usize,
    pub seed: u64,
    pub temperature: f64,
    pub top_k: Option<usize>,
    /// Collect a [`StepEvent`] for every extension.
    pub record_steps: bool,
}

impl BeamConfig {
    pub fn new(beam_size: usize, seed: u64) -> Self {
        Self {
            beam_size,
            max_replacements_per_step: beam_size.saturating_mul(8),
            seed,
            temperature: 1.0,
            top_k: None,
            record_steps: false,
        }
    }

    fn validate(&self) -> Result<(), BeamError> {
        if self.beam_size == 0 {
            return Err(BeamError::Config("beam_size must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(BeamError::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.top_k == Some(0) {
            return Err(BeamError::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self::new(6, 0)
    }
}

/// How the finished beams are ranked.
#[derive(Clone, Copy)]
pub enum Selection<'a> {
    /// Maximize the closure; ties go to the lowest beam index.
    Scored(&'a (dyn Fn(&str) -> Result<BiproScore, ScoreError> + Sync)),
    /// Take the lowest-index finished beam without scoring.
    FirstComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Active,
    Dead,
    Replaced,
}

/// One extension of one beam.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: usize,
    pub beam: usize,
    pub token: String,
    pub status: StepStatus,
    pub rule: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub sentence: String,
    /// `None` under [`Selection::FirstComplete`].
    pub score: Option<BiproScore>,
    /// Number of finished beams that were ranked.
    pub candidates_considered: usize,
    /// Dead slots successfully refilled, over all steps.
    pub replacements: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepEvent>,
}

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("all beams died at step {step} of sentence {sentence}{}", describe(.violations))]
    Exhausted { sentence: usize, step: usize, violations: Vec<Violation> },
    #[error("invalid beam configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

fn describe(violations: &[Violation]) -> String {
    let rules: BTreeSet<u8> = violations.iter().map(|v| v.rule).collect();
    if rules.is_empty() {
        String::new()
    } else {
        let list: Vec<String> = rules.iter().map(u8::to_string).collect();
        format!(" (rules {})", list.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Active,
    Complete,
    Dead,
}

#[derive(Debug, Clone)]
struct Beam {
    chars: Vec<char>,
    logprob: f64,
    status: Status,
}

/// A pre-step state shared by the beams branching from it.
struct Donor {
    chars: Vec<char>,
    logprob: f64,
    first_beam: usize,
    dist: Distribution,
    weights: Vec<f64>,
    tried: BTreeSet<usize>,
    survived: bool,
}

impl Donor {
    fn untried_weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        for &t in &self.tried {
            w[t] = 0.0;
        }
        w
    }

    fn exhausted(&self) -> bool {
        self.weights.iter().enumerate().all(|(i, &w)| w <= 0.0 || self.tried.contains(&i))
    }
}

struct Search<'a> {
    model: &'a dyn BlockModel,
    ctx: &'a BlockContext,
    poem: &'a Poem,
    index: usize,
    dict: RhymeDictionary,
    verifier: &'a Verifier,
    /// Vocabulary ids that are single dictionary characters.
    allowed: Vec<Option<char>>,
    config: BeamConfig,
}

impl Search<'_> {
    fn weights(&self, dist: &Distribution) -> Vec<f64> {
        let inv_t = 1.0 / self.config.temperature;
        let mut w: Vec<f64> = dist
            .probs()
            .iter()
            .zip(&self.allowed)
            .map(|(&p, a)| match a {
                Some(_) if p > 0.0 => {
                    if inv_t == 1.0 {
                        p
                    } else {
                        libm::pow(p, inv_t)
                    }
                }
                _ => 0.0,
            })
            .collect();
        if let Some(k) = self.config.top_k {
            let mut order: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            if k < order.len() {
                order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
                for &i in &order[k..] {
                    w[i] = 0.0;
                }
            }
        }
        w
    }

    fn token_text(&self, chars: &[char]) -> Vec<String> {
        chars.iter().map(|c| c.to_string()).collect()
    }

    fn check(&self, chars: &[char]) -> Result<Feasibility, BeamError> {
        Ok(verify_sentence_prefix(self.poem, self.index, chars, &self.dict, self.verifier.options())?)
    }

    fn rng(&self, beam: usize, step: usize, attempt: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(&[self.config.seed, beam as u64, step as u64, attempt as u64]))
    }
}

/// Result of extending the beams that share one pre-step state.
struct GroupOutcome {
    donor: Donor,
    /// (beam, sampled token, feasibility) per member, in beam order.
    members: Vec<(usize, Option<usize>, Option<Feasibility>)>,
}

/// Generates sentence `sentence_index` (1-based) of `poem_so_far`.
///
/// `ctx` is the block context with the mask at that sentence. Sentences of
/// `poem_so_far` other than `sentence_index` are held fixed; the poem must
/// declare its format.
pub fn generate_constrained_sentence(
    model: &dyn BlockModel,
    ctx: &BlockContext,
    sentence_index: usize,
    poem_so_far: &Poem,
    verifier: &Verifier,
    selection: Selection<'_>,
    config: &BeamConfig,
) -> Result<SentenceResult, BeamError> {
    config.validate()?;
    let format = poem_so_far.format.ok_or(VerifyError::MissingFormat)?;
    let length = format.sentence_length();
    let vocab = model.vocabulary();
    let base = verifier.dictionary();
    let allowed: Vec<Option<char>> = vocab
        .tokens()
        .iter()
        .map(|t| {
            let mut cs = t.chars();
            match (cs.next(), cs.next()) {
                (Some(c), None) if base.contains(c) => Some(c),
                _ => None,
            }
        })
        .collect();
    let usable: BTreeSet<char> = allowed.iter().flatten().copied().collect();
    let fixed: BTreeSet<char> = poem_so_far
        .sentences
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 != sentence_index)
        .flat_map(|(_, s)| s.chars())
        .collect();
    let dict = base.filtered(|c| usable.contains(&c) || fixed.contains(&c));
    let search =
        Search { model, ctx, poem: poem_so_far, index: sentence_index, dict, verifier, allowed, config: *config };

    let k = config.beam_size;
    let mut beams = vec![Beam { chars: Vec::new(), logprob: 0.0, status: Status::Active }; k];
    let mut events = Vec::new();
    let mut replacements = 0;

    for step in 0..length {
        // Group active beams by state; states are distinct except at step 0.
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut seen: Vec<(Vec<char>, usize)> = Vec::new();
        for (i, b) in beams.iter().enumerate().filter(|(_, b)| b.status == Status::Active) {
            let leader = match seen.iter().find(|(c, _)| *c == b.chars) {
                Some((_, l)) => *l,
                None => {
                    seen.push((b.chars.clone(), i));
                    i
                }
            };
            groups.entry(leader).or_default().push(i);
        }
        if groups.is_empty() {
            return Err(BeamError::Exhausted { sentence: sentence_index, step, violations: Vec::new() });
        }
        let jobs: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
        let outcomes: Vec<Result<GroupOutcome, BeamError>> = jobs
            .par_iter()
            .map(|(leader, members)| {
                let parent = &beams[*leader];
                let dist = search.model.next_token_distribution(search.ctx, &search.token_text(&parent.chars))?;
                let weights = search.weights(&dist);
                let mut donor = Donor {
                    chars: parent.chars.clone(),
                    logprob: parent.logprob,
                    first_beam: *leader,
                    dist,
                    weights,
                    tried: BTreeSet::new(),
                    survived: false,
                };
                let mut out = Vec::with_capacity(members.len());
                for &m in members {
                    let mut rng = search.rng(m, step, 0);
                    let Some(token) = sample_index(&donor.untried_weights(), &mut rng) else {
                        out.push((m, None, None));
                        continue;
                    };
                    donor.tried.insert(token);
                    let mut chars = donor.chars.clone();
                    chars.push(search.allowed[token].expect("only allowed tokens carry weight"));
                    let verdict = search.check(&chars)?;
                    donor.survived |= verdict.is_feasible();
                    out.push((m, Some(token), Some(verdict)));
                }
                Ok(GroupOutcome { donor, members: out })
            })
            .collect();

        let mut donors = Vec::new();
        let mut violations = Vec::new();
        for outcome in outcomes {
            let GroupOutcome { donor, members } = outcome?;
            for (m, token, verdict) in members {
                let beam = &mut beams[m];
                let token_text = token.map(|t| search.allowed[t].expect("allowed").to_string()).unwrap_or_default();
                let (status, rule) = match (token, verdict) {
                    (Some(t), Some(Feasibility::Feasible)) => {
                        beam.chars = donor.chars.clone();
                        beam.chars.push(search.allowed[t].expect("allowed"));
                        beam.logprob = donor.logprob + libm::log(donor.dist.prob(TokenId(t as u32)));
                        beam.status = Status::Active;
                        (StepStatus::Active, None)
                    }
                    (_, Some(Feasibility::Infeasible { rule })) => {
                        beam.status = Status::Dead;
                        violations.push(dead_violation(sentence_index, step, rule, &token_text));
                        (StepStatus::Dead, Some(rule))
                    }
                    _ => {
                        beam.status = Status::Dead;
                        (StepStatus::Dead, None)
                    }
                };
                if config.record_steps {
                    events.push(StepEvent { step, beam: m, token: token_text, status, rule });
                }
            }
            donors.push(donor);
        }

        // Refill every dead slot, best donors first.
        donors.sort_by(|a, b| {
            b.survived.cmp(&a.survived).then(b.logprob.total_cmp(&a.logprob)).then(a.first_beam.cmp(&b.first_beam))
        });
        let mut attempts = 0;
        let dead: Vec<usize> = (0..k).filter(|&i| beams[i].status == Status::Dead).collect();
        'slots: for slot in dead {
            let mut attempt = 0;
            loop {
                if attempts >= config.max_replacements_per_step {
                    break 'slots;
                }
                let Some(donor) = donors.iter_mut().find(|d| !d.exhausted()) else {
                    break 'slots;
                };
                attempts += 1;
                attempt += 1;
                let mut rng = search.rng(slot, step, attempt);
                let token = sample_index(&donor.untried_weights(), &mut rng).expect("donor has untried tokens");
                donor.tried.insert(token);
                let ch = search.allowed[token].expect("allowed");
                let mut chars = donor.chars.clone();
                chars.push(ch);
                match search.check(&chars)? {
                    Feasibility::Feasible => {
                        let logprob = donor.logprob + libm::log(donor.dist.prob(TokenId(token as u32)));
                        beams[slot] = Beam { chars, logprob, status: Status::Active };
                        replacements += 1;
                        if config.record_steps {
                            events.push(StepEvent {
                                step,
                                beam: slot,
                                token: ch.to_string(),
                                status: StepStatus::Replaced,
                                rule: None,
                            });
                        }
                        continue 'slots;
                    }
                    Feasibility::Infeasible { rule } => {
                        violations.push(dead_violation(sentence_index, step, rule, &ch.to_string()));
                        if config.record_steps {
                            events.push(StepEvent {
                                step,
                                beam: slot,
                                token: ch.to_string(),
                                status: StepStatus::Dead,
                                rule: Some(rule),
                            });
                        }
                    }
                }
            }
        }
        if beams.iter().all(|b| b.status != Status::Active) {
            return Err(BeamError::Exhausted { sentence: sentence_index, step, violations });
        }
    }

    for b in &mut beams {
        if b.status == Status::Active {
            b.status = Status::Complete;
        }
    }
    let complete: Vec<(usize, String)> = beams
        .iter()
        .enumerate()
        .filter(|(_, b)| b.status == Status::Complete)
        .map(|(i, b)| (i, b.chars.iter().collect()))
        .collect();
    let candidates = complete.len();
    let (sentence, score) = match selection {
        Selection::FirstComplete => (complete[0].1.clone(), None),
        Selection::Scored(score_fn) => {
            let scores: Vec<Result<BiproScore, ScoreError>> = complete.par_iter().map(|(_, s)| score_fn(s)).collect();
            let mut best: Option<(f64, usize)> = None;
            for (j, s) in scores.into_iter().enumerate() {
                let v = s?.value();
                if best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, j));
                }
            }
            let (v, j) = best.expect("at least one complete beam");
            (complete[j].1.clone(), Some(BiproScore(v)))
        }
    };
    Ok(SentenceResult { sentence, score, candidates_considered: candidates, replacements, steps: events })
}

fn dead_violation(sentence: usize, step: usize, rule: u8, token: &str) -> Violation {
    Violation::new(
        rule,
        Some(sentence),
        Some(step + 1),
        format!("prefix ending in {token:?} cannot be completed without breaking rule {rule}"),
    )
}
