//! Checks a finished generation run by walking its trace.

use bipro::generate::{EventKind, GenerationConfig, GenerationTrace};
use bipro::model::{BlockModel, MockModel, Vocabulary};
use bipro::pingshui::{verify_poem, Poem, RhymeDictionary, Verifier, VerifyOptions};
use bipro::scorer::{Phase, PromptTemplates};

use super::scoring::{Scorer, Seps};

/// Templates whose sentences touch each other, so a masked sentence sees
/// its neighbours' characters.
pub fn joined_templates() -> PromptTemplates {
    PromptTemplates { odd_separator: String::new(), even_separator: String::new(), ..PromptTemplates::default() }
}

pub const JOINED: Seps = ["", ""];

pub fn mock_for(dict: &RhymeDictionary, seed: u64) -> MockModel {
    MockModel::bigram(Vocabulary::from_chars(dict.chars()).unwrap(), seed)
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub accepted: usize,
    pub rejected: usize,
    pub max_round: usize,
}

/// Re-derives every recorded score, and checks strict improvement, the
/// round bound, validity of the result and exact replay.
pub fn check_run(
    model: &dyn BlockModel,
    verifier: &Verifier,
    title: &str,
    config: &GenerationConfig,
    seps: Seps,
    poem: &Poem,
    trace: &GenerationTrace,
) -> Result<RunReport, String> {
    let scorer = Scorer { model, seps, title, alpha: config.weights.alpha_title() };
    let mut rows: Vec<String> = Vec::new();
    let mut report = RunReport::default();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
    for e in &trace.events {
        let k = e.sentence_index;
        report.max_round = report.max_round.max(e.round);
        match e.kind {
            EventKind::Generated => {
                rows.push(e.new_text.clone().ok_or("generated event without text")?);
                if let Some(s) = e.new_score {
                    let expected = scorer.score(&rows, k, Phase::Generation);
                    if !close(s, expected) {
                        return Err(format!("generated score {s} vs {expected}"));
                    }
                }
            }
            EventKind::Revised | EventKind::Rewritten | EventKind::Rejected => {
                let phase = e.phase();
                let old = scorer.score(&rows, k, phase);
                if !close(e.old_score.ok_or("missing old score")?, old) {
                    return Err(format!("old score of sentence {k} is {:?}, expected {old}", e.old_score));
                }
                if rows[k - 1] != *e.old_text.as_ref().ok_or("missing old text")? {
                    return Err(format!("old text of sentence {k} does not match"));
                }
                let Some(text) = &e.new_text else {
                    report.rejected += 1;
                    continue;
                };
                let mut next = rows.clone();
                next[k - 1] = text.clone();
                let new = scorer.score(&next, k, phase);
                if !close(e.new_score.ok_or("missing new score")?, new) {
                    return Err(format!("new score of sentence {k} is {:?}, expected {new}", e.new_score));
                }
                if e.kind == EventKind::Rejected {
                    if new > old {
                        return Err(format!("sentence {k}: better candidate rejected ({new} > {old})"));
                    }
                    report.rejected += 1;
                    continue;
                }
                if new <= old {
                    return Err(format!("sentence {k}: accepted {new} is not above {old}"));
                }
                rows = next;
                report.accepted += 1;
                let partial = verify_poem(
                    &Poem::new(title, None, rows.clone()),
                    verifier.dictionary(),
                    &VerifyOptions::default(),
                )
                .map_err(|e| e.to_string())?;
                if partial.violations().iter().any(|v| v.rule != 1) {
                    return Err(format!("replacement broke the rules: {:?}", partial.violations()));
                }
            }
        }
    }
    if report.max_round > config.max_rewrites {
        return Err(format!("round {} exceeds {}", report.max_round, config.max_rewrites));
    }
    if rows != poem.sentences {
        return Err("walking the trace does not give the poem".into());
    }
    let verdict = verifier.verify(poem).map_err(|e| e.to_string())?;
    if !verdict.is_valid() {
        return Err(format!("final poem invalid: {:?}", verdict.violations()));
    }
    let replayed = trace.replay(title, config.format).map_err(|e| e.to_string())?;
    let mut jsonl = Vec::new();
    trace.write_jsonl(&mut jsonl).map_err(|e| e.to_string())?;
    let reread = GenerationTrace::read_jsonl(&jsonl[..]).map_err(|e| e.to_string())?;
    let replayed_file = reread.replay(title, config.format).map_err(|e| e.to_string())?;
    let bytes = |p: &Poem| serde_json::to_string(p).unwrap();
    if bytes(&replayed) != bytes(poem) || bytes(&replayed_file) != bytes(poem) {
        return Err("replay differs from the poem".into());
    }
    Ok(report)
}
