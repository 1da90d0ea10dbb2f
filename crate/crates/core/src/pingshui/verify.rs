use std::sync::Arc;

use super::rules::check_rule;
use super::solver::{solve, Cell, RuleMask};
use super::{Assignment, Poem, RhymeDictionary, Verdict, VerifyError, VerifyOptions, Violation};

/// Result of checking a partial sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    /// Some completion of the sentence and of the missing later sentences
    /// can still satisfy every rule.
    Feasible,
    /// No completion can; `rule` is the lowest rule that must break.
    Infeasible { rule: u8 },
}

impl Feasibility {
    pub fn is_feasible(self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

fn check_known(chars: &[Vec<char>], dict: &RhymeDictionary) -> Result<(), VerifyError> {
    for (s, row) in chars.iter().enumerate() {
        for (p, &ch) in row.iter().enumerate() {
            if !dict.contains(ch) {
                return Err(VerifyError::UnknownCharacter { ch, sentence: s + 1, position: p + 1 });
            }
        }
    }
    Ok(())
}

/// Checks a complete poem. Rules 3 to 8 are skipped when rule 2 fails.
pub fn verify_poem(poem: &Poem, dict: &RhymeDictionary, options: &VerifyOptions) -> Result<Verdict, VerifyError> {
    let chars = poem.chars();
    check_known(&chars, dict)?;
    let empty = Assignment(Vec::new());
    let mut violations = check_rule(1, poem, &empty, options);
    let structural = check_rule(2, poem, &empty, options);
    if !structural.is_empty() {
        violations.extend(structural);
        return Ok(Verdict::Invalid(violations));
    }
    let cells: Vec<Vec<Cell>> = chars.iter().map(|row| row.iter().map(|&c| Cell::Fixed(c)).collect()).collect();
    let masks: Vec<(RuleMask, Vec<u8>)> = if options.lenient {
        (3..=8).map(|r| (RuleMask::only(r), vec![r])).collect()
    } else {
        vec![(RuleMask::ALL, (3..=8).collect())]
    };
    for (mask, rules) in masks {
        let solution = solve(&cells, dict, options, mask).expect("fixed characters always have options");
        if solution.cost.total() == 0 {
            continue;
        }
        let assignment = Assignment(solution.pronunciations());
        let found: Vec<Violation> = rules.iter().flat_map(|&r| check_rule(r, poem, &assignment, options)).collect();
        debug_assert_eq!(found.len() as u32, solution.cost.total());
        violations.extend(found);
    }
    if violations.is_empty() {
        Ok(Verdict::Valid)
    } else {
        violations.sort_by_key(|v| v.rule);
        Ok(Verdict::Invalid(violations))
    }
}

/// Checks whether sentence `sentence_index` (1-based), starting with
/// `prefix`, can still be completed into a valid poem given the sentences in
/// `poem_so_far`. Sentences after the one being checked may be absent, in
/// which case they may be any dictionary characters; if present they are
/// taken as fixed.
///
/// The check is sound: a prefix reported infeasible has no valid completion.
/// Extending an infeasible prefix keeps it infeasible.
pub fn verify_sentence_prefix(
    poem_so_far: &Poem,
    sentence_index: usize,
    prefix: &[char],
    dict: &RhymeDictionary,
    options: &VerifyOptions,
) -> Result<Feasibility, VerifyError> {
    let format = poem_so_far.format.ok_or(VerifyError::MissingFormat)?;
    let len = format.sentence_length();
    if prefix.len() > len {
        return Err(VerifyError::PrefixTooLong { len: prefix.len(), max: len });
    }
    let count = poem_so_far.sentences.len();
    if sentence_index == 0 || sentence_index > count + 1 || sentence_index > format.sentence_count() {
        return Err(VerifyError::SentenceIndex { index: sentence_index, count });
    }
    let mut chars = poem_so_far.chars();
    for (i, row) in chars.iter().enumerate() {
        if i + 1 != sentence_index && row.len() != len {
            return Err(VerifyError::SentenceLength { sentence: i + 1, len: row.len(), expected: len });
        }
    }
    if sentence_index > count {
        chars.push(Vec::new());
    }
    chars[sentence_index - 1] = prefix.to_vec();
    check_known(&chars, dict)?;
    let mut cells: Vec<Vec<Cell>> = chars
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cells: Vec<Cell> = row.iter().map(|&c| Cell::Fixed(c)).collect();
            if i + 1 == sentence_index {
                cells.resize(len, Cell::Wild);
            }
            cells
        })
        .collect();
    cells.resize(format.sentence_count(), vec![Cell::Wild; len]);
    let rules: Vec<u8> = (3..=8).collect();
    let masks: Vec<RuleMask> =
        if options.lenient { rules.iter().map(|&r| RuleMask::only(r)).collect() } else { vec![RuleMask::ALL] };
    let mut worst: Option<u8> = None;
    for mask in masks {
        let rule = match solve(&cells, dict, options, mask) {
            None => Some(2),
            Some(s) => s.cost.first_rule(),
        };
        if let Some(r) = rule {
            worst = Some(worst.map_or(r, |w| w.min(r)));
        }
    }
    Ok(worst.map_or(Feasibility::Feasible, |rule| Feasibility::Infeasible { rule }))
}

/// A dictionary with fixed options, shareable across threads.
#[derive(Debug, Clone)]
pub struct Verifier {
    dict: Arc<RhymeDictionary>,
    options: VerifyOptions,
}

impl Verifier {
    pub fn new(dict: Arc<RhymeDictionary>, options: VerifyOptions) -> Self {
        Self { dict, options }
    }

    pub fn dictionary(&self) -> &RhymeDictionary {
        &self.dict
    }

    pub fn options(&self) -> &VerifyOptions {
        &self.options
    }

    pub fn verify(&self, poem: &Poem) -> Result<Verdict, VerifyError> {
        verify_poem(poem, &self.dict, &self.options)
    }

    pub fn check_prefix(
        &self,
        poem_so_far: &Poem,
        sentence_index: usize,
        prefix: &[char],
    ) -> Result<Feasibility, VerifyError> {
        verify_sentence_prefix(poem_so_far, sentence_index, prefix, &self.dict, &self.options)
    }
}
