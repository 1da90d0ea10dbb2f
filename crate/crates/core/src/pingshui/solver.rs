//! Exact minimum-violation search over pronunciation assignments.
//!
//! Positions are either fixed characters or wildcards (not yet generated).
//! A wildcard may become any dictionary character, so it is represented by
//! tone options (and, at a sentence end, one option per rhyme class).
//! The cost of an assignment is the number of violation instances of rules
//! 3 to 8 as counted by [`super::check_rule`].
//!
//! Sentence-local rules (3, 5, 7, 8) depend only on one sentence's tones, so
//! each sentence is reduced to the cheapest choice for every pair
//! (tone at position 2, ending option). Rule 6 links neighbouring sentences
//! through position 2 and rule 4 links the endings through a target class,
//! which is enumerated; a chain search over sentences then finds the optimum.

use std::collections::BTreeSet;

use super::{Pronunciation, RhymeClass, RhymeDictionary, Tone, VerifyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cell {
    Fixed(char),
    Wild,
}

/// Which of rules 3..=8 contribute to the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RuleMask(u16);

impl RuleMask {
    pub const ALL: RuleMask = RuleMask(0b1_1111_1000);

    pub fn only(rule: u8) -> Self {
        RuleMask(1 << rule)
    }

    fn has(self, rule: u8) -> bool {
        self.0 & (1 << rule) != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Cost {
    pub by_rule: [u32; 9],
}

impl Cost {
    pub fn total(&self) -> u32 {
        self.by_rule.iter().sum()
    }

    fn add(mut self, rule: u8, n: u32) -> Self {
        self.by_rule[rule as usize] += n;
        self
    }

    fn plus(mut self, other: &Cost) -> Self {
        for (a, b) in self.by_rule.iter_mut().zip(other.by_rule.iter()) {
            *a += b;
        }
        self
    }

    /// Lowest rule with a nonzero count.
    pub fn first_rule(&self) -> Option<u8> {
        (0..9u8).find(|&r| self.by_rule[r as usize] > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Choice {
    pub tone: Tone,
    pub class: Option<RhymeClass>,
    /// Concrete pronunciation for fixed characters.
    pub pron: Option<Pronunciation>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub cost: Cost,
    /// One choice per position, sentence by sentence.
    pub choices: Vec<Vec<Choice>>,
}

impl Solution {
    /// Pronunciations for fully fixed sentences.
    pub fn pronunciations(&self) -> Vec<Vec<Pronunciation>> {
        self.choices.iter().map(|row| row.iter().map(|c| c.pron.expect("fixed position")).collect()).collect()
    }
}

fn options(cell: Cell, is_final: bool, dict: &RhymeDictionary, tones: &[Tone]) -> Vec<Choice> {
    match cell {
        Cell::Fixed(ch) => {
            let prons = dict.get(ch).expect("characters are checked before solving");
            if is_final {
                prons.iter().map(|p| Choice { tone: p.tone, class: Some(p.rhyme), pron: Some(*p) }).collect()
            } else {
                let mut out: Vec<Choice> = Vec::new();
                for p in prons {
                    if !out.iter().any(|c| c.tone == p.tone) {
                        out.push(Choice { tone: p.tone, class: Some(p.rhyme), pron: Some(*p) });
                    }
                }
                out
            }
        }
        Cell::Wild if is_final => dict.classes().map(|(c, t)| Choice { tone: t, class: Some(c), pron: None }).collect(),
        Cell::Wild => tones.iter().map(|&t| Choice { tone: t, class: None, pron: None }).collect(),
    }
}

fn tone_index(t: Tone) -> usize {
    match t {
        Tone::Ping => 0,
        Tone::Ze => 1,
    }
}

fn local_cost(si: usize, t: &[Tone], mask: RuleMask) -> Cost {
    let n = t.len();
    let mut cost = Cost::default();
    if mask.has(3) && si >= 2 {
        let want = if si % 2 == 1 { Tone::Ze } else { Tone::Ping };
        if t[n - 1] != want {
            cost = cost.add(3, 1);
        }
    }
    if mask.has(5) {
        if n >= 4 && t[1] == t[3] {
            cost = cost.add(5, 1);
        }
        if n == 7 && t[5] != t[1] {
            cost = cost.add(5, 1);
        }
    }
    if mask.has(7) && n >= 3 && t[n - 3] == t[n - 2] && t[n - 2] == t[n - 1] {
        cost = cost.add(7, 1);
    }
    if mask.has(8) && n >= 3 && t[n - 1] == Tone::Ping {
        let isolated =
            (1..n - 1).filter(|&p| t[p] == Tone::Ping && t[p - 1] == Tone::Ze && t[p + 1] == Tone::Ze).count();
        cost = cost.add(8, isolated as u32);
    }
    cost
}

/// Cheapest choice per (position-2 tone, ending option) for one sentence.
struct LocalTable {
    finals: Vec<Choice>,
    /// Indexed by `tone_index(t2) * finals.len() + final_idx`.
    best: Vec<Option<(Cost, Vec<usize>)>>,
    opts: Vec<Vec<Choice>>,
}

fn local_table(si: usize, cells: &[Cell], dict: &RhymeDictionary, tones: &[Tone], mask: RuleMask) -> LocalTable {
    let n = cells.len();
    assert!(n >= 2, "sentences shorter than 2 characters are rejected before solving");
    let opts: Vec<Vec<Choice>> = cells.iter().enumerate().map(|(p, &c)| options(c, p + 1 == n, dict, tones)).collect();
    let finals = opts[n - 1].clone();
    let mut best: Vec<Option<(Cost, Vec<usize>)>> = vec![None; 2 * finals.len()];
    if opts.iter().any(Vec::is_empty) {
        return LocalTable { finals, best, opts };
    }
    let mut idx = vec![0usize; n];
    let mut t = vec![Tone::Ping; n];
    loop {
        for p in 0..n {
            t[p] = opts[p][idx[p]].tone;
        }
        let cost = local_cost(si, &t, mask);
        let key = tone_index(t[1]) * finals.len() + idx[n - 1];
        if best[key].as_ref().is_none_or(|(c, _)| cost.total() < c.total()) {
            best[key] = Some((cost, idx.clone()));
        }
        // Odometer increment, last position fastest.
        let mut p = n;
        loop {
            if p == 0 {
                return LocalTable { finals, best, opts };
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < opts[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// Minimum-cost assignment, or `None` when some wildcard has no option at
/// all (the dictionary lacks a needed tone).
pub(crate) fn solve(
    sentences: &[Vec<Cell>],
    dict: &RhymeDictionary,
    options: &VerifyOptions,
    mask: RuleMask,
) -> Option<Solution> {
    let mut tones = Vec::new();
    for t in [Tone::Ping, Tone::Ze] {
        if dict.iter().any(|(_, ps)| ps.iter().any(|p| p.tone == t)) {
            tones.push(t);
        }
    }
    if sentences.is_empty() {
        return Some(Solution { cost: Cost::default(), choices: Vec::new() });
    }
    let tables: Vec<LocalTable> =
        sentences.iter().enumerate().map(|(i, cells)| local_table(i + 1, cells, dict, &tones, mask)).collect();

    let final_cell = |si: usize| *sentences[si - 1].last().expect("non-empty sentence");
    let fixed_even: Vec<char> = (2..=sentences.len())
        .step_by(2)
        .filter_map(|si| match final_cell(si) {
            Cell::Fixed(c) => Some(c),
            Cell::Wild => None,
        })
        .collect();
    let mut const_dup = 0u32;
    if mask.has(4) {
        let distinct: BTreeSet<char> = fixed_even.iter().copied().collect();
        const_dup = (fixed_even.len() - distinct.len()) as u32;
    }
    let first_fixed = match final_cell(1) {
        Cell::Fixed(c) => Some(c),
        Cell::Wild => None,
    };

    let mut targets: Vec<Option<RhymeClass>> = Vec::new();
    if mask.has(4) {
        let mut set = BTreeSet::new();
        for (i, table) in tables.iter().enumerate() {
            let si = i + 1;
            for f in &table.finals {
                if si % 2 == 0 || (si == 1 && f.tone == Tone::Ping) {
                    if let Some(c) = f.class {
                        set.insert(c);
                    }
                }
            }
        }
        targets.extend(set.into_iter().map(Some));
    }
    if targets.is_empty() {
        targets.push(None);
    }

    // Unused members of the target class, given whether sentence 1 takes part.
    let capacity = |class: Option<RhymeClass>, s1p: usize| {
        let Some(class) = class else { return usize::MAX };
        let exclude = if s1p == 1 && options.first_sentence_distinct { first_fixed } else { None };
        dict.members(class).iter().filter(|c| !fixed_even.contains(c) && Some(**c) != exclude).count()
    };

    // A state is (position-2 tone, sentence 1 rhymes, wildcard endings in the
    // target class so far).
    let wild_max = sentences.len();
    let states = 4 * (wild_max + 1);
    let state_of = |t2: usize, s1p: usize, w: usize| (w * 2 + t2) * 2 + s1p;
    let split = |state: usize| ((state / 2) % 2, state % 2, state / 4);

    type State = Option<(Cost, usize, usize)>; // cost, key, previous state
    let mut best: Option<(Cost, Vec<Vec<State>>, usize)> = None;
    for &target in &targets {
        let mut history: Vec<Vec<State>> = Vec::with_capacity(sentences.len());
        let mut dp: Vec<State> = vec![None; states];
        for (i, table) in tables.iter().enumerate() {
            let si = i + 1;
            let nf = table.finals.len();
            let mut next: Vec<State> = vec![None; states];
            for (key, entry) in table.best.iter().enumerate() {
                let Some((local, _)) = entry else { continue };
                let t2 = key / nf;
                let f = table.finals[key % nf];
                let participates = si % 2 == 0 || (si == 1 && f.tone == Tone::Ping);
                let mut r4 = 0;
                if mask.has(4) && participates && f.class != target {
                    r4 += 1;
                }
                let wild_final = matches!(final_cell(si), Cell::Wild);
                let counted = mask.has(4) && participates && wild_final && f.class == target;
                if si == 1 {
                    let s1p = usize::from(participates);
                    if mask.has(4)
                        && participates
                        && options.first_sentence_distinct
                        && first_fixed.is_some_and(|c| fixed_even.contains(&c))
                    {
                        r4 += 1;
                    }
                    let w = usize::from(counted && options.first_sentence_distinct);
                    let cost = local.add(4, r4);
                    let state = state_of(t2, s1p, w);
                    if next[state].as_ref().is_none_or(|(c, _, _)| cost.total() < c.total()) {
                        next[state] = Some((cost, key, usize::MAX));
                    }
                    continue;
                }
                for (prev_state, prev) in dp.iter().enumerate() {
                    let Some((prev_cost, _, _)) = prev else {
                        continue;
                    };
                    let (pt2, s1p, pw) = split(prev_state);
                    let mut cost = prev_cost.plus(local);
                    if mask.has(6) {
                        let broken = if si % 2 == 0 { t2 == pt2 } else { t2 != pt2 };
                        if broken {
                            cost = cost.add(6, 1);
                        }
                    }
                    cost = cost.add(4, r4);
                    let state = state_of(t2, s1p, pw + usize::from(counted));
                    if next[state].as_ref().is_none_or(|(c, _, _)| cost.total() < c.total()) {
                        next[state] = Some((cost, key, prev_state));
                    }
                }
            }
            history.push(next.clone());
            dp = next;
        }
        // Wildcard endings beyond the free members must repeat a character.
        let end = dp
            .iter()
            .enumerate()
            .filter_map(|(s, st)| {
                st.as_ref().map(|(c, _, _)| {
                    let (_, s1p, w) = split(s);
                    let short = w.saturating_sub(capacity(target, s1p)) as u32;
                    (c.add(4, const_dup + short), s)
                })
            })
            .fold(None::<(Cost, usize)>, |acc, (c, s)| match acc {
                Some((a, _)) if a.total() <= c.total() => acc,
                _ => Some((c, s)),
            });
        if let Some((cost, state)) = end {
            if best.as_ref().is_none_or(|(c, _, _)| cost.total() < c.total()) {
                best = Some((cost, history, state));
            }
        }
    }

    let (cost, history, mut state) = best?;
    let mut choices = vec![Vec::new(); sentences.len()];
    for i in (0..sentences.len()).rev() {
        let (_, key, prev) = history[i][state].expect("reachable state");
        let table = &tables[i];
        let (_, picks) = table.best[key].as_ref().expect("key has an entry");
        choices[i] = picks.iter().enumerate().map(|(p, &k)| table.opts[p][k]).collect();
        state = prev;
    }
    Some(Solution { cost, choices })
}
