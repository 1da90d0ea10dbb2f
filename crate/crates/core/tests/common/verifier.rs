//! Brute-force verifier that enumerates every pronunciation assignment and
//! counts rule instances with its own code.

use std::collections::BTreeMap;

use bipro::pingshui::{Poem, PoemFormat, Pronunciation, RhymeClass, RhymeDictionary, Tone};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Per-rule instance counts for one concrete assignment.
pub fn naive_counts(
    chars: &[Vec<char>],
    tones: &[Vec<Tone>],
    finals: &[Pronunciation],
    distinct_first: bool,
) -> [u32; 9] {
    let mut c = [0u32; 9];
    let n = chars.len();
    for s in 0..n {
        let t = &tones[s];
        let l = t.len();
        let no = s + 1;
        if no >= 2 {
            let want = if no % 2 == 0 { Tone::Ping } else { Tone::Ze };
            c[3] += (t[l - 1] != want) as u32;
        }
        c[5] += (t[1] == t[3]) as u32;
        if l == 7 {
            c[5] += (t[5] != t[1]) as u32;
        }
        if no >= 2 {
            let same = tones[s - 1][1] == t[1];
            c[6] += if no % 2 == 0 { same as u32 } else { (!same) as u32 };
        }
        c[7] += (t[l - 1] == t[l - 2] && t[l - 2] == t[l - 3]) as u32;
        if t[l - 1] == Tone::Ping {
            for p in 1..l - 1 {
                c[8] += (t[p] == Tone::Ping && t[p - 1] == Tone::Ze && t[p + 1] == Tone::Ze) as u32;
            }
        }
    }
    let mut classes: BTreeMap<RhymeClass, u32> = BTreeMap::new();
    let mut seen: BTreeMap<char, u32> = BTreeMap::new();
    let mut participants = 0;
    for s in 0..n {
        let no = s + 1;
        let first = no == 1 && finals[s].tone == Tone::Ping;
        if no % 2 == 0 || first {
            participants += 1;
            *classes.entry(finals[s].rhyme).or_default() += 1;
            if no % 2 == 0 || distinct_first {
                *seen.entry(*chars[s].last().unwrap()).or_default() += 1;
            }
        }
    }
    let top = classes.values().copied().max().unwrap_or(0);
    c[4] = participants - top + seen.values().map(|k| k - 1).sum::<u32>();
    c
}

/// Minimum total cost, and minimum per rule, over all assignments.
pub fn oracle(chars: &[Vec<char>], dict: &RhymeDictionary, distinct_first: bool) -> (u32, [u32; 9]) {
    // Non-final positions only matter through their tone.
    let mut slots: Vec<Vec<(Tone, Pronunciation)>> = Vec::new();
    for row in chars {
        for (p, &ch) in row.iter().enumerate() {
            let prons = dict.get(ch).unwrap();
            let mut opts: Vec<(Tone, Pronunciation)> = Vec::new();
            for &pr in prons {
                if p + 1 == row.len() || !opts.iter().any(|(t, _)| *t == pr.tone) {
                    opts.push((pr.tone, pr));
                }
            }
            slots.push(opts);
        }
    }
    let mut best_total = u32::MAX;
    let mut best_rule = [u32::MAX; 9];
    let mut idx = vec![0usize; slots.len()];
    loop {
        let mut k = 0;
        let mut tones = Vec::new();
        let mut finals = Vec::new();
        for row in chars {
            let mut t = Vec::new();
            for _ in row {
                let (tone, pr) = slots[k][idx[k]];
                t.push(tone);
                k += 1;
                if t.len() == row.len() {
                    finals.push(pr);
                }
            }
            tones.push(t);
        }
        let c = naive_counts(chars, &tones, &finals, distinct_first);
        best_total = best_total.min(c[3..].iter().sum());
        for r in 3..9 {
            best_rule[r] = best_rule[r].min(c[r]);
        }
        let mut p = slots.len();
        loop {
            if p == 0 {
                return (best_total, best_rule);
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < slots[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

pub fn by_tone(dict: &RhymeDictionary, tone: Tone) -> Vec<char> {
    dict.iter().filter(|(_, ps)| ps.iter().any(|p| p.tone == tone)).map(|(c, _)| c).collect()
}

const PATTERN: [&str; 4] = ["ZZPPZ", "PPZZP", "PPPZZ", "ZZZPP"];

/// Random poem, half the time following a valid tone pattern with light noise.
pub fn random_poem(rng: &mut ChaCha8Rng, dict: &RhymeDictionary, format: PoemFormat) -> Poem {
    let all: Vec<char> = dict.chars().collect();
    let ping = by_tone(dict, Tone::Ping);
    let ze = by_tone(dict, Tone::Ze);
    let len = format.sentence_length();
    let patterned = rng.random_bool(0.6);
    let rhyme_classes: Vec<RhymeClass> =
        dict.classes().filter(|(c, t)| *t == Tone::Ping && dict.members(*c).len() >= 4).map(|(c, _)| c).collect();
    let class = rhyme_classes[rng.random_range(0..rhyme_classes.len())];
    let mut rhymes: Vec<char> = dict.members(class).to_vec();
    let mut sentences = Vec::new();
    for s in 0..format.sentence_count() {
        let mut row = String::new();
        if !patterned {
            for _ in 0..len {
                row.push(all[rng.random_range(0..all.len())]);
            }
            sentences.push(row);
            continue;
        }
        let base: Vec<char> = PATTERN[s % 4].chars().collect();
        let mut pattern: Vec<char> = Vec::new();
        if len == 7 {
            let lead = if base[1] == 'P' { 'Z' } else { 'P' };
            pattern.extend([lead, lead]);
        }
        pattern.extend(base);
        for (p, &t) in pattern.iter().enumerate() {
            let noisy = rng.random_bool(0.04);
            let ch = if noisy {
                all[rng.random_range(0..all.len())]
            } else if p + 1 == len && s % 2 == 1 && !rhymes.is_empty() {
                rhymes.remove(rng.random_range(0..rhymes.len()))
            } else {
                let pool = if t == 'P' { &ping } else { &ze };
                pool[rng.random_range(0..pool.len())]
            };
            row.push(ch);
        }
        sentences.push(row);
    }
    Poem::new("题", Some(format), sentences)
}

pub fn assignment_count(poem: &Poem, dict: &RhymeDictionary) -> u64 {
    poem.chars()
        .iter()
        .flat_map(|row| {
            row.iter().enumerate().map(move |(p, &c)| {
                let prons = dict.get(c).unwrap();
                if p + 1 == row.len() {
                    prons.len() as u64
                } else {
                    let mut t: Vec<Tone> = prons.iter().map(|p| p.tone).collect();
                    t.dedup();
                    t.len() as u64
                }
            })
        })
        .product()
}

/// Whether sentence `earlier.len() + 1`, starting with `prefix`, and the
/// later sentences of a 4×5 poem can be completed so that only rules 1 and
/// 2 may fail. Later sentences use `filler` (a character with both tones)
/// before their final character, which stands for every tone choice.
pub fn completable(
    earlier: &[String],
    prefix: &[char],
    alphabet: &[char],
    filler: char,
    dict: &RhymeDictionary,
    options: &bipro::pingshui::VerifyOptions,
) -> bool {
    let rest = 5 - prefix.len();
    let later = 4 - earlier.len() - 1;
    for code in 0..alphabet.len().pow(rest as u32) {
        let mut c = code;
        let mut current: String = prefix.iter().collect();
        for _ in 0..rest {
            current.push(alphabet[c % alphabet.len()]);
            c /= alphabet.len();
        }
        for tail in 0..alphabet.len().pow(later as u32) {
            let mut t = tail;
            let mut rows = earlier.to_vec();
            rows.push(current.clone());
            for _ in 0..later {
                let mut row: String = std::iter::repeat_n(filler, 4).collect();
                row.push(alphabet[t % alphabet.len()]);
                t /= alphabet.len();
                rows.push(row);
            }
            let verdict = bipro::pingshui::verify_poem(&Poem::new("t", None, rows), dict, options).unwrap();
            if verdict.violations().iter().all(|v| v.rule <= 2) {
                return true;
            }
        }
    }
    false
}
