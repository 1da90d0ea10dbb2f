//! The eight rules as predicates over a poem and a fixed pronunciation
//! assignment. Each call reports every instance of its rule; an empty result
//! means the rule holds.
//!
//! The instance counts here define the violation cost minimized by the
//! verifier's search, so the two must stay in step.

use super::{Assignment, Poem, RhymeClass, Tone, VerifyOptions, Violation};

pub fn check_rule(rule: u8, poem: &Poem, assignment: &Assignment, options: &VerifyOptions) -> Vec<Violation> {
    match rule {
        1 => sentence_count(poem),
        2 => sentence_length(poem),
        3 => end_tones(assignment),
        4 => rhyme(poem, assignment, options),
        5 => inner_alternation(assignment),
        6 => couplet_links(assignment),
        7 => tail_triple(assignment),
        8 => isolated_ping(assignment),
        _ => panic!("rule id {rule} outside 1..=8"),
    }
}

fn sentence_count(poem: &Poem) -> Vec<Violation> {
    let n = poem.sentences.len();
    if !matches!(n, 4 | 8) {
        return vec![Violation::new(1, None, None, format!("poem has {n} sentences, expected 4 or 8"))];
    }
    if let Some(format) = poem.format {
        if format.sentence_count() != n {
            return vec![Violation::new(
                1,
                None,
                None,
                format!("{format} needs {} sentences, poem has {n}", format.sentence_count()),
            )];
        }
    }
    Vec::new()
}

fn sentence_length(poem: &Poem) -> Vec<Violation> {
    let lengths: Vec<usize> = poem.sentences.iter().map(|s| s.chars().count()).collect();
    let Some(&first) = lengths.first() else {
        return Vec::new();
    };
    let expected = poem.format.map_or(first, |f| f.sentence_length());
    lengths
        .iter()
        .enumerate()
        .filter(|(_, &len)| len != expected || !matches!(len, 5 | 7))
        .map(|(i, &len)| {
            Violation::new(
                2,
                Some(i + 1),
                None,
                format!(
                    "sentence has {len} characters, expected {} (5 or 7)",
                    if matches!(expected, 5 | 7) { expected } else { first }
                ),
            )
        })
        .collect()
}

fn tones(row: &[super::Pronunciation]) -> Vec<Tone> {
    row.iter().map(|p| p.tone).collect()
}

fn end_tones(a: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, row) in a.0.iter().enumerate().skip(1) {
        let Some(last) = row.last() else { continue };
        let si = i + 1;
        let want = if si % 2 == 1 { Tone::Ze } else { Tone::Ping };
        if last.tone != want {
            out.push(Violation::new(
                3,
                Some(si),
                Some(row.len()),
                format!("{} sentence must end {want}, ends {}", parity(si), last.tone),
            ));
        }
    }
    out
}

fn parity(si: usize) -> &'static str {
    if si % 2 == 1 {
        "odd"
    } else {
        "even"
    }
}

fn rhyme(poem: &Poem, a: &Assignment, options: &VerifyOptions) -> Vec<Violation> {
    struct Participant {
        sentence: usize,
        position: usize,
        ch: char,
        class: RhymeClass,
        distinct: bool,
    }
    let chars = poem.chars();
    let mut parts = Vec::new();
    for (i, row) in a.0.iter().enumerate() {
        let si = i + 1;
        let Some(last) = row.last() else { continue };
        let first_ping = si == 1 && last.tone == Tone::Ping;
        if si % 2 == 0 || first_ping {
            let Some(&ch) = chars.get(i).and_then(|c| c.get(row.len() - 1)) else {
                continue;
            };
            parts.push(Participant {
                sentence: si,
                position: row.len(),
                ch,
                class: last.rhyme,
                distinct: si != 1 || options.first_sentence_distinct,
            });
        }
    }
    if parts.is_empty() {
        return Vec::new();
    }
    // Target class: most frequent, earliest on ties.
    let mut best: Option<(usize, RhymeClass)> = None;
    for p in &parts {
        let count = parts.iter().filter(|q| q.class == p.class).count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, p.class));
        }
    }
    let (_, target) = best.expect("non-empty");
    let mut out = Vec::new();
    let mut seen: Vec<char> = Vec::new();
    for p in &parts {
        if p.class != target {
            out.push(Violation::new(
                4,
                Some(p.sentence),
                Some(p.position),
                format!(
                    "rhyme character {} is in class {} ({}), the poem rhymes in {} ({})",
                    p.ch,
                    p.class.id(),
                    p.class.name(),
                    target.id(),
                    target.name()
                ),
            ));
        }
        if p.distinct {
            if seen.contains(&p.ch) {
                out.push(Violation::new(
                    4,
                    Some(p.sentence),
                    Some(p.position),
                    format!("rhyme character {} is repeated", p.ch),
                ));
            } else {
                seen.push(p.ch);
            }
        }
    }
    out
}

fn inner_alternation(a: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, row) in a.0.iter().enumerate() {
        let t = tones(row);
        if t.len() >= 4 && t[1] == t[3] {
            out.push(Violation::new(5, Some(i + 1), Some(4), format!("positions 2 and 4 are both {}", t[1])));
        }
        if t.len() == 7 && t[5] != t[1] {
            out.push(Violation::new(
                5,
                Some(i + 1),
                Some(6),
                format!("position 6 is {} but position 2 is {}", t[5], t[1]),
            ));
        }
    }
    out
}

fn couplet_links(a: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 1..a.0.len() {
        let (Some(prev), Some(cur)) = (a.tone(i - 1, 1), a.tone(i, 1)) else {
            continue;
        };
        let si = i + 1;
        let broken = if si % 2 == 0 { cur == prev } else { cur != prev };
        if broken {
            let relation = if si % 2 == 0 { "differ from" } else { "match" };
            out.push(Violation::new(
                6,
                Some(si),
                Some(2),
                format!("position 2 is {cur}; it must {relation} position 2 of sentence {i} ({prev})"),
            ));
        }
    }
    out
}

fn tail_triple(a: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, row) in a.0.iter().enumerate() {
        let t = tones(row);
        let n = t.len();
        if n >= 3 && t[n - 3] == t[n - 2] && t[n - 2] == t[n - 1] {
            out.push(Violation::new(7, Some(i + 1), Some(n), format!("last three characters are all {}", t[n - 1])));
        }
    }
    out
}

fn isolated_ping(a: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, row) in a.0.iter().enumerate() {
        let t = tones(row);
        let n = t.len();
        if n < 3 || t[n - 1] != Tone::Ping {
            continue;
        }
        for p in 1..n - 1 {
            if t[p] == Tone::Ping && t[p - 1] == Tone::Ze && t[p + 1] == Tone::Ze {
                out.push(Violation::new(
                    8,
                    Some(i + 1),
                    Some(p + 1),
                    "Ping character is enclosed by two Ze characters in a Ping-ending sentence",
                ));
            }
        }
    }
    out
}
