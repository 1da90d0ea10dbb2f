//! Pingshui rhyme dictionary and format verifier.
//!
//! Every character carries one or more pronunciations, each a tone category
//! (Ping or Ze) and one of 106 rhyme classes. A poem passes when some choice
//! of one pronunciation per character occurrence satisfies all eight rules:
//!
//! 1. 4 or 8 sentences.
//! 2. All sentences have the same length, 5 or 7.
//! 3. Odd sentences end Ze, even sentences end Ping; sentence 1 is free.
//! 4. Even-sentence endings share one rhyme class and are distinct characters;
//!    a Ping-ending first sentence joins them.
//! 5. Position 2 differs in tone from position 4; in 7-character sentences
//!    position 6 matches position 2.
//! 6. Position 2 of an even sentence differs from position 2 of the previous
//!    sentence; for odd sentences after the first it matches.
//! 7. The last three characters are not all one tone.
//! 8. In a Ping-ending sentence, no other Ping character sits between two Ze
//!    characters.

mod classes;
mod dictionary;
mod rules;
mod solver;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classes::{class_label, RHYME_CLASS_COUNT};
pub use dictionary::{DictionaryError, RhymeDictionary, SYNTHETIC_DICTIONARY};
pub use rules::check_rule;
pub use verify::{verify_poem, verify_sentence_prefix, Feasibility, Verifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tone {
    Ping,
    Ze,
}

impl Tone {
    pub fn code(self) -> char {
        match self {
            Tone::Ping => 'P',
            Tone::Ze => 'Z',
        }
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tone::Ping => "Ping",
            Tone::Ze => "Ze",
        })
    }
}

/// One of the 106 rhyme classes, identified by `1..=106`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RhymeClass(u8);

impl RhymeClass {
    pub fn new(id: u32) -> Option<Self> {
        (1..=RHYME_CLASS_COUNT as u32).contains(&id).then_some(Self(id as u8))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Conventional label of the class, e.g. `上平一东`.
    pub fn name(self) -> &'static str {
        class_label(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pronunciation {
    pub tone: Tone,
    pub rhyme: RhymeClass,
}

impl Pronunciation {
    pub fn new(tone: Tone, rhyme: RhymeClass) -> Self {
        Self { tone, rhyme }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoemFormat {
    #[serde(rename = "5-Jueju")]
    FiveJueju,
    #[serde(rename = "7-Jueju")]
    SevenJueju,
    #[serde(rename = "5-Lvshi")]
    FiveLvshi,
    #[serde(rename = "7-Lvshi")]
    SevenLvshi,
}

impl PoemFormat {
    pub const ALL: [PoemFormat; 4] =
        [PoemFormat::FiveJueju, PoemFormat::SevenJueju, PoemFormat::FiveLvshi, PoemFormat::SevenLvshi];

    pub fn from_shape(sentence_count: usize, sentence_length: usize) -> Option<Self> {
        match (sentence_count, sentence_length) {
            (4, 5) => Some(PoemFormat::FiveJueju),
            (4, 7) => Some(PoemFormat::SevenJueju),
            (8, 5) => Some(PoemFormat::FiveLvshi),
            (8, 7) => Some(PoemFormat::SevenLvshi),
            _ => None,
        }
    }

    pub fn sentence_count(self) -> usize {
        match self {
            PoemFormat::FiveJueju | PoemFormat::SevenJueju => 4,
            PoemFormat::FiveLvshi | PoemFormat::SevenLvshi => 8,
        }
    }

    pub fn sentence_length(self) -> usize {
        match self {
            PoemFormat::FiveJueju | PoemFormat::FiveLvshi => 5,
            PoemFormat::SevenJueju | PoemFormat::SevenLvshi => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PoemFormat::FiveJueju => "5-Jueju",
            PoemFormat::SevenJueju => "7-Jueju",
            PoemFormat::FiveLvshi => "5-Lvshi",
            PoemFormat::SevenLvshi => "7-Lvshi",
        }
    }
}

impl fmt::Display for PoemFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown poem format {0:?} (expected 5-jueju, 7-jueju, 5-lvshi or 7-lvshi)")]
pub struct ParseFormatError(String);

impl FromStr for PoemFormat {
    type Err = ParseFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PoemFormat::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseFormatError(s.to_string()))
    }
}

/// A titled poem. `format` is the declared form; verification checks the
/// sentences against it when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poem {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<PoemFormat>,
    pub sentences: Vec<String>,
}

impl Poem {
    pub fn new(title: impl Into<String>, format: Option<PoemFormat>, sentences: Vec<String>) -> Self {
        Self { title: title.into(), format, sentences }
    }

    pub fn chars(&self) -> Vec<Vec<char>> {
        self.sentences.iter().map(|s| s.chars().collect()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.format.is_some_and(|f| {
            self.sentences.len() == f.sentence_count()
                && self.sentences.iter().all(|s| s.chars().count() == f.sentence_length())
        })
    }
}

/// A broken rule, located by 1-based sentence and character position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: u8,
    pub sentence: Option<usize>,
    pub position: Option<usize>,
    pub message: String,
}

impl Violation {
    pub fn new(rule: u8, sentence: Option<usize>, position: Option<usize>, message: impl Into<String>) -> Self {
        debug_assert!((1..=8).contains(&rule));
        Self { rule, sentence, position, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}", self.rule)?;
        if let Some(s) = self.sentence {
            write!(f, ", sentence {s}")?;
        }
        if let Some(p) = self.position {
            write!(f, ", position {p}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Outcome of a full-poem check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(Vec<Violation>),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Verdict::Valid => &[],
            Verdict::Invalid(v) => v,
        }
    }

    pub fn rules(&self) -> Vec<u8> {
        let mut rules: Vec<u8> = self.violations().iter().map(|v| v.rule).collect();
        rules.sort_unstable();
        rules.dedup();
        rules
    }
}

/// One pronunciation per character occurrence, sentence by sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<Vec<Pronunciation>>);

impl Assignment {
    pub fn tone(&self, sentence: usize, position: usize) -> Option<Tone> {
        self.0.get(sentence)?.get(position).map(|p| p.tone)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Let each rule pick its own pronunciations instead of one assignment
    /// shared by all rules.
    pub lenient: bool,
    /// A Ping-ending first sentence must also use a rhyme character distinct
    /// from the even-sentence endings.
    pub first_sentence_distinct: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { lenient: false, first_sentence_distinct: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("character {ch:?} at sentence {sentence}, position {position} is not in the rhyme dictionary")]
    UnknownCharacter { ch: char, sentence: usize, position: usize },
    #[error("poem has no declared format")]
    MissingFormat,
    #[error("prefix of {len} characters exceeds sentence length {max}")]
    PrefixTooLong { len: usize, max: usize },
    #[error("sentence index {index} is out of range (poem has {count} sentences)")]
    SentenceIndex { index: usize, count: usize },
    #[error("sentence {sentence} has {len} characters, expected {expected}")]
    SentenceLength { sentence: usize, len: usize, expected: usize },
}
