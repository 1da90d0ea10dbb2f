//! Rhyme dictionary loading.
//!
//! File format: UTF-8, one pronunciation per line,
//! `<character>\t<P|Z>\t<rhyme class id 1..106>`. Blank lines and lines
//! starting with `#` are ignored. Fields may also be separated by other
//! whitespace.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::{Pronunciation, RhymeClass, Tone, RHYME_CLASS_COUNT};

/// Small illustrative table shipped with the crate.
pub const SYNTHETIC_DICTIONARY: &str = include_str!("../../data/synthetic_dictionary.tsv");

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: rhyme class {id} is outside 1..={RHYME_CLASS_COUNT}")]
    RhymeOutOfRange { line: usize, column: usize, id: u64 },
    #[error("line {line}: rhyme class {class} is used with both Ping and Ze")]
    InconsistentTone { line: usize, class: u8 },
}

/// Immutable map from character to its pronunciations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RhymeDictionary {
    entries: BTreeMap<char, Vec<Pronunciation>>,
    class_tone: BTreeMap<RhymeClass, Tone>,
    members: BTreeMap<RhymeClass, Vec<char>>,
}

impl RhymeDictionary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| DictionaryError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// The dictionary in [`SYNTHETIC_DICTIONARY`].
    pub fn synthetic() -> Self {
        Self::parse(SYNTHETIC_DICTIONARY).expect("bundled dictionary is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, DictionaryError> {
        let mut builder = Builder::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (ch, pron) = parse_row(raw, line)?;
            builder.add(ch, pron, line)?;
        }
        Ok(builder.finish())
    }

    /// Builds a dictionary from in-memory rows.
    pub fn from_entries<I>(rows: I) -> Result<Self, DictionaryError>
    where
        I: IntoIterator<Item = (char, Pronunciation)>,
    {
        let mut builder = Builder::default();
        for (i, (ch, pron)) in rows.into_iter().enumerate() {
            builder.add(ch, pron, i + 1)?;
        }
        Ok(builder.finish())
    }

    /// The sub-dictionary of characters accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(char) -> bool) -> Self {
        let mut builder = Builder::default();
        for (&ch, prons) in &self.entries {
            if keep(ch) {
                for &p in prons {
                    builder.add(ch, p, 0).expect("source dictionary is consistent");
                }
            }
        }
        builder.finish()
    }

    pub fn get(&self, ch: char) -> Option<&[Pronunciation]> {
        self.entries.get(&ch).map(Vec::as_slice)
    }

    pub fn contains(&self, ch: char) -> bool {
        self.entries.contains_key(&ch)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Characters in ascending code-point order.
    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, &[Pronunciation])> {
        self.entries.iter().map(|(c, p)| (*c, p.as_slice()))
    }

    /// Tone of a class as used in this dictionary.
    pub fn class_tone(&self, class: RhymeClass) -> Option<Tone> {
        self.class_tone.get(&class).copied()
    }

    /// Classes in use, ascending.
    pub fn classes(&self) -> impl Iterator<Item = (RhymeClass, Tone)> + '_ {
        self.class_tone.iter().map(|(c, t)| (*c, *t))
    }

    /// Characters having a pronunciation in `class`, ascending.
    pub fn members(&self, class: RhymeClass) -> &[char] {
        self.members.get(&class).map_or(&[], Vec::as_slice)
    }
}

#[derive(Default)]
struct Builder {
    entries: BTreeMap<char, Vec<Pronunciation>>,
    class_tone: BTreeMap<RhymeClass, Tone>,
}

impl Builder {
    fn add(&mut self, ch: char, pron: Pronunciation, line: usize) -> Result<(), DictionaryError> {
        match self.class_tone.get(&pron.rhyme) {
            Some(&tone) if tone != pron.tone => {
                return Err(DictionaryError::InconsistentTone { line, class: pron.rhyme.id() });
            }
            Some(_) => {}
            None => {
                self.class_tone.insert(pron.rhyme, pron.tone);
            }
        }
        let prons = self.entries.entry(ch).or_default();
        if !prons.contains(&pron) {
            prons.push(pron);
        }
        Ok(())
    }

    fn finish(self) -> RhymeDictionary {
        let mut members: BTreeMap<RhymeClass, Vec<char>> = BTreeMap::new();
        for (&ch, prons) in &self.entries {
            for p in prons {
                let list = members.entry(p.rhyme).or_default();
                if list.last() != Some(&ch) {
                    list.push(ch);
                }
            }
        }
        RhymeDictionary { entries: self.entries, class_tone: self.class_tone, members }
    }
}

fn parse_row(raw: &str, line: usize) -> Result<(char, Pronunciation), DictionaryError> {
    let fields = split_fields(raw);
    if fields.len() != 3 {
        let column = fields.get(3).map_or(raw.chars().count() + 1, |f| f.0);
        return Err(DictionaryError::Malformed {
            line,
            column,
            message: format!("expected 3 fields, found {}", fields.len()),
        });
    }
    let (col_ch, ch_field) = fields[0];
    let mut chars = ch_field.chars();
    let ch = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => {
            return Err(DictionaryError::Malformed {
                line,
                column: col_ch,
                message: format!("expected a single character, found {ch_field:?}"),
            })
        }
    };
    let (col_tone, tone_field) = fields[1];
    let tone = match tone_field {
        "P" | "p" => Tone::Ping,
        "Z" | "z" => Tone::Ze,
        other => {
            return Err(DictionaryError::Malformed {
                line,
                column: col_tone,
                message: format!("tone must be P or Z, found {other:?}"),
            })
        }
    };
    let (col_id, id_field) = fields[2];
    let id: u64 = id_field.parse().map_err(|_| DictionaryError::Malformed {
        line,
        column: col_id,
        message: format!("rhyme class must be an integer, found {id_field:?}"),
    })?;
    let rhyme = u32::try_from(id).ok().and_then(RhymeClass::new).ok_or(DictionaryError::RhymeOutOfRange {
        line,
        column: col_id,
        id,
    })?;
    Ok((ch, Pronunciation::new(tone, rhyme)))
}

/// Whitespace-separated fields with their 1-based character columns.
fn split_fields(raw: &str) -> Vec<(usize, &str)> {
    let mut fields = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, c)) in raw.char_indices().enumerate() {
        if c.is_whitespace() {
            if let Some((scol, sbyte)) = start.take() {
                fields.push((scol + 1, &raw[sbyte..byte]));
            }
        } else if start.is_none() {
            start = Some((col, byte));
        }
    }
    if let Some((scol, sbyte)) = start {
        fields.push((scol + 1, &raw[sbyte..]));
    }
    fields
}
