use std::path::Path;

use serde::{Deserialize, Serialize};

use super::g2p::{data_lines, PhonemeSequence};
use super::inventory::{PhonemeId, INVENTORY};
use super::TextError;

const BUNDLED_TABLE: &str = include_str!("../../data/visemes_msapi22.tsv");

/// Class reserved for silence / closed neutral mouth.
pub const SILENCE: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisemeSequence {
    pub visemes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations: Option<Vec<u32>>,
}

impl VisemeSequence {
    pub fn new(visemes: Vec<usize>) -> Self {
        Self {
            visemes,
            durations: None,
        }
    }

    pub fn len(&self) -> usize {
        self.visemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visemes.is_empty()
    }

    /// Checks IDs against a class count and duration consistency.
    pub fn validate(&self, class_count: usize) -> Result<(), TextError> {
        if let Some(&bad) = self.visemes.iter().find(|&&v| v >= class_count) {
            return Err(TextError::VisemeOutOfRange {
                id: bad,
                class_count,
            });
        }
        if let Some(d) = &self.durations {
            if d.len() != self.visemes.len() || d.contains(&0) {
                return Err(TextError::BadDurations);
            }
        }
        Ok(())
    }
}

/// Total mapping from the phoneme inventory onto viseme classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeTable {
    name: String,
    class_count: usize,
    classes: Vec<usize>,
}

impl VisemeTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled viseme table is total")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| TextError::io(path, e))?;
        Self::parse(&src)
    }

    /// Parses a `V=<count>` header, an optional `name=<text>` line and
    /// `phoneme<TAB>class_id` rows.
    pub fn parse(src: &str) -> Result<Self, TextError> {
        let mut lines = data_lines(src);
        let (lineno, header) = lines
            .next()
            .ok_or_else(|| TextError::parse(1, "missing V=<count> header"))?;
        let class_count: usize = header
            .trim()
            .strip_prefix("V=")
            .and_then(|n| n.trim().parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| TextError::parse(lineno, "expected V=<count> header"))?;

        let mut name = String::from("unnamed");
        let mut classes: Vec<Option<usize>> = vec![None; INVENTORY.len()];
        for (lineno, line) in lines {
            if let Some(n) = line.trim().strip_prefix("name=") {
                name = n.trim().to_string();
                continue;
            }
            let (sym, class) = line
                .split_once('\t')
                .ok_or_else(|| TextError::parse(lineno, "expected phoneme<TAB>class_id"))?;
            let id = PhonemeId::from_symbol(sym).ok_or_else(|| TextError::UnknownSymbol {
                symbol: sym.trim().to_string(),
                context: format!("viseme table line {lineno}"),
            })?;
            let class: usize = class
                .trim()
                .parse()
                .map_err(|_| TextError::parse(lineno, format!("bad class id '{}'", class.trim())))?;
            if class >= class_count {
                return Err(TextError::parse(
                    lineno,
                    format!("class {class} outside [0, {class_count})"),
                ));
            }
            if classes[id.index()].replace(class).is_some() {
                return Err(TextError::parse(lineno, format!("duplicate phoneme /{id}/")));
            }
        }

        let missing: Vec<String> = PhonemeId::all()
            .filter(|p| classes[p.index()].is_none())
            .map(|p| p.symbol().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(TextError::IncompleteTable { missing });
        }
        Ok(Self {
            name,
            class_count,
            classes: classes.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_of(&self, phoneme: PhonemeId) -> Option<usize> {
        self.classes.get(phoneme.index()).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VisemeOptions {
    /// Merge runs of identical adjacent classes.
    pub collapse_repeats: bool,
    /// Emit a silence class at the start of every word.
    pub word_silence: bool,
}

impl Default for VisemeOptions {
    fn default() -> Self {
        Self {
            collapse_repeats: false,
            word_silence: true,
        }
    }
}

pub fn phonemes_to_visemes(
    phonemes: &PhonemeSequence,
    table: &VisemeTable,
    opts: VisemeOptions,
) -> Result<VisemeSequence, TextError> {
    let mut out = Vec::with_capacity(phonemes.len() + phonemes.word_boundaries.len());
    let mut boundaries = phonemes.word_boundaries.iter().peekable();
    for (i, &p) in phonemes.phonemes.iter().enumerate() {
        if boundaries.next_if(|&&b| b == i).is_some() && opts.word_silence {
            out.push(SILENCE);
        }
        let class = table.class_of(p).ok_or_else(|| TextError::UnknownSymbol {
            symbol: format!("#{}", p.0),
            context: format!("viseme table '{}'", table.name),
        })?;
        out.push(class);
    }
    if opts.collapse_repeats {
        out.dedup();
    }
    Ok(VisemeSequence::new(out))
}
