//! Text front-end: normalization, grapheme-to-phoneme conversion and the
//! phoneme-to-viseme table.

mod g2p;
mod inventory;
mod normalize;
mod viseme;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use g2p::{text_to_phonemes, LetterRules, Lexicon, PhonemeSequence};
pub use inventory::{canonical_symbol, PhonemeId, INVENTORY};
pub use normalize::normalize_text;
pub use viseme::{
    phonemes_to_visemes, VisemeOptions, VisemeSequence, VisemeTable, SILENCE,
};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("unknown phoneme symbol '{symbol}' in {context}")]
    UnknownSymbol { symbol: String, context: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("viseme table is missing phonemes: {}", missing.join(" "))]
    IncompleteTable { missing: Vec<String> },
    #[error("viseme id {id} outside [0, {class_count})")]
    VisemeOutOfRange { id: usize, class_count: usize },
    #[error("viseme durations must match the sequence length and be >= 1")]
    BadDurations,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl TextError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        TextError::Parse {
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        TextError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Result of compiling one piece of text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compiled {
    pub tokens: Vec<String>,
    pub phonemes: PhonemeSequence,
    pub visemes: VisemeSequence,
}

/// Wire form of [`Compiled`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisemeDocument {
    pub version: u32,
    pub phonemes: Vec<String>,
    pub visemes: Vec<usize>,
    pub boundaries: Vec<usize>,
}

impl Compiled {
    pub fn document(&self) -> VisemeDocument {
        VisemeDocument {
            version: 1,
            phonemes: self.phonemes.symbols().into_iter().map(String::from).collect(),
            visemes: self.visemes.visemes.clone(),
            boundaries: self.phonemes.word_boundaries.clone(),
        }
    }
}

/// Lexicon, rules and viseme table bundled into a text-to-viseme compiler.
#[derive(Debug, Clone)]
pub struct Frontend {
    pub lexicon: Lexicon,
    pub rules: LetterRules,
    pub table: VisemeTable,
    pub options: VisemeOptions,
}

impl Frontend {
    pub fn bundled() -> Self {
        Self {
            lexicon: Lexicon::bundled(),
            rules: LetterRules::bundled(),
            table: VisemeTable::bundled(),
            options: VisemeOptions::default(),
        }
    }

    pub fn compile(&self, text: &str) -> Result<Compiled, TextError> {
        let tokens = normalize_text(text);
        let phonemes = text_to_phonemes(&tokens, &self.lexicon, &self.rules)?;
        let visemes = phonemes_to_visemes(&phonemes, &self.table, self.options)?;
        Ok(Compiled {
            tokens,
            phonemes,
            visemes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_relation() {
        let fe = Frontend::bundled();
        let c = fe.compile("Lay red with y two again").unwrap();
        assert_eq!(
            c.visemes.len(),
            c.phonemes.len() + c.phonemes.word_boundaries.len()
        );
        assert_eq!(c.visemes.visemes[0], SILENCE);
    }

    #[test]
    fn bad_and_bat_share_initial_viseme() {
        let fe = Frontend::bundled();
        let a = fe.compile("bad boy").unwrap();
        let b = fe.compile("bat").unwrap();
        assert_eq!(a.visemes.visemes[1], b.visemes.visemes[1]);
        assert_eq!(a.visemes.visemes[..4], b.visemes.visemes[..4]);
    }

    #[test]
    fn document_json_shape() {
        let c = Frontend::bundled().compile("red").unwrap();
        let json = serde_json::to_string(&c.document()).unwrap();
        assert_eq!(
            json,
            r#"{"version":1,"phonemes":["r","ɛ","d"],"visemes":[0,13,4,19],"boundaries":[0]}"#
        );
    }
}
