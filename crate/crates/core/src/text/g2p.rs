//! Lexicon-first grapheme-to-phoneme conversion with a letter-to-sound fallback.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::inventory::PhonemeId;
use super::TextError;

const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.tsv");
const BUNDLED_RULES: &str = include_str!("../../data/letter_rules.tsv");

/// Pronunciation dictionary: `word<TAB>IPA symbols space-separated`.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| TextError::io(path, e))?;
        Self::parse(&src)
    }

    pub fn parse(src: &str) -> Result<Self, TextError> {
        let mut entries = HashMap::new();
        for (lineno, line) in data_lines(src) {
            let (word, pron) = line
                .split_once('\t')
                .ok_or_else(|| TextError::parse(lineno, "expected word<TAB>phonemes"))?;
            let word = word.trim().to_lowercase();
            let symbols: Vec<String> = pron.split_whitespace().map(str::to_string).collect();
            if word.is_empty() || symbols.is_empty() {
                return Err(TextError::parse(lineno, "empty word or pronunciation"));
            }
            if entries.insert(word.clone(), symbols).is_some() {
                return Err(TextError::parse(lineno, format!("duplicate entry '{word}'")));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone)]
struct Rule {
    pattern: Vec<u8>,
    at_start: bool,
    at_end: bool,
    output: Vec<String>,
}

/// Deterministic letter-to-sound rules. At each position the longest
/// matching pattern wins; ties go to the rule listed first.
#[derive(Debug, Clone)]
pub struct LetterRules {
    rules: Vec<Rule>,
}

impl LetterRules {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_RULES).expect("bundled letter rules are well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| TextError::io(path, e))?;
        Self::parse(&src)
    }

    /// Parses `pattern<TAB>phonemes` lines. A pattern may be anchored with a
    /// leading `^` or trailing `$`; the output `-` emits nothing.
    pub fn parse(src: &str) -> Result<Self, TextError> {
        let mut rules = Vec::new();
        for (lineno, line) in data_lines(src) {
            let (pat, out) = line
                .split_once('\t')
                .ok_or_else(|| TextError::parse(lineno, "expected pattern<TAB>phonemes"))?;
            let mut pat = pat.trim();
            let at_start = pat.starts_with('^');
            if at_start {
                pat = &pat[1..];
            }
            let at_end = pat.ends_with('$');
            if at_end {
                pat = &pat[..pat.len() - 1];
            }
            if pat.is_empty() || !pat.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(TextError::parse(lineno, format!("bad pattern '{pat}'")));
            }
            let out = out.trim();
            let output = if out == "-" {
                Vec::new()
            } else {
                out.split_whitespace().map(str::to_string).collect()
            };
            rules.push(Rule {
                pattern: pat.as_bytes().to_vec(),
                at_start,
                at_end,
                output,
            });
        }
        for letter in b'a'..=b'z' {
            let covered = rules.iter().any(|r| {
                r.pattern == [letter] && !r.at_start && !r.at_end && !r.output.is_empty()
            });
            if !covered {
                return Err(TextError::parse(
                    0,
                    format!("rules do not cover letter '{}'", letter as char),
                ));
            }
        }
        Ok(Self { rules })
    }

    /// Runs the rules over a lowercase word, returning phoneme symbols.
    pub fn apply(&self, word: &str) -> Vec<String> {
        let out = self.apply_with(word, true);
        if out.is_empty() {
            // an anchored silent rule can swallow a whole short word
            self.apply_with(word, false)
        } else {
            out
        }
    }

    fn apply_with(&self, word: &str, anchored: bool) -> Vec<String> {
        let bytes = word.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let best = self
                .rules
                .iter()
                .filter(|r| anchored || (!r.at_start && !r.at_end))
                .filter(|r| {
                    let end = i + r.pattern.len();
                    end <= bytes.len()
                        && bytes[i..end] == r.pattern[..]
                        && (!r.at_start || i == 0)
                        && (!r.at_end || end == bytes.len())
                })
                // stable: max_by_key would prefer the last of equals
                .fold(None::<&Rule>, |best, r| match best {
                    Some(b) if b.pattern.len() >= r.pattern.len() => Some(b),
                    _ => Some(r),
                });
            match best {
                Some(rule) => {
                    out.extend(rule.output.iter().cloned());
                    i += rule.pattern.len();
                }
                None => {
                    log::warn!("g2p: no rule for character {:?} in '{word}'", bytes[i] as char);
                    i += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeSequence {
    pub phonemes: Vec<PhonemeId>,
    /// Index into `phonemes` where each word starts.
    pub word_boundaries: Vec<usize>,
}

impl PhonemeSequence {
    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    pub fn symbols(&self) -> Vec<&'static str> {
        self.phonemes.iter().map(|p| p.symbol()).collect()
    }
}

/// Converts tokens to phonemes, lexicon first, rules for out-of-vocabulary words.
pub fn text_to_phonemes(
    tokens: &[String],
    lexicon: &Lexicon,
    rules: &LetterRules,
) -> Result<PhonemeSequence, TextError> {
    let mut seq = PhonemeSequence::default();
    for token in tokens {
        let symbols: Vec<String> = match lexicon.get(token) {
            Some(s) => s.to_vec(),
            None => {
                log::info!("g2p: rule fallback for out-of-vocabulary token '{token}'");
                rules.apply(token)
            }
        };
        if symbols.is_empty() {
            log::warn!("g2p: token '{token}' produced no phonemes, skipped");
            continue;
        }
        seq.word_boundaries.push(seq.phonemes.len());
        for s in symbols {
            let id = PhonemeId::from_symbol(&s).ok_or_else(|| TextError::UnknownSymbol {
                symbol: s.clone(),
                context: format!("pronunciation of '{token}'"),
            })?;
            seq.phonemes.push(id);
        }
    }
    Ok(seq)
}

/// Non-empty, non-comment lines with 1-based line numbers.
pub(crate) fn data_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}
