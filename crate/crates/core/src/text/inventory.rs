use std::fmt;

use serde::{Deserialize, Serialize};

/// The fixed phoneme inventory, in IPA. A phoneme's ID is its index here.
pub const INVENTORY: [&str; 40] = [
    "p", "b", "m", "f", "v", "θ", "ð", "t", "d", "n", "s", "z", "ʃ", "ʒ", "tʃ", "dʒ", "k", "g",
    "ŋ", "h", "l", "r", "w", "j", "i", "ɪ", "eɪ", "ɛ", "æ", "ə", "ʌ", "ɑː", "ɔ", "oʊ", "ʊ", "u",
    "ɜ", "aɪ", "aʊ", "ɔɪ",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhonemeId(pub u16);

impl PhonemeId {
    /// Resolves an IPA symbol. ASCII `:` is accepted as the length mark and
    /// the IPA script `ɡ` as plain `g`.
    pub fn from_symbol(symbol: &str) -> Option<Self> {
        let canonical = canonical_symbol(symbol);
        INVENTORY
            .iter()
            .position(|s| *s == canonical)
            .map(|i| PhonemeId(i as u16))
    }

    pub fn symbol(self) -> &'static str {
        INVENTORY.get(self.0 as usize).copied().unwrap_or("?")
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = PhonemeId> {
        (0..INVENTORY.len() as u16).map(PhonemeId)
    }
}

impl fmt::Display for PhonemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

pub fn canonical_symbol(symbol: &str) -> String {
    let s = symbol.trim().replace(':', "ː").replace('ɡ', "g");
    // the open back vowel is commonly written /a:/
    if s == "aː" {
        "ɑː".to_string()
    } else {
        s
    }
}
