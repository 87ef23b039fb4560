const DIGIT_WORDS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Lowercases and tokenizes raw text into word tokens.
///
/// Only ASCII letters form words; apostrophes are dropped inside words
/// ("don't" -> "dont"), every other character separates tokens. Each digit
/// becomes its own number word, so "42" yields `["four", "two"]`.
pub fn normalize_text(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in raw.chars() {
        if ch.is_ascii_alphabetic() {
            word.push(ch.to_ascii_lowercase());
        } else if ch == '\'' || ch == '’' {
            continue;
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if let Some(d) = ch.to_digit(10).filter(|_| ch.is_ascii_digit()) {
                tokens.push(DIGIT_WORDS[d as usize].to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sentence() {
        assert_eq!(
            normalize_text("Lay red with y two again."),
            ["lay", "red", "with", "y", "two", "again"]
        );
    }

    #[test]
    fn empty() {
        assert!(normalize_text("").is_empty());
        assert!(normalize_text("  ,.;!  ").is_empty());
    }

    #[test]
    fn digits_expand() {
        assert_eq!(normalize_text("8 bins"), ["eight", "bins"]);
        assert_eq!(normalize_text("b42"), ["b", "four", "two"]);
        assert_eq!(normalize_text("Don't"), ["dont"]);
    }

    #[test]
    fn every_digit_has_a_word() {
        let all: Vec<String> = normalize_text("0123456789");
        assert_eq!(all, DIGIT_WORDS);
    }
}
