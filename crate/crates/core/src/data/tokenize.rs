//! Rule-based English tokenizer for game text.
//!
//! Follows the splitting conventions of spaCy's English tokenizer on game
//! text: lowercase, punctuation split from words, hyphens as their own token,
//! clitics split off (`do n't`, `it 's`, `ca n't`), `snake_case` compounds and
//! numbers like `5.5` or `3/5` kept whole, `...` and `--` kept as one token.
//! TextWorld's `-=` header marker also stays whole.

/// Something that turns text into tokens. Lets an exact external tokenizer be
/// swapped in for the built-in rules.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTokenizer;

const CLITICS: [&str; 6] = ["'s", "'re", "'ll", "'ve", "'m", "'d"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn push_word(word: &str, out: &mut Vec<String>) {
    if let Some(stem) = word.strip_suffix("n't") {
        if !stem.is_empty() {
            // "can't" -> "ca" "n't"
            out.push(stem.to_string());
            out.push("n't".to_string());
            return;
        }
    }
    for clitic in CLITICS {
        if let Some(stem) = word.strip_suffix(clitic) {
            if !stem.is_empty() {
                out.push(stem.to_string());
                out.push(clitic.to_string());
                return;
            }
        }
    }
    out.push(word.to_string());
}

impl Tokenizer for RuleTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let at = |i: usize| chars.get(i).copied();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if is_word_char(c) {
                let start = i;
                while let Some(ch) = at(i) {
                    let prev_digit = i > start && chars[i - 1].is_ascii_digit();
                    let next_digit = at(i + 1).is_some_and(|n| n.is_ascii_digit());
                    let next_alpha = at(i + 1).is_some_and(char::is_alphabetic);
                    let joins = match ch {
                        '.' | '/' | ',' => prev_digit && next_digit,
                        '\'' => i > start && next_alpha,
                        _ => is_word_char(ch),
                    };
                    if !joins {
                        break;
                    }
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                push_word(&word, &mut out);
            } else {
                let start = i;
                i += 1;
                if (c == '.' || c == '-') && at(i) == Some(c) {
                    while at(i) == Some(c) {
                        i += 1;
                    }
                } else if c == '-' && at(i) == Some('=') {
                    i += 1;
                }
                out.push(chars[start..i].iter().collect());
            }
        }
        out
    }
}

/// Tokenizes with [`RuleTokenizer`].
pub fn tokenize(text: &str) -> Vec<String> {
    RuleTokenizer.tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_sentence() {
        assert_eq!(tokenize("You open the fridge."), ["you", "open", "the", "fridge", "."]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n").is_empty());
    }

    #[test]
    fn compounds_and_clitics() {
        assert_eq!(tokenize("north_of"), ["north_of"]);
        assert_eq!(
            tokenize("You can't see it's here"),
            ["you", "ca", "n't", "see", "it", "'s", "here"]
        );
        assert_eq!(tokenize("a well-lit room"), ["a", "well", "-", "lit", "room"]);
        assert_eq!(tokenize("Players' 5.5 3/5"), ["players", "'", "5.5", "3/5"]);
    }

    #[test]
    fn punctuation_runs() {
        assert_eq!(tokenize("-= Kitchen =-"), ["-=", "kitchen", "=", "-"]);
        assert_eq!(tokenize("Wait... what?!"), ["wait", "...", "what", "?", "!"]);
        assert_eq!(tokenize("Hmm -- ok"), ["hmm", "--", "ok"]);
    }
}
