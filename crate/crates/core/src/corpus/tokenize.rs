use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::config::Config;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub keep_punct: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            keep_punct: true,
        }
    }
}

impl TokenizerConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        Ok(TokenizerConfig {
            lowercase: cfg.bool("tokenizer.lowercase", d.lowercase)?,
            keep_punct: cfg.bool("tokenizer.keep_punct", d.keep_punct)?,
        })
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Rule-based word tokenizer.
///
/// NFKC-normalizes, optionally lowercases, then emits maximal runs of
/// alphanumeric characters as words and every other non-space character as a
/// single-character token.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let normalized: String = text.nfkc().collect();
    let normalized = if config.lowercase {
        normalized.to_lowercase().nfkc().collect()
    } else {
        normalized
    };

    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in normalized.chars() {
        if is_word_char(c) {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() && config.keep_punct {
            tokens.push(c.to_string());
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
    use proptest::prelude::*;

    fn tok(s: &str) -> Vec<String> {
        tokenize(s, &TokenizerConfig::default())
    }

    #[test]
    fn examples() {
        assert!(tok("").is_empty());
        assert_eq!(tok("The cat sat."), ["the", "cat", "sat", "."]);
        assert_eq!(tok("don't stop"), ["don", "'", "t", "stop"]);
    }

    #[test]
    fn config_switches() {
        let cfg = TokenizerConfig {
            lowercase: false,
            keep_punct: false,
        };
        assert_eq!(tokenize("Hello, World!", &cfg), ["Hello", "World"]);
    }

    #[test]
    fn normalizes_compatibility_forms() {
        // full-width letters and the "fi" ligature fold to ASCII
        assert_eq!(tok("ＡＢＣ ﬁne"), ["abc", "fine"]);
    }

    proptest! {
        #[test]
        fn idempotent_on_rejoined_tokens(s in "[a-zA-Z0-9 .,;'!?é\u{301}ß-]{0,60}") {
            let cfg = TokenizerConfig::default();
            let once = tokenize(&s, &cfg);
            let twice = tokenize(&once.join(" "), &cfg);
            prop_assert_eq!(once, twice);
        }
    }
}
