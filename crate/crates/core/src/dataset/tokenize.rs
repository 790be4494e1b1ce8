use serde::{Deserialize, Serialize};

/// Maximal sequence length used when nothing else is configured.
pub const DEFAULT_MAX_SEQUENCE_LENGTH: usize = 50;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercase, split on whitespace, emit every non-alphanumeric symbol as its
/// own token, and keep at most `max_len` tokens.
///
/// ```
/// use sensemble::dataset::tokenize;
/// assert_eq!(tokenize("He put a turkey.", 50).tokens, ["he", "put", "a", "turkey", "."]);
/// ```
pub fn tokenize(text: &str, max_len: usize) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if tokens.len() >= max_len {
            break;
        }
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut word, &mut tokens);
            if tokens.len() < max_len {
                tokens.push(c.to_string());
            }
        }
    }
    if tokens.len() < max_len {
        flush(&mut word, &mut tokens);
    }
    TokenSequence { tokens }
}

/// [`tokenize`] without a length cap.
pub fn tokenize_untruncated(text: &str) -> TokenSequence {
    tokenize(text, usize::MAX)
}

fn flush(word: &mut String, tokens: &mut Vec<String>) {
    if !word.is_empty() {
        tokens.push(std::mem::take(word));
    }
}
