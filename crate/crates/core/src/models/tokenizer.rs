//! Tokenization for the text encoder.
//!
//! A checkpoint packages its own tokenizer configuration. Tokens map to a
//! fixed-size vocabulary by hashing, so no external vocabulary file is
//! needed and identical text always produces identical IDs. Sequences are
//! prefixed with a start token and truncated to the configured length.

use serde::{Deserialize, Serialize};

/// Start-of-sequence token; its final embedding represents the whole text.
pub const BOS_ID: u32 = 0;
/// Padding token for ragged batches.
pub const PAD_ID: u32 = 1;
const RESERVED: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub vocab_size: usize,
    /// Maximum sequence length including the start token.
    pub max_len: usize,
    pub lowercase: bool,
    /// Replace URLs and @-handles with placeholder tokens, the usual
    /// normalization for short social-media text.
    pub normalize_tweets: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            vocab_size: 30_000,
            max_len: 128,
            lowercase: true,
            normalize_tweets: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    cfg: TokenizerConfig,
}

impl Tokenizer {
    pub fn new(cfg: TokenizerConfig) -> Self {
        assert!(cfg.vocab_size > RESERVED as usize, "vocab too small");
        assert!(cfg.max_len >= 2, "max_len must fit BOS plus one token");
        Tokenizer { cfg }
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.cfg
    }

    /// Encode text to `[BOS, token ids...]`, truncated to `max_len`.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::with_capacity(self.cfg.max_len.min(64));
        ids.push(BOS_ID);
        for word in text.split_whitespace() {
            if ids.len() >= self.cfg.max_len {
                break;
            }
            let word = if self.cfg.normalize_tweets {
                normalize_token(word)
            } else {
                word.to_string()
            };
            for piece in split_pieces(&word) {
                if ids.len() >= self.cfg.max_len {
                    break;
                }
                let piece = if self.cfg.lowercase { piece.to_lowercase() } else { piece };
                ids.push(self.hash_token(&piece));
            }
        }
        ids
    }

    fn hash_token(&self, token: &str) -> u32 {
        let h = crate::rng::fnv1a64(token.as_bytes());
        RESERVED + (h % (self.cfg.vocab_size as u64 - RESERVED as u64)) as u32
    }
}

fn normalize_token(word: &str) -> String {
    if word.starts_with("http://") || word.starts_with("https://") || word.starts_with("www.") {
        return "HTTPURL".to_string();
    }
    if word.len() > 1 && word.starts_with('@') {
        return "@USER".to_string();
    }
    word.to_string()
}

/// Split a word into alternating alphanumeric / non-alphanumeric runs, so
/// punctuation and hashtags become their own tokens.
fn split_pieces(word: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut current_alnum: Option<bool> = None;
    for ch in word.chars() {
        let alnum = ch.is_alphanumeric();
        if current_alnum == Some(alnum) || current.is_empty() {
            current.push(ch);
            current_alnum = Some(alnum);
        } else {
            pieces.push(std::mem::take(&mut current));
            current.push(ch);
            current_alnum = Some(alnum);
        }
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    pieces
}
