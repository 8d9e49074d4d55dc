//! Strict parsers for LLM responses.
//!
//! Direct-mode grammar: optional whitespace and opening punctuation
//! (`([{"'*#`), a single digit 1-3 not followed by another digit, optional
//! closing punctuation/separators, then an optional explanation (enclosing
//! brackets stripped). Anything else is a parse failure the caller may
//! retry.
//!
//! Confidence-mode grammar: `CONF1,CONF2`, two reals each in [0, 100],
//! optionally followed by whitespace and an explanation. A pair summing
//! over 100 is rescaled proportionally to sum 100 and flagged; the Class 3
//! confidence is the remainder `100 - conf1 - conf2`.

use crate::category::Category;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no leading class label in {0:?}")]
    NoLabel(String),
    #[error("label {0} outside 1-3")]
    LabelOutOfRange(i64),
    #[error("expected CONF1,CONF2 in {0:?}")]
    NotConfidencePair(String),
    #[error("confidence {0} outside [0, 100]")]
    ConfidenceOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectParse {
    pub label: Category,
    pub explanation: Option<String>,
}

const OPENING: &[char] = &['(', '[', '{', '"', '\'', '*', '#'];
const CLOSING: &[char] = &[')', ']', '}', '"', '\'', '*', ':', '.', ',', ';', '-'];

/// Parse a direct-mode response: leading label in {1,2,3}, optional
/// explanation.
pub fn parse_direct(raw: &str) -> Result<DirectParse, ParseError> {
    let mut rest = raw.trim_start();
    rest = rest.trim_start_matches(OPENING).trim_start();

    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Err(ParseError::NoLabel(clip(raw)));
    }
    let value: i64 = digits.parse().map_err(|_| ParseError::NoLabel(clip(raw)))?;
    let label = Category::from_code(value).ok_or(ParseError::LabelOutOfRange(value))?;

    let mut tail = rest[digits.len()..].trim_start().trim_start_matches(CLOSING).trim();
    // An explanation wrapped in brackets loses them.
    if tail.starts_with('[') && tail.ends_with(']') && tail.len() >= 2 {
        tail = tail[1..tail.len() - 1].trim();
    }
    Ok(DirectParse {
        label,
        explanation: if tail.is_empty() { None } else { Some(tail.to_string()) },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParse {
    pub conf1: f64,
    pub conf2: f64,
    pub conf3: f64,
    /// Set when the pair exceeded 100 and was rescaled.
    pub rescaled: bool,
    pub explanation: Option<String>,
}

/// Parse a confidence-mode response.
pub fn parse_confidence(raw: &str) -> Result<ConfidenceParse, ParseError> {
    let text = raw.trim_start();
    let (first, after_first) =
        take_number(text).ok_or_else(|| ParseError::NotConfidencePair(clip(raw)))?;
    let after_first = after_first.trim_start();
    let after_comma = after_first
        .strip_prefix(',')
        .ok_or_else(|| ParseError::NotConfidencePair(clip(raw)))?
        .trim_start();
    let (second, tail) =
        take_number(after_comma).ok_or_else(|| ParseError::NotConfidencePair(clip(raw)))?;

    for v in [first, second] {
        if !(0.0..=100.0).contains(&v) {
            return Err(ParseError::ConfidenceOutOfRange(v));
        }
    }
    // The explanation, if any, must be separated from the numbers.
    let tail = tail.strip_prefix('%').unwrap_or(tail);
    if !tail.is_empty() && !tail.starts_with(char::is_whitespace) {
        return Err(ParseError::NotConfidencePair(clip(raw)));
    }
    let explanation = {
        let t = tail.trim();
        if t.is_empty() {
            None
        } else {
            Some(t.to_string())
        }
    };

    let sum = first + second;
    let (conf1, conf2, rescaled) = if sum > 100.0 {
        (100.0 * first / sum, 100.0 * second / sum, true)
    } else {
        (first, second, false)
    };
    let conf3 = (100.0 - conf1 - conf2).max(0.0);

    Ok(ConfidenceParse { conf1, conf2, conf3, rescaled, explanation })
}

/// Leading decimal number (digits with optional fraction); returns the
/// value and the remaining input.
fn take_number(s: &str) -> Option<(f64, &str)> {
    let bytes = s.as_bytes();
    let mut end = 0;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == 0 {
        return None;
    }
    if end < bytes.len() && bytes[end] == b'.' {
        let mut frac = end + 1;
        while frac < bytes.len() && bytes[frac].is_ascii_digit() {
            frac += 1;
        }
        if frac > end + 1 {
            end = frac;
        }
    }
    s[..end].parse().ok().map(|v| (v, &s[end..]))
}

fn clip(s: &str) -> String {
    const MAX: usize = 60;
    if s.len() <= MAX {
        s.to_string()
    } else {
        let mut cut = MAX;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        format!("{}...", &s[..cut])
    }
}
