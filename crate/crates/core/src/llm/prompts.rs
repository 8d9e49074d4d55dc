//! Prompt construction for remote LLM classification.
//!
//! Four templates: direct classification and confidence elicitation, each
//! with or without a brief explanation. Template text is fixed byte-for-byte
//! (including trailing spaces on some lines); only the tweet slot changes.
//! The no-explanation variants are the defaults, having shown lower output
//! variability.

use serde::{Deserialize, Serialize};

/// Marker replaced by the tweet text.
pub const TWEET_SLOT: &str = "[tweet text]";

pub const DIRECT_WITH_EXPLANATION: &str = "\
Based on Kingdon's theory, please classify this tweet into one of these categories:
1. Problem Oriented - The tweet describes or mentions a problem, issue, or challenge
2. Solution Oriented - The tweet describes or mentions a solution, fix, or resolution
3. Political - The tweet is political in nature but doesn't clearly focus on problems or solutions
Respond with ONLY the number (1, 2, or 3) corresponding to the category, followed by a brief explanation.
Format your response as: NUMBER [explanation]
For example: 1 [This tweet focuses on describing a problem with healthcare costs]
Tweet: [tweet text]";

pub const DIRECT_NO_EXPLANATION: &str = "\
Based on Kingdon's theory, please classify this tweet into one of these categories:
1. Problem Oriented - The tweet describes or mentions a problem, issue, or challenge
2. Solution Oriented - The tweet describes or mentions a solution, fix, or resolution\x20
3. Political - The tweet is political in nature but doesn't clearly focus on problems or solutions
Respond with ONLY the number (1, 2, or 3) corresponding to the category.
Tweet: [tweet text]";

pub const CONFIDENCE_WITH_EXPLANATION: &str = "\
Based on Kingdon's theory, please provide confidence scores for this tweet.
Classify this tweet into these categories:
1. Problem Oriented - The tweet describes or mentions a problem, issue, or challenge
2. Solution Oriented - The tweet describes or mentions a solution, fix, or resolution\x20
For this tweet, please provide:
- Confidence score for Class 1 (Problem) as a percentage (0-100)
- Confidence score for Class 2 (Solution) as a percentage (0-100)
Note: The sum of both confidence scores should not exceed 100
Format your response as: CONF1,CONF2 [explanation]
For example: 85,10 Political discussion with some problem elements
Tweet: [tweet text]";

pub const CONFIDENCE_NO_EXPLANATION: &str = "\
Based on Kingdon's theory, please provide confidence scores for this tweet.
Classify this tweet into these categories:
1. Problem Oriented - The tweet describes or mentions a problem, issue, or challenge
2. Solution Oriented - The tweet describes or mentions a solution, fix, or resolution\x20
For this tweet, please provide:
- Confidence score for Class 1 (Problem) as a percentage (0-100)
- Confidence score for Class 2 (Solution) as a percentage (0-100)
Note: The sum of both confidence scores should not exceed 100
Format your response as: CONF1,CONF2
For example: 85,10
Tweet: [tweet text]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Direct,
    Confidence,
}

/// The prompt variant in use: mode plus whether an explanation is
/// requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub mode: PromptMode,
    pub with_explanation: bool,
}

impl PromptSpec {
    pub fn template(&self) -> &'static str {
        match (self.mode, self.with_explanation) {
            (PromptMode::Direct, true) => DIRECT_WITH_EXPLANATION,
            (PromptMode::Direct, false) => DIRECT_NO_EXPLANATION,
            (PromptMode::Confidence, true) => CONFIDENCE_WITH_EXPLANATION,
            (PromptMode::Confidence, false) => CONFIDENCE_NO_EXPLANATION,
        }
    }

    pub const ALL: [PromptSpec; 4] = [
        PromptSpec { mode: PromptMode::Direct, with_explanation: true },
        PromptSpec { mode: PromptMode::Direct, with_explanation: false },
        PromptSpec { mode: PromptMode::Confidence, with_explanation: true },
        PromptSpec { mode: PromptMode::Confidence, with_explanation: false },
    ];

    /// Stable name used in golden files and cache keys.
    pub fn name(&self) -> &'static str {
        match (self.mode, self.with_explanation) {
            (PromptMode::Direct, true) => "direct_with_explanation",
            (PromptMode::Direct, false) => "direct_no_explanation",
            (PromptMode::Confidence, true) => "confidence_with_explanation",
            (PromptMode::Confidence, false) => "confidence_no_explanation",
        }
    }
}

/// Substitute the tweet text into the template; no other mutation.
pub fn build_prompt(spec: &PromptSpec, tweet_text: &str) -> String {
    spec.template().replace(TWEET_SLOT, tweet_text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_only_touches_the_slot() {
        let spec = PromptSpec { mode: PromptMode::Direct, with_explanation: false };
        let prompt = build_prompt(&spec, "hello");
        assert!(prompt.ends_with("Tweet: hello"));
        assert!(!prompt.contains(TWEET_SLOT));
        let expected_prefix = spec.template().strip_suffix(TWEET_SLOT).unwrap();
        assert!(prompt.starts_with(expected_prefix));
    }

    #[test]
    fn same_inputs_same_prompt() {
        for spec in PromptSpec::ALL {
            assert_eq!(build_prompt(&spec, "x"), build_prompt(&spec, "x"));
        }
    }

    #[test]
    fn confidence_with_explanation_format_line() {
        let spec = PromptSpec { mode: PromptMode::Confidence, with_explanation: true };
        assert!(build_prompt(&spec, "x").contains("Format your response as: CONF1,CONF2 [explanation]"));
    }

    #[test]
    fn all_templates_carry_the_slot_once() {
        for spec in PromptSpec::ALL {
            assert_eq!(spec.template().matches(TWEET_SLOT).count(), 1);
        }
    }
}
