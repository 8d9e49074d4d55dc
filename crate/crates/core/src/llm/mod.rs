//! Remote LLM classification: prompt construction, strict response
//! parsing, the implicit-Class-3 threshold decision rule, grid search over
//! its parameter, and the caching batch client.

mod client;
mod decide;
mod parse;
mod prompts;

pub use client::{
    classify_remote, prompt_hash, write_unclassified_report, BackendError, ClassifyStats,
    CompletionBackend, EndpointConfig, HttpBackend, LlmError, LlmResponse, ParsedResponse,
    ResponseCache,
};
pub use decide::{
    decide_k_threshold, grid_search_k, grid_search_k_default, DecideError, GridPoint,
    GridSearchResult,
};
pub use parse::{parse_confidence, parse_direct, ConfidenceParse, DirectParse, ParseError};
pub use prompts::{
    build_prompt, PromptMode, PromptSpec, CONFIDENCE_NO_EXPLANATION,
    CONFIDENCE_WITH_EXPLANATION, DIRECT_NO_EXPLANATION, DIRECT_WITH_EXPLANATION, TWEET_SLOT,
};

use crate::category::Category;
use crate::models::Prediction;

/// Turn parsed responses into label predictions.
///
/// Direct responses carry their label with confidence 1; confidence
/// responses go through the k-threshold rule with the triple rescaled to
/// [0, 1]. Unclassified responses yield no prediction. Prompt Class 3
/// ("Political") maps onto the Other category.
pub fn predictions_from_responses(responses: &[LlmResponse], k: f64) -> Vec<Prediction> {
    responses
        .iter()
        .filter_map(|r| match &r.parsed {
            ParsedResponse::Direct(d) => Some(Prediction {
                tweet_id: r.tweet_id.clone(),
                label: d.label,
                confidence: one_hot(d.label),
            }),
            ParsedResponse::Confidence(c) => {
                let label = decide_k_threshold((c.conf1, c.conf2, c.conf3), k);
                Some(Prediction {
                    tweet_id: r.tweet_id.clone(),
                    label,
                    confidence: [c.conf1 / 100.0, c.conf2 / 100.0, c.conf3 / 100.0],
                })
            }
            ParsedResponse::Unclassified { .. } => None,
        })
        .collect()
}

fn one_hot(label: Category) -> [f64; 3] {
    let mut c = [0.0; 3];
    c[label.index()] = 1.0;
    c
}

/// Pair parsed confidence triples with gold labels for grid search.
pub fn scored_pairs(
    responses: &[LlmResponse],
    gold: impl Fn(&str) -> Option<Category>,
) -> Vec<((f64, f64, f64), Category)> {
    responses
        .iter()
        .filter_map(|r| match &r.parsed {
            ParsedResponse::Confidence(c) => {
                gold(&r.tweet_id).map(|g| ((c.conf1, c.conf2, c.conf3), g))
            }
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_responses_become_predictions() {
        let responses = vec![LlmResponse {
            tweet_id: "a".into(),
            raw: Some("1".into()),
            parsed: ParsedResponse::Direct(DirectParse {
                label: Category::Problem,
                explanation: None,
            }),
        }];
        let preds = predictions_from_responses(&responses, 20.0);
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].label, Category::Problem);
    }

    #[test]
    fn confidence_responses_use_k_rule_and_unclassified_drop() {
        let responses = vec![
            LlmResponse {
                tweet_id: "a".into(),
                raw: Some("10,15".into()),
                parsed: ParsedResponse::Confidence(ConfidenceParse {
                    conf1: 10.0,
                    conf2: 15.0,
                    conf3: 75.0,
                    rescaled: false,
                    explanation: None,
                }),
            },
            LlmResponse {
                tweet_id: "b".into(),
                raw: None,
                parsed: ParsedResponse::Unclassified { reason: "x".into() },
            },
        ];
        let preds = predictions_from_responses(&responses, 50.0);
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].label, Category::Other);
    }
}
