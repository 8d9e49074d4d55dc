//! Text similarity for record linkage.
//!
//! Scores are a normalized edit-distance ratio over case-folded,
//! whitespace-collapsed text: `1 - levenshtein(a, b) / max(|a|, |b|)`,
//! computed on Unicode scalar values. The score is 1.0 exactly when the
//! normalized strings are equal and 0.0 when they share nothing.

/// Case-fold and collapse runs of whitespace to single spaces.
pub fn normalize_for_match(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Levenshtein distance over char slices, two-row dynamic program.
fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Normalized similarity in `[0, 1]` between two raw texts.
pub fn similarity(a: &str, b: &str) -> f64 {
    let na: Vec<char> = normalize_for_match(a).chars().collect();
    let nb: Vec<char> = normalize_for_match(b).chars().collect();
    let max_len = na.len().max(nb.len());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&na, &nb) as f64 / max_len as f64
}

/// Levenshtein distance if it is at most `k`, else None. Abandons a row as
/// soon as every cell exceeds the budget, which makes corpus-scale scans
/// with a score floor affordable.
fn levenshtein_within(a: &[char], b: &[char], k: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > k {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        let d = a.len().max(b.len());
        return (d <= k).then_some(d);
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        let mut row_min = curr[0];
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
            row_min = row_min.min(curr[j + 1]);
        }
        if row_min > k {
            return None;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    (prev[b.len()] <= k).then_some(prev[b.len()])
}

/// Similarity between pre-normalized char sequences, but only when it
/// reaches `floor`; scores below the floor return None without paying for
/// the full distance computation. Identical to [`similarity`] on the
/// normalized texts whenever it returns a value.
pub(crate) fn similarity_at_least(a: &[char], b: &[char], floor: f64) -> Option<f64> {
    let max_len = a.len().max(b.len());
    if max_len == 0 {
        return Some(1.0);
    }
    let budget = ((1.0 - floor) * max_len as f64 + 1e-9).floor() as usize;
    levenshtein_within(a, b, budget).map(|d| 1.0 - d as f64 / max_len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_text_scores_one() {
        assert_eq!(similarity("The quick brown fox", "The quick brown fox"), 1.0);
    }

    #[test]
    fn normalization_ignores_case_and_whitespace() {
        assert_eq!(similarity("Hello  World", "hello world"), 1.0);
        assert_eq!(normalize_for_match("  A\tB\nC "), "a b c");
    }

    #[test]
    fn single_typo_scores_below_one() {
        // "the qick brown fox" vs "the quick brown fox": one deletion over 19 chars.
        let s = similarity("The qick brown fox", "The quick brown fox");
        assert!((s - (1.0 - 1.0 / 19.0)).abs() < 1e-12);
    }

    #[test]
    fn disjoint_text_scores_low() {
        assert!(similarity("aaaa", "zzzz") < 0.01);
    }

    #[test]
    fn empty_pair_scores_one() {
        assert_eq!(similarity("", ""), 1.0);
        assert_eq!(similarity("", "abc"), 0.0);
    }

    #[test]
    fn bounded_similarity_agrees_with_full() {
        let mut rng = crate::rng::seeded_rng(5);
        let alphabet: Vec<char> = "abcd ".chars().collect();
        for _ in 0..300 {
            let len_a = crate::rng::gen_below(&mut rng, 20) as usize;
            let len_b = crate::rng::gen_below(&mut rng, 20) as usize;
            let a: Vec<char> = (0..len_a)
                .map(|_| alphabet[crate::rng::gen_below(&mut rng, 5) as usize])
                .collect();
            let b: Vec<char> = (0..len_b)
                .map(|_| alphabet[crate::rng::gen_below(&mut rng, 5) as usize])
                .collect();
            let max_len = len_a.max(len_b);
            let full = if max_len == 0 {
                1.0
            } else {
                1.0 - levenshtein(&a, &b) as f64 / max_len as f64
            };
            for floor in [0.0, 0.3, 0.8] {
                match similarity_at_least(&a, &b, floor) {
                    Some(s) => assert!((s - full).abs() < 1e-12),
                    None => assert!(full < floor + 1e-9, "full {full} floor {floor}"),
                }
            }
        }
    }

    #[test]
    fn matches_naive_reference_on_random_pairs() {
        // Independent full-matrix reference for the same distance.
        #[allow(clippy::needless_range_loop)]
        fn naive(a: &[char], b: &[char]) -> usize {
            let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
            for i in 0..=a.len() {
                d[i][0] = i;
            }
            for j in 0..=b.len() {
                d[0][j] = j;
            }
            for i in 1..=a.len() {
                for j in 1..=b.len() {
                    let cost = usize::from(a[i - 1] != b[j - 1]);
                    d[i][j] = (d[i - 1][j] + 1)
                        .min(d[i][j - 1] + 1)
                        .min(d[i - 1][j - 1] + cost);
                }
            }
            d[a.len()][b.len()]
        }

        let mut rng = crate::rng::seeded_rng(99);
        let alphabet: Vec<char> = "abcde ".chars().collect();
        for _ in 0..200 {
            let len_a = crate::rng::gen_below(&mut rng, 15) as usize;
            let len_b = crate::rng::gen_below(&mut rng, 15) as usize;
            let a: String = (0..len_a)
                .map(|_| alphabet[crate::rng::gen_below(&mut rng, 6) as usize])
                .collect();
            let b: String = (0..len_b)
                .map(|_| alphabet[crate::rng::gen_below(&mut rng, 6) as usize])
                .collect();
            let ca: Vec<char> = normalize_for_match(&a).chars().collect();
            let cb: Vec<char> = normalize_for_match(&b).chars().collect();
            let expected = if ca.len().max(cb.len()) == 0 {
                1.0
            } else {
                1.0 - naive(&ca, &cb) as f64 / ca.len().max(cb.len()) as f64
            };
            assert!((similarity(&a, &b) - expected).abs() < 1e-9);
        }
    }
}
