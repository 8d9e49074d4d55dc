//! Reproducible data splits.
//!
//! All partitions are produced from a seed and persisted as manifests of
//! member IDs, so every experiment can be replayed exactly. Splits from one
//! operation are pairwise disjoint and union to the parent; stratified
//! splits keep each class within one item of its exact proportional share
//! via largest-remainder rounding.

use crate::category::Category;
use crate::corpus::LabeledSet;
use crate::rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("empty year range")]
    EmptyYearRange,
    #[error("fractions must all be positive and sum to 1 (got sum {sum})")]
    BadFractions { sum: f64 },
    #[error("class {class} has {count} items, fewer than the {splits} requested splits")]
    ClassTooSmall { class: Category, count: usize, splits: usize },
    #[error("k = {k} exceeds the set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 2 (got {k})")]
    KTooSmall { k: usize },
    #[error("split '{name}' references ids missing from the labeled set")]
    UnknownIds { name: String },
}

/// Which coder's labels drive stratification and training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum LabelSource {
    #[default]
    Ar,
    Mb,
    /// Restrict to coder-agreed examples (label value from either coder).
    AgreeOnly,
}


impl std::str::FromStr for LabelSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ar" => Ok(LabelSource::Ar),
            "mb" => Ok(LabelSource::Mb),
            "agree_only" | "agree-only" => Ok(LabelSource::AgreeOnly),
            other => Err(format!("unknown label source '{other}'")),
        }
    }
}

/// Named, seeded, reproducible assignment of tweet IDs to a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub seed: u64,
    pub parent: Option<String>,
    pub member_ids: Vec<String>,
}

impl SplitManifest {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    pub fn id_set(&self) -> HashSet<&str> {
        self.member_ids.iter().map(|s| s.as_str()).collect()
    }
}

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub cross_fit: SplitManifest,
    pub cross_validate: SplitManifest,
    pub cross_test: SplitManifest,
}

/// All folds of one k-fold layout; test sets are disjoint and cover the set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSet {
    pub k: usize,
    pub folds: Vec<Fold>,
}

/// Outcome of the per-year TEST carve.
#[derive(Debug, Clone)]
pub struct CarveOutcome {
    pub test: SplitManifest,
    pub train: SplitManifest,
    /// Years that had fewer than the requested count; all were taken.
    pub shortfalls: Vec<(i32, usize)>,
}

fn sorted_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = ids.map(|s| s.to_string()).collect();
    v.sort_unstable();
    v
}

/// Carve a per-year stratified TEST set; everything else becomes TRAIN.
///
/// Each requested year contributes `per_year` uniformly sampled tweets; a
/// year with fewer available contributes all of them, recorded as a
/// shortfall.
pub fn carve_test(
    label_set: &LabeledSet,
    per_year: usize,
    years: std::ops::RangeInclusive<i32>,
    seed: u64,
) -> Result<CarveOutcome, PartitionError> {
    if years.is_empty() {
        return Err(PartitionError::EmptyYearRange);
    }

    let mut by_year: BTreeMap<i32, Vec<&str>> = BTreeMap::new();
    for ex in label_set.iter() {
        by_year
            .entry(ex.tweet.posted_at.year)
            .or_default()
            .push(ex.tweet.tweet_id.as_str());
    }

    let mut test_ids: Vec<String> = Vec::new();
    let mut shortfalls = Vec::new();
    for year in years {
        let mut candidates = match by_year.get(&year) {
            Some(ids) => sorted_ids(ids.iter().copied()),
            None => Vec::new(),
        };
        let take = per_year.min(candidates.len());
        if take < per_year {
            shortfalls.push((year, candidates.len()));
        }
        if take == 0 {
            continue;
        }
        let mut year_rng = rng::seeded_rng(rng::derive_seed(seed, &format!("carve_test:{year}")));
        let picked = rng::sample_indices(&mut year_rng, candidates.len(), take);
        let mut picked_sorted = picked;
        picked_sorted.sort_unstable_by(|a, b| b.cmp(a));
        for idx in picked_sorted {
            test_ids.push(candidates.swap_remove(idx));
        }
    }
    test_ids.sort_unstable();

    let test_set: HashSet<&str> = test_ids.iter().map(|s| s.as_str()).collect();
    let train_ids = sorted_ids(
        label_set
            .iter()
            .map(|e| e.tweet.tweet_id.as_str())
            .filter(|id| !test_set.contains(id)),
    );

    Ok(CarveOutcome {
        test: SplitManifest { name: "TEST".into(), seed, parent: None, member_ids: test_ids },
        train: SplitManifest { name: "TRAIN".into(), seed, parent: None, member_ids: train_ids },
        shortfalls,
    })
}

/// Largest-remainder apportionment of `n` items across `fractions`.
///
/// Totals are exact and each count differs from `n * fraction` by less
/// than 1; leftover units go to the largest fractional remainders, lower
/// index first on ties.
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = fractions.iter().map(|f| (n as f64 * f).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = fractions
        .iter()
        .enumerate()
        .map(|(i, f)| (i, n as f64 * f - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (i, _) in remainders.into_iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

fn check_fractions(fractions: &[f64]) -> Result<(), PartitionError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(PartitionError::BadFractions { sum });
    }
    Ok(())
}

/// Split a parent manifest into label-stratified children.
///
/// Per class, members are shuffled (seeded) and dealt to the outputs in
/// largest-remainder counts, so each child's class distribution tracks the
/// parent's within one item.
pub fn stratified_split(
    parent: &SplitManifest,
    label_set: &LabeledSet,
    fractions: &[f64],
    names: &[&str],
    label_source: LabelSource,
    seed: u64,
) -> Result<Vec<SplitManifest>, PartitionError> {
    stratified_split_impl(parent, label_set, fractions, names, label_source, seed, true)
}

#[allow(clippy::too_many_arguments)]
fn stratified_split_impl(
    parent: &SplitManifest,
    label_set: &LabeledSet,
    fractions: &[f64],
    names: &[&str],
    label_source: LabelSource,
    seed: u64,
    require_class_minimum: bool,
) -> Result<Vec<SplitManifest>, PartitionError> {
    assert_eq!(fractions.len(), names.len(), "one name per fraction");
    check_fractions(fractions)?;

    let mut by_class: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
    for id in &parent.member_ids {
        let ex = label_set
            .get(id)
            .ok_or_else(|| PartitionError::UnknownIds { name: parent.name.clone() })?;
        by_class.entry(ex.label(label_source)).or_default().push(id.as_str());
    }

    if require_class_minimum {
        for (class, members) in &by_class {
            if members.len() < fractions.len() {
                return Err(PartitionError::ClassTooSmall {
                    class: *class,
                    count: members.len(),
                    splits: fractions.len(),
                });
            }
        }
    }

    let mut outputs: Vec<Vec<String>> = vec![Vec::new(); fractions.len()];
    for (class, members) in by_class {
        let mut ids = sorted_ids(members.into_iter());
        let tag = format!("stratified:{}:{}", parent.name, class.code());
        let mut class_rng = rng::seeded_rng(rng::derive_seed(seed, &tag));
        rng::shuffle(&mut class_rng, &mut ids);
        let counts = largest_remainder(ids.len(), fractions);
        let mut offset = 0usize;
        for (out, count) in outputs.iter_mut().zip(counts) {
            out.extend(ids[offset..offset + count].iter().cloned());
            offset += count;
        }
    }

    Ok(names
        .iter()
        .zip(outputs)
        .map(|(name, mut member_ids)| {
            member_ids.sort_unstable();
            SplitManifest {
                name: name.to_string(),
                seed,
                parent: Some(parent.name.clone()),
                member_ids,
            }
        })
        .collect())
}

/// Keep only examples where both coders assigned the same label.
pub fn agreement_subset(set: &LabeledSet) -> LabeledSet {
    LabeledSet::new(
        set.iter()
            .filter(|e| e.label_ar == e.label_mb)
            .cloned()
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct KFoldOptions {
    pub k: usize,
    pub fit_fraction: f64,
    /// Stratify the fold assignment itself by label (the 80/20 sub-split is
    /// always stratified).
    pub stratify_folds: bool,
    pub label_source: LabelSource,
}

impl Default for KFoldOptions {
    fn default() -> Self {
        KFoldOptions {
            k: 7,
            fit_fraction: 0.8,
            stratify_folds: true,
            label_source: LabelSource::Ar,
        }
    }
}

/// Build k cross-validation folds over the labeled set.
///
/// Test sets are pairwise disjoint, cover the whole set, and have sizes
/// `floor(n/k)` or `ceil(n/k)`. Within each fold the remainder splits
/// `fit_fraction` / rest into fit and validate, stratified by label.
pub fn make_kfold(
    label_set: &LabeledSet,
    opts: &KFoldOptions,
    seed: u64,
) -> Result<FoldSet, PartitionError> {
    let n = label_set.len();
    if opts.k < 2 {
        return Err(PartitionError::KTooSmall { k: opts.k });
    }
    if opts.k > n {
        return Err(PartitionError::KTooLarge { k: opts.k, n });
    }

    let mut fold_members: Vec<Vec<String>> = vec![Vec::new(); opts.k];
    if opts.stratify_folds {
        // Deal each class into k nearly-equal chunks; classes hand their
        // remainder chunks to folds in global rotation so overall fold
        // sizes stay within one of n/k.
        let mut by_class: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
        for ex in label_set.iter() {
            by_class
                .entry(ex.label(opts.label_source))
                .or_default()
                .push(ex.tweet.tweet_id.as_str());
        }
        let mut extra_start = 0usize;
        for (class, members) in by_class {
            let mut ids = sorted_ids(members.into_iter());
            let tag = format!("kfold:{}", class.code());
            let mut class_rng = rng::seeded_rng(rng::derive_seed(seed, &tag));
            rng::shuffle(&mut class_rng, &mut ids);
            let base = ids.len() / opts.k;
            let extras = ids.len() % opts.k;
            let mut offset = 0usize;
            for (fold_idx, members) in fold_members.iter_mut().enumerate() {
                let gets_extra = (0..extras)
                    .any(|e| (extra_start + e) % opts.k == fold_idx);
                let take = base + usize::from(gets_extra);
                members.extend(ids[offset..offset + take].iter().cloned());
                offset += take;
            }
            extra_start = (extra_start + extras) % opts.k;
        }
    } else {
        let mut ids = sorted_ids(label_set.iter().map(|e| e.tweet.tweet_id.as_str()));
        let mut fold_rng = rng::seeded_rng(rng::derive_seed(seed, "kfold:flat"));
        rng::shuffle(&mut fold_rng, &mut ids);
        let base = n / opts.k;
        let extras = n % opts.k;
        let mut offset = 0usize;
        for (fold_idx, members) in fold_members.iter_mut().enumerate() {
            let take = base + usize::from(fold_idx < extras);
            members.extend(ids[offset..offset + take].iter().cloned());
            offset += take;
        }
    }

    let fit_fraction = opts.fit_fraction;
    if !(0.0 < fit_fraction && fit_fraction < 1.0) {
        return Err(PartitionError::BadFractions { sum: fit_fraction });
    }

    let mut folds = Vec::with_capacity(opts.k);
    for (i, test_ids) in fold_members.iter().enumerate() {
        let mut test_sorted = test_ids.clone();
        test_sorted.sort_unstable();
        let train_ids = {
            let test_set: HashSet<&str> = test_sorted.iter().map(|s| s.as_str()).collect();
            sorted_ids(
                label_set
                    .iter()
                    .map(|e| e.tweet.tweet_id.as_str())
                    .filter(|id| !test_set.contains(id)),
            )
        };
        let cross_test = SplitManifest {
            name: format!("CROSS_TEST[{i}]"),
            seed,
            parent: None,
            member_ids: test_sorted,
        };
        let cross_train = SplitManifest {
            name: format!("CROSS_TRAIN[{i}]"),
            seed,
            parent: None,
            member_ids: train_ids,
        };
        // Tiny classes are tolerated here: on very small sets a class may
        // land entirely in the fit side rather than aborting the fold.
        let parts = stratified_split_impl(
            &cross_train,
            label_set,
            &[fit_fraction, 1.0 - fit_fraction],
            &[&format!("CROSS_FIT[{i}]"), &format!("CROSS_VALIDATE[{i}]")],
            opts.label_source,
            rng::derive_seed(seed, &format!("kfold:fitval:{i}")),
            false,
        )?;
        let mut parts = parts.into_iter();
        folds.push(Fold {
            cross_fit: parts.next().unwrap(),
            cross_validate: parts.next().unwrap(),
            cross_test,
        });
    }

    Ok(FoldSet { k: opts.k, folds })
}

/// The full split tree for one experiment, persisted as `splits.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitBundle {
    pub global_seed: u64,
    pub splits: Vec<SplitManifest>,
    pub folds: FoldSet,
}

impl SplitBundle {
    pub fn get(&self, name: &str) -> Option<&SplitManifest> {
        self.splits.iter().find(|s| s.name == name)
    }
}

/// Build every standard split from the labeled set and one seed: the TEST
/// carve, TRAIN_AGREE, the 60/20/20 development splits, the 80/20
/// evaluation splits (plain and agreed-only), and the k-fold layout.
pub fn build_standard_splits(
    label_set: &LabeledSet,
    per_year: usize,
    years: std::ops::RangeInclusive<i32>,
    k: usize,
    label_source: LabelSource,
    global_seed: u64,
) -> Result<SplitBundle, PartitionError> {
    let carve = carve_test(label_set, per_year, years, rng::derive_seed(global_seed, "carve"))?;
    let train_set = label_set.subset(&carve.train.member_ids);

    let agree_set = agreement_subset(&train_set);
    let train_agree = SplitManifest {
        name: "TRAIN_AGREE".into(),
        seed: global_seed,
        parent: Some("TRAIN".into()),
        member_ids: sorted_ids(agree_set.iter().map(|e| e.tweet.tweet_id.as_str())),
    };

    let dev = stratified_split(
        &carve.train,
        label_set,
        &[0.6, 0.2, 0.2],
        &["DEV_FIT", "DEV_VALIDATE", "DEV_TEST"],
        label_source,
        rng::derive_seed(global_seed, "dev"),
    )?;
    let eval = stratified_split(
        &carve.train,
        label_set,
        &[0.8, 0.2],
        &["FIT", "VALIDATE"],
        label_source,
        rng::derive_seed(global_seed, "eval"),
    )?;
    let eval_agree = stratified_split(
        &train_agree,
        label_set,
        &[0.8, 0.2],
        &["FIT_AGREE", "VALIDATE_AGREE"],
        label_source,
        rng::derive_seed(global_seed, "eval_agree"),
    )?;

    let folds = make_kfold(
        label_set,
        &KFoldOptions { k, label_source, ..KFoldOptions::default() },
        rng::derive_seed(global_seed, "kfold"),
    )?;

    let mut splits = vec![carve.test, carve.train, train_agree];
    splits.extend(dev);
    splits.extend(eval);
    splits.extend(eval_agree);

    Ok(SplitBundle { global_seed, splits, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabeledExample, PostDate, Tweet};

    fn example(id: usize, year: i32, ar: Category, mb: Category) -> LabeledExample {
        LabeledExample {
            tweet: Tweet {
                tweet_id: format!("t{id:05}"),
                text: format!("text {id}"),
                author_id: format!("a{}", id % 7),
                posted_at: PostDate::new(year, Some(1), Some(1)),
            },
            label_ar: ar,
            label_mb: mb,
            match_score: 1.0,
        }
    }

    fn synthetic_set(per_year: usize, years: std::ops::RangeInclusive<i32>) -> LabeledSet {
        let mut examples = Vec::new();
        let mut id = 0;
        for year in years {
            for _ in 0..per_year {
                let ar = Category::from_index(id % 3).unwrap();
                let mb = Category::from_index((id + id / 5) % 3).unwrap();
                examples.push(example(id, year, ar, mb));
                id += 1;
            }
        }
        LabeledSet::new(examples)
    }

    #[test]
    fn carve_exact_counts_verified_by_exhaustive_count() {
        let set = synthetic_set(50, 2012..=2021);
        let out = carve_test(&set, 50, 2012..=2021, 9).unwrap();
        assert_eq!(out.test.len(), 500);
        assert!(out.shortfalls.is_empty());
        // Brute-force per-year count over the carved set.
        for year in 2012..=2021 {
            let count = out
                .test
                .member_ids
                .iter()
                .filter(|id| set.get(id).unwrap().tweet.posted_at.year == year)
                .count();
            assert_eq!(count, 50, "year {year}");
        }
        assert_eq!(out.train.len(), set.len() - 500);
    }

    #[test]
    fn carve_zero_per_year() {
        let set = synthetic_set(10, 2012..=2014);
        let out = carve_test(&set, 0, 2012..=2014, 1).unwrap();
        assert!(out.test.is_empty());
        assert_eq!(out.train.len(), set.len());
    }

    #[test]
    fn carve_shortfall_takes_all_and_logs() {
        let set = synthetic_set(30, 2012..=2013);
        let out = carve_test(&set, 50, 2012..=2013, 1).unwrap();
        assert_eq!(out.test.len(), 60);
        assert_eq!(out.shortfalls, vec![(2012, 30), (2013, 30)]);
    }

    #[test]
    fn carve_empty_year_range_is_fatal() {
        let set = synthetic_set(5, 2012..=2012);
        #[allow(clippy::reversed_empty_ranges)]
        let result = carve_test(&set, 5, 2013..=2012, 1);
        assert!(matches!(result, Err(PartitionError::EmptyYearRange)));
    }

    #[test]
    fn carve_test_and_train_partition_the_set() {
        let set = synthetic_set(23, 2012..=2018);
        let out = carve_test(&set, 10, 2012..=2018, 4).unwrap();
        let mut all: Vec<&str> = out
            .test
            .member_ids
            .iter()
            .chain(out.train.member_ids.iter())
            .map(|s| s.as_str())
            .collect();
        all.sort_unstable();
        let mut expected: Vec<&str> = set.iter().map(|e| e.tweet.tweet_id.as_str()).collect();
        expected.sort_unstable();
        assert_eq!(all, expected);
    }

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(10, &[0.6, 0.2, 0.2]), vec![6, 2, 2]);
        assert_eq!(largest_remainder(11, &[0.6, 0.2, 0.2]).iter().sum::<usize>(), 11);
        assert_eq!(largest_remainder(0, &[0.5, 0.5]), vec![0, 0]);
        // Remainders 0.8/0.6/0.6: first leftover to index 0, second to index 1.
        assert_eq!(largest_remainder(743, &[0.6, 0.2, 0.2]), vec![446, 149, 148]);
    }

    #[test]
    fn stratified_split_identity_with_single_fraction() {
        let set = synthetic_set(20, 2012..=2013);
        let parent = SplitManifest {
            name: "PARENT".into(),
            seed: 0,
            parent: None,
            member_ids: set.iter().map(|e| e.tweet.tweet_id.clone()).collect(),
        };
        let out =
            stratified_split(&parent, &set, &[1.0], &["ALL"], LabelSource::Ar, 3).unwrap();
        assert_eq!(out[0].id_set(), parent.id_set());
    }

    #[test]
    fn stratified_split_counts_match_largest_remainder_per_class() {
        let set = synthetic_set(40, 2012..=2014);
        let parent = SplitManifest {
            name: "PARENT".into(),
            seed: 0,
            parent: None,
            member_ids: set.iter().map(|e| e.tweet.tweet_id.clone()).collect(),
        };
        let fractions = [0.6, 0.2, 0.2];
        let out = stratified_split(
            &parent,
            &set,
            &fractions,
            &["A", "B", "C"],
            LabelSource::Ar,
            11,
        )
        .unwrap();

        // Count per class in the parent, apportion independently, compare.
        let mut class_totals = [0usize; 3];
        for id in &parent.member_ids {
            class_totals[set.get(id).unwrap().label_ar.index()] += 1;
        }
        for (c, &total) in class_totals.iter().enumerate() {
            let expected = largest_remainder(total, &fractions);
            for (j, split) in out.iter().enumerate() {
                let got = split
                    .member_ids
                    .iter()
                    .filter(|id| set.get(id).unwrap().label_ar.index() == c)
                    .count();
                assert_eq!(got, expected[j], "class {c} split {j}");
            }
        }
    }

    #[test]
    fn stratified_split_rejects_bad_fractions() {
        let set = synthetic_set(10, 2012..=2012);
        let parent = SplitManifest {
            name: "P".into(),
            seed: 0,
            parent: None,
            member_ids: set.iter().map(|e| e.tweet.tweet_id.clone()).collect(),
        };
        assert!(matches!(
            stratified_split(&parent, &set, &[0.5, 0.6], &["A", "B"], LabelSource::Ar, 0),
            Err(PartitionError::BadFractions { .. })
        ));
    }

    #[test]
    fn stratified_split_rejects_tiny_class() {
        let mut examples: Vec<_> = (0..20)
            .map(|i| example(i, 2015, Category::Problem, Category::Problem))
            .collect();
        examples.push(example(99, 2015, Category::Solution, Category::Solution));
        let set = LabeledSet::new(examples);
        let parent = SplitManifest {
            name: "P".into(),
            seed: 0,
            parent: None,
            member_ids: set.iter().map(|e| e.tweet.tweet_id.clone()).collect(),
        };
        let err = stratified_split(
            &parent,
            &set,
            &[0.4, 0.3, 0.3],
            &["A", "B", "C"],
            LabelSource::Ar,
            0,
        )
        .unwrap_err();
        match err {
            PartitionError::ClassTooSmall { class, count, .. } => {
                assert_eq!(class, Category::Solution);
                assert_eq!(count, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn agreement_subset_keeps_only_agreed() {
        let set = LabeledSet::new(vec![
            example(0, 2015, Category::Problem, Category::Problem),
            example(1, 2015, Category::Problem, Category::Solution),
            example(2, 2015, Category::Other, Category::Other),
        ]);
        let agree = agreement_subset(&set);
        assert_eq!(agree.len(), 2);

        let all_agree = LabeledSet::new(vec![
            example(0, 2015, Category::Problem, Category::Problem),
            example(1, 2015, Category::Solution, Category::Solution),
        ]);
        assert_eq!(agreement_subset(&all_agree).len(), 2);

        let never_agree = LabeledSet::new(vec![
            example(0, 2015, Category::Problem, Category::Solution),
        ]);
        assert_eq!(agreement_subset(&never_agree).len(), 0);
    }

    #[test]
    fn kfold_two_folds_cover_ten_items() {
        let set = synthetic_set(5, 2012..=2013);
        let opts = KFoldOptions { k: 2, ..KFoldOptions::default() };
        let folds = make_kfold(&set, &opts, 5).unwrap();
        assert_eq!(folds.folds.len(), 2);
        let t0 = folds.folds[0].cross_test.id_set();
        let t1 = folds.folds[1].cross_test.id_set();
        assert_eq!(t0.len(), 5);
        assert_eq!(t1.len(), 5);
        assert!(t0.is_disjoint(&t1));
        assert_eq!(t0.union(&t1).count(), 10);
    }

    #[test]
    fn kfold_sizes_within_one_of_n_over_k() {
        let set = synthetic_set(33, 2012..=2017); // 198 items
        let folds = make_kfold(&set, &KFoldOptions::default(), 2).unwrap();
        let n = set.len();
        let lo = n / 7;
        let hi = lo + usize::from(!n.is_multiple_of(7));
        let mut total = 0;
        for f in &folds.folds {
            let size = f.cross_test.len();
            assert!(size == lo || size == hi, "fold size {size}");
            total += size;
            // fit + validate = set minus test, disjoint.
            assert_eq!(
                f.cross_fit.len() + f.cross_validate.len() + f.cross_test.len(),
                n
            );
            assert!(f.cross_fit.id_set().is_disjoint(&f.cross_test.id_set()));
            assert!(f.cross_fit.id_set().is_disjoint(&f.cross_validate.id_set()));
        }
        assert_eq!(total, n);
    }

    #[test]
    fn kfold_same_seed_identical() {
        let set = synthetic_set(20, 2012..=2014);
        let a = make_kfold(&set, &KFoldOptions::default(), 77).unwrap();
        let b = make_kfold(&set, &KFoldOptions::default(), 77).unwrap();
        assert_eq!(a, b);
        let c = make_kfold(&set, &KFoldOptions::default(), 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kfold_k_larger_than_set_is_fatal() {
        let set = synthetic_set(2, 2012..=2012);
        let opts = KFoldOptions { k: 7, ..KFoldOptions::default() };
        assert!(matches!(
            make_kfold(&set, &opts, 0),
            Err(PartitionError::KTooLarge { .. })
        ));
    }

    #[test]
    fn standard_splits_bundle_is_consistent() {
        let set = synthetic_set(60, 2012..=2021);
        let bundle =
            build_standard_splits(&set, 10, 2012..=2021, 7, LabelSource::Ar, 2025).unwrap();
        let test = bundle.get("TEST").unwrap();
        let train = bundle.get("TRAIN").unwrap();
        assert_eq!(test.len(), 100);
        assert_eq!(train.len(), set.len() - 100);
        let dev_fit = bundle.get("DEV_FIT").unwrap();
        let dev_val = bundle.get("DEV_VALIDATE").unwrap();
        let dev_test = bundle.get("DEV_TEST").unwrap();
        assert_eq!(dev_fit.len() + dev_val.len() + dev_test.len(), train.len());
        assert_eq!(bundle.folds.k, 7);
        // JSON round trip.
        let json = serde_json::to_string(&bundle).unwrap();
        let back: SplitBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back.get("TEST").unwrap(), test);
    }
}
