//! Downstream descriptive statistics: labeled tweets joined with author
//! metadata, aggregated into zero-filled monthly buckets per group, and
//! emitted as tidy CSVs plus static SVG charts.

mod svg;

use crate::category::Category;
use crate::corpus::{PostDate, Tweet};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed metadata in {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("duplicate author_id '{0}' in metadata")]
    DuplicateAuthor(String),
    #[error("no aggregates to emit")]
    EmptyAggregates,
    #[error("cannot write to {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    D,
    R,
    I,
    Other(String),
}

impl Party {
    fn parse(s: &str) -> Party {
        match s.trim() {
            "D" | "d" => Party::D,
            "R" | "r" => Party::R,
            "I" | "i" => Party::I,
            other => Party::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Party::D => "D",
            Party::R => "R",
            Party::I => "I",
            Party::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenatorMetadata {
    pub author_id: String,
    pub party: Party,
    pub gender: String,
    pub race: String,
    pub state: String,
}

#[derive(Debug, Clone, Default)]
pub struct MetadataTable {
    by_author: HashMap<String, SenatorMetadata>,
}

impl MetadataTable {
    pub fn get(&self, author_id: &str) -> Option<&SenatorMetadata> {
        self.by_author.get(author_id)
    }

    pub fn len(&self) -> usize {
        self.by_author.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_author.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct MetadataRow {
    author_id: String,
    party: String,
    gender: String,
    race: String,
    state: String,
}

/// Load the author metadata CSV (`author_id, party, gender, race, state`).
/// Duplicate author IDs are fatal.
pub fn load_metadata(path: &Path) -> Result<MetadataTable, AnalyticsError> {
    let file = std::fs::File::open(path).map_err(|source| AnalyticsError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut table = MetadataTable::default();
    for row in reader.deserialize::<MetadataRow>() {
        let row = row.map_err(|e| AnalyticsError::Malformed {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let id = row.author_id.trim().to_string();
        if table.by_author.contains_key(&id) {
            return Err(AnalyticsError::DuplicateAuthor(id));
        }
        table.by_author.insert(
            id.clone(),
            SenatorMetadata {
                author_id: id,
                party: Party::parse(&row.party),
                gender: row.gender.trim().to_string(),
                race: row.race.trim().to_string(),
                state: row.state.trim().to_string(),
            },
        );
    }
    Ok(table)
}

/// Calendar month used for bucketing, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn from_date(date: &PostDate) -> Option<YearMonth> {
        date.month.map(|month| YearMonth { year: date.year, month })
    }

    fn index(&self) -> i32 {
        self.year * 12 + (self.month as i32 - 1)
    }

    fn from_index(index: i32) -> YearMonth {
        YearMonth { year: index.div_euclid(12), month: (index.rem_euclid(12) + 1) as u8 }
    }

    /// All months from `start` to `end` inclusive.
    pub fn span(start: YearMonth, end: YearMonth) -> Vec<YearMonth> {
        (start.index()..=end.index()).map(YearMonth::from_index).collect()
    }
}

impl std::fmt::Display for YearMonth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Party,
    Gender,
    Race,
    None,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "party" => Ok(GroupBy::Party),
            "gender" => Ok(GroupBy::Gender),
            "race" => Ok(GroupBy::Race),
            "none" => Ok(GroupBy::None),
            other => Err(format!("unknown grouping '{other}'")),
        }
    }
}

/// Counts for one (month, group) bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyAggregate {
    pub month: YearMonth,
    pub group: String,
    pub counts: [usize; 3],
    pub total: usize,
}

/// Aggregation output: buckets plus exclusion diagnostics.
#[derive(Debug)]
pub struct AggregateOutcome {
    pub aggregates: Vec<MonthlyAggregate>,
    /// Tweets without a parseable month, excluded and logged.
    pub excluded: Vec<(String, String)>,
    /// Authors absent from the metadata (their tweets count under
    /// "unknown").
    pub unknown_authors: BTreeSet<String>,
}

const UNKNOWN_GROUP: &str = "unknown";

fn group_key(meta: Option<&SenatorMetadata>, group_by: GroupBy) -> String {
    if group_by == GroupBy::None {
        return "all".to_string();
    }
    let value = meta.map(|m| match group_by {
        GroupBy::Party => m.party.as_str().to_string(),
        GroupBy::Gender => m.gender.clone(),
        GroupBy::Race => m.race.clone(),
        GroupBy::None => unreachable!(),
    });
    match value {
        Some(v) if !v.is_empty() => v,
        _ => UNKNOWN_GROUP.to_string(),
    }
}

/// Aggregate labeled tweets into per-(month, group) counts.
///
/// Every group observed gets a bucket for every month in the corpus span,
/// zero-filled, so series are contiguous. Tweets without a parseable month
/// are excluded and logged.
pub fn aggregate_monthly<'a>(
    items: impl Iterator<Item = (&'a Tweet, Category)>,
    metadata: &MetadataTable,
    group_by: GroupBy,
) -> AggregateOutcome {
    let mut buckets: BTreeMap<(YearMonth, String), [usize; 3]> = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut unknown_authors = BTreeSet::new();
    let mut min_month: Option<YearMonth> = None;
    let mut max_month: Option<YearMonth> = None;
    let mut groups: BTreeSet<String> = BTreeSet::new();

    for (tweet, label) in items {
        let Some(month) = YearMonth::from_date(&tweet.posted_at) else {
            excluded.push((tweet.tweet_id.clone(), "date without month resolution".into()));
            continue;
        };
        let meta = metadata.get(&tweet.author_id);
        if meta.is_none() && group_by != GroupBy::None {
            unknown_authors.insert(tweet.author_id.clone());
        }
        let group = group_key(meta, group_by);
        groups.insert(group.clone());
        min_month = Some(min_month.map_or(month, |m| m.min(month)));
        max_month = Some(max_month.map_or(month, |m| m.max(month)));
        buckets.entry((month, group)).or_default()[label.index()] += 1;
    }

    let mut aggregates = Vec::new();
    if let (Some(lo), Some(hi)) = (min_month, max_month) {
        for month in YearMonth::span(lo, hi) {
            for group in &groups {
                let counts =
                    buckets.get(&(month, group.clone())).copied().unwrap_or_default();
                aggregates.push(MonthlyAggregate {
                    month,
                    group: group.clone(),
                    counts,
                    total: counts.iter().sum(),
                });
            }
        }
    }

    AggregateOutcome { aggregates, excluded, unknown_authors }
}

fn write_aggregate_csv(path: &Path, aggregates: &[MonthlyAggregate]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        file,
        "month,group,total,problem,solution,other,prop_problem,prop_solution,prop_other"
    )?;
    for a in aggregates {
        let props: Vec<String> = (0..3)
            .map(|i| {
                if a.total == 0 {
                    "0".to_string()
                } else {
                    format!("{:.9}", a.counts[i] as f64 / a.total as f64)
                }
            })
            .collect();
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{}",
            a.month,
            a.group,
            a.total,
            a.counts[0],
            a.counts[1],
            a.counts[2],
            props[0],
            props[1],
            props[2]
        )?;
    }
    file.flush()
}

/// Figure outputs written by [`emit_figures`].
#[derive(Debug)]
pub struct EmittedFigures {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Write one tidy CSV (the contract) plus SVG charts (a convenience) for an
/// aggregation. `stem` names the files, e.g. `fig4_party`.
pub fn emit_figures(
    aggregates: &[MonthlyAggregate],
    out_dir: &Path,
    stem: &str,
) -> Result<EmittedFigures, AnalyticsError> {
    if aggregates.is_empty() {
        return Err(AnalyticsError::EmptyAggregates);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| AnalyticsError::Unwritable {
        path: out_dir.display().to_string(),
        source,
    })?;

    let mut files = Vec::new();
    let mut warnings = Vec::new();

    let csv_path = out_dir.join(format!("{stem}_counts.csv"));
    write_aggregate_csv(&csv_path, aggregates).map_err(|source| AnalyticsError::Unwritable {
        path: csv_path.display().to_string(),
        source,
    })?;
    files.push(csv_path);

    // Months and groups in deterministic order.
    let months: Vec<YearMonth> = {
        let mut m: Vec<YearMonth> = aggregates.iter().map(|a| a.month).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    let groups: Vec<String> = {
        let mut g: Vec<String> = aggregates.iter().map(|a| a.group.clone()).collect();
        g.sort();
        g.dedup();
        g
    };
    let month_labels: Vec<String> = months.iter().map(|m| m.to_string()).collect();
    let by_key: HashMap<(YearMonth, &str), &MonthlyAggregate> =
        aggregates.iter().map(|a| ((a.month, a.group.as_str()), a)).collect();

    // Counts per month by group: one line chart.
    let count_series: Vec<(&str, Vec<f64>)> = groups
        .iter()
        .map(|g| {
            (
                g.as_str(),
                months
                    .iter()
                    .map(|m| by_key.get(&(*m, g.as_str())).map_or(0.0, |a| a.total as f64))
                    .collect(),
            )
        })
        .collect();
    let counts_svg = out_dir.join(format!("{stem}_counts.svg"));
    std::fs::write(&counts_svg, svg::line_chart(&format!("Tweets per month ({stem})"), &month_labels, &count_series))
        .map_err(|source| AnalyticsError::Unwritable {
            path: counts_svg.display().to_string(),
            source,
        })?;
    files.push(counts_svg);

    // Label proportions per month, one stacked chart per group.
    for g in &groups {
        let has_data = months
            .iter()
            .any(|m| by_key.get(&(*m, g.as_str())).is_some_and(|a| a.total > 0));
        if !has_data {
            warnings.push(format!("group '{g}' has no tweets; chart skipped"));
            continue;
        }
        let series: Vec<(&str, Vec<f64>)> = Category::ALL
            .iter()
            .map(|c| {
                (
                    c.name(),
                    months
                        .iter()
                        .map(|m| {
                            by_key
                                .get(&(*m, g.as_str()))
                                .map_or(0.0, |a| {
                                    if a.total == 0 {
                                        0.0
                                    } else {
                                        a.counts[c.index()] as f64 / a.total as f64
                                    }
                                })
                        })
                        .collect(),
                )
            })
            .collect();
        let path = out_dir.join(format!("{stem}_{}_labels.svg", sanitize(g)));
        std::fs::write(
            &path,
            svg::stacked_area(&format!("Label distribution per month ({g})"), &month_labels, &series),
        )
        .map_err(|source| AnalyticsError::Unwritable {
            path: path.display().to_string(),
            source,
        })?;
        files.push(path);
    }

    Ok(EmittedFigures { files, warnings })
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect()
}
