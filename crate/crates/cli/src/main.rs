//! Operator entry point: config loading, command dispatch, and run
//! manifests tying every output to its inputs, seed, and config hash.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

mod commands;
mod manifest;

use clap::{Parser, Subcommand, ValueEnum};
use framing_core::analytics::GroupBy;
use framing_core::corpus::CorpusFormat;
use framing_core::llm::{EndpointConfig, PromptMode};
use framing_core::models::ExperimentMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "framing",
    about = "Label political social-media posts as problem / solution / other: \
             corpus preparation, reproducible splits, classifier training, \
             iterative pseudo-labeling, LLM-prompt baselines, and downstream \
             monthly statistics.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> CorpusFormat {
        match f {
            FormatArg::Csv => CorpusFormat::Csv,
            FormatArg::Jsonl => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PromptModeArg {
    Direct,
    Confidence,
}

impl From<PromptModeArg> for PromptMode {
    fn from(m: PromptModeArg) -> PromptMode {
        match m {
            PromptModeArg::Direct => PromptMode::Direct,
            PromptModeArg::Confidence => PromptMode::Confidence,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupByArg {
    Party,
    Gender,
    Race,
    None,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> GroupBy {
        match g {
            GroupByArg::Party => GroupBy::Party,
            GroupByArg::Gender => GroupBy::Gender,
            GroupByArg::Race => GroupBy::Race,
            GroupByArg::None => GroupBy::None,
        }
    }
}

#[derive(clap::Args)]
struct EndpointArgs {
    /// Completion endpoint base URL.
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    /// Model identifier sent to the endpoint.
    #[arg(long = "llm-model", default_value = "gpt-4")]
    llm_model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "LLM_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    retry_budget: u32,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 500)]
    backoff_base_ms: u64,
}

impl From<&EndpointArgs> for EndpointConfig {
    fn from(a: &EndpointArgs) -> EndpointConfig {
        EndpointConfig {
            base_url: a.base_url.clone(),
            model: a.llm_model.clone(),
            api_key_env: a.api_key_env.clone(),
            timeout_secs: a.timeout_secs,
            retry_budget: a.retry_budget,
            concurrency: a.concurrency,
            backoff_base_ms: a.backoff_base_ms,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the raw corpus (and optionally the labeled file), reporting
    /// row counts and per-row issues.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        labeled: Option<PathBuf>,
        /// Keep only tweets in this ISO language code (requires a
        /// configured detector; the default pipeline is pass-through).
        #[arg(long)]
        keep_lang: Option<String>,
        #[arg(long, default_value = "out/ingest")]
        out: PathBuf,
    },
    /// Restore truncated labeled-record IDs by fuzzy text matching and
    /// validate label codes, producing the clean label set.
    RestoreIds {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, default_value_t = 0.80)]
        threshold: f64,
        /// Restrict the fuzzy scan to the record's source year.
        #[arg(long)]
        restrict_year: bool,
        /// Replay a reviewed accept/reject manifest.
        #[arg(long)]
        apply_review: Option<PathBuf>,
        #[arg(long, default_value = "out/restore")]
        out: PathBuf,
    },
    /// Build every standard split (test carve, dev, fit/validate, k-fold)
    /// reproducibly from the configured seed.
    Split {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// key=value config overrides, applied last.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long, default_value_t = 50)]
        per_year: usize,
        #[arg(long, default_value_t = 2012)]
        year_start: i32,
        #[arg(long, default_value_t = 2021)]
        year_end: i32,
        #[arg(long, default_value = "out/splits")]
        out: PathBuf,
    },
    /// Train on FIT/VALIDATE and evaluate on TEST over the configured
    /// number of trials.
    Train {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        /// Also persist each trial's best-epoch model weights.
        #[arg(long)]
        save_models: bool,
        #[arg(long, default_value = "out/train")]
        out: PathBuf,
    },
    /// Run trials across every cross-validation fold.
    CrossValidate {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        /// Also persist each trial's best-epoch model weights.
        #[arg(long)]
        save_models: bool,
        #[arg(long, default_value = "out/cross-validate")]
        out: PathBuf,
    },
    /// Iterative pseudo-labeling over the unlabeled pool.
    SelfTrain {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        /// Cap on the unlabeled pool size (deterministic subsample).
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0.7)]
        floor: f64,
        /// Warm-start each iteration from the previous encoder instead of
        /// the pretrained checkpoint.
        #[arg(long)]
        incremental: bool,
        #[arg(long, default_value = "out/self-train")]
        out: PathBuf,
    },
    /// Classify tweets with a remote LLM prompt.
    LlmClassify {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        splits: Option<PathBuf>,
        /// Split to classify when --splits is given (e.g. TEST).
        #[arg(long, default_value = "TEST")]
        split: String,
        #[arg(long, value_enum, default_value = "direct")]
        mode: PromptModeArg,
        /// Request a brief explanation (the no-explanation variants are the
        /// default baselines).
        #[arg(long)]
        explanation: bool,
        /// Class-3 threshold used when scoring confidence responses.
        #[arg(long, default_value_t = 5.0)]
        k: f64,
        #[command(flatten)]
        endpoint: EndpointArgs,
        /// Response cache file; defaults to llm_cache.jsonl under
        /// FRAMING_CACHE_DIR (or out/).
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = "out/llm")]
        out: PathBuf,
    },
    /// Grid-search the Class-3 threshold on a validation split.
    LlmGrid {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long, default_value = "DEV_VALIDATE")]
        split: String,
        #[arg(long)]
        explanation: bool,
        #[command(flatten)]
        endpoint: EndpointArgs,
        /// Response cache file; defaults to llm_cache.jsonl under
        /// FRAMING_CACHE_DIR (or out/).
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = "out/llm-grid")]
        out: PathBuf,
    },
    /// Score a prediction file against a gold file (both CSV with
    /// tweet_id,label columns).
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the best configuration and label the entire unlabeled corpus.
    LabelAll {
        #[arg(long)]
        label_set: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long, default_value = "out/label-all")]
        out: PathBuf,
    },
    /// Monthly aggregates of the labeled corpus joined with author
    /// metadata, as tidy CSVs plus charts.
    Stats {
        #[arg(long)]
        labeled_corpus: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long, value_enum, default_value = "party")]
        group_by: GroupByArg,
        #[arg(long, default_value = "out/stats")]
        out: PathBuf,
    },
    /// Write a randomly initialized encoder checkpoint.
    InitCheckpoint {
        /// tiny, base, or large.
        #[arg(long, default_value = "tiny")]
        preset: String,
        #[arg(long, default_value_t = 8192)]
        vocab_size: usize,
        #[arg(long, default_value_t = 64)]
        max_len: usize,
        #[arg(long, default_value_t = 2025)]
        seed: u64,
        #[arg(long, default_value = "vinai/bertweet-base")]
        model_name: String,
        #[arg(long, default_value = "models")]
        models_dir: PathBuf,
    },
}

/// Explicit flag wins; otherwise llm_cache.jsonl under FRAMING_CACHE_DIR
/// (or out/).
fn resolve_cache(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| {
        std::env::var_os("FRAMING_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
            .join("llm_cache.jsonl")
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { corpus, format, labeled, keep_lang, out } => commands::cmd_ingest(
            &corpus,
            format.map(Into::into),
            labeled.as_deref(),
            keep_lang.as_deref(),
            &out,
        ),
        Command::RestoreIds { corpus, labeled, threshold, restrict_year, apply_review, out } => {
            commands::cmd_restore_ids(
                &corpus,
                &labeled,
                threshold,
                restrict_year,
                apply_review.as_deref(),
                &out,
            )
        }
        Command::Split { label_set, config, set, per_year, year_start, year_end, out } => {
            commands::cmd_split(
                &label_set,
                config.as_deref(),
                &set,
                per_year,
                year_start,
                year_end,
                &out,
            )
        }
        Command::Train { label_set, splits, config, set, save_models, out } => {
            commands::cmd_train(
                &label_set,
                &splits,
                config.as_deref(),
                &set,
                ExperimentMode::Holdout,
                save_models,
                &out,
            )
        }
        Command::CrossValidate { label_set, splits, config, set, save_models, out } => {
            commands::cmd_train(
                &label_set,
                &splits,
                config.as_deref(),
                &set,
                ExperimentMode::CrossValidation,
                save_models,
                &out,
            )
        }
        Command::SelfTrain {
            label_set,
            splits,
            corpus,
            config,
            set,
            sample,
            floor,
            incremental,
            out,
        } => commands::cmd_self_train(
            &label_set,
            &splits,
            &corpus,
            config.as_deref(),
            &set,
            sample,
            floor,
            incremental,
            &out,
        ),
        Command::LlmClassify {
            label_set,
            splits,
            split,
            mode,
            explanation,
            k,
            endpoint,
            cache,
            out,
        } => commands::cmd_llm_classify(
            &label_set,
            splits.as_deref(),
            &split,
            mode.into(),
            explanation,
            k,
            (&endpoint).into(),
            &resolve_cache(cache),
            &out,
        ),
        Command::LlmGrid { label_set, splits, split, explanation, endpoint, cache, out } => {
            commands::cmd_llm_grid(
                &label_set,
                &splits,
                &split,
                explanation,
                (&endpoint).into(),
                &resolve_cache(cache),
                &out,
            )
        }
        Command::Evaluate { pred, gold, out } => {
            commands::cmd_evaluate(&pred, &gold, out.as_deref())
        }
        Command::LabelAll { label_set, splits, corpus, config, set, out } => {
            commands::cmd_label_all(&label_set, &splits, &corpus, config.as_deref(), &set, &out)
        }
        Command::Stats { labeled_corpus, corpus, metadata, group_by, out } => {
            commands::cmd_stats(&labeled_corpus, &corpus, &metadata, group_by.into(), &out)
        }
        Command::InitCheckpoint { preset, vocab_size, max_len, seed, model_name, models_dir } => {
            commands::cmd_init_checkpoint(
                &preset,
                vocab_size,
                max_len,
                seed,
                &model_name,
                &models_dir,
            )
        }
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors by itself.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
