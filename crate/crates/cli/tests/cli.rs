//! Black-box tests of the command-line interface: exit codes, file
//! contracts, and reproducibility of persisted artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn framing() -> Command {
    Command::new(env!("CARGO_BIN_EXE_framing"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    framing().current_dir(dir).args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_corpus(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("corpus.csv");
    let mut file = std::fs::File::create(&path).unwrap();
    writeln!(file, "tweet_id,text,author_id,created_at").unwrap();
    for i in 0..n {
        let text = match i % 3 {
            0 => format!("crisis broken failing issue {i} worsening shortage"),
            1 => format!("bill passed fix reform {i} legislation enacted"),
            _ => format!("happy birthday greetings {i} visiting friends today"),
        };
        let year = 2012 + (i / 40) % 3;
        writeln!(file, "{i},{text},a{},{}-0{}-15", i % 6, year, 1 + i % 9).unwrap();
    }
    path
}

fn write_labeled(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("labeled.csv");
    let mut file = std::fs::File::create(&path).unwrap();
    writeln!(file, "text,label_ar,label_mb,year").unwrap();
    for i in 0..n {
        let (text, label) = match i % 3 {
            0 => (format!("crisis broken failing issue {i} worsening shortage"), 1),
            1 => (format!("bill passed fix reform {i} legislation enacted"), 2),
            _ => (format!("happy birthday greetings {i} visiting friends today"), 3),
        };
        let year = 2012 + (i / 40) % 3;
        writeln!(file, "{text},{label},{label},{year}").unwrap();
    }
    path
}

#[test]
fn unknown_command_exits_2() {
    let out = framing().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "usage text missing: {stderr}");
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["ingest", "--corpus", "does-not-exist.csv", "--out", "out/ingest"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn bad_config_override_exits_1_with_key() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 30);
    write_labeled(dir.path(), 12);
    let out = run_in(
        dir.path(),
        &[
            "split",
            "--label-set",
            "labeled.csv",
            "--set",
            "batch_size=0",
            "--out",
            "out/splits",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_size"));
}

#[test]
fn split_writes_manifests_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 120);
    write_labeled(dir.path(), 120);

    assert_success(&run_in(
        dir.path(),
        &["restore-ids", "--corpus", "corpus.csv", "--labeled", "labeled.csv", "--out", "out/restore"],
    ));
    let label_set = dir.path().join("out/restore/label_set.csv");
    assert!(label_set.is_file());

    let split_args = [
        "split",
        "--label-set",
        "out/restore/label_set.csv",
        "--per-year",
        "5",
        "--year-start",
        "2012",
        "--year-end",
        "2014",
        "--set",
        "cross_val_folds=3",
        "--out",
        "out/splits",
    ];
    assert_success(&run_in(dir.path(), &split_args));
    let splits_path = dir.path().join("out/splits/splits.json");
    let first = std::fs::read_to_string(&splits_path).unwrap();
    assert!(dir.path().join("out/splits/run_manifest.json").is_file());
    assert!(dir.path().join("out/splits/split_report.json").is_file());

    // Identical inputs and seed produce byte-identical split manifests.
    let mut args2 = split_args;
    args2[args2.len() - 1] = "out/splits2";
    assert_success(&run_in(dir.path(), &args2));
    let second = std::fs::read_to_string(dir.path().join("out/splits2/splits.json")).unwrap();
    assert_eq!(first, second);

    let bundle: serde_json::Value = serde_json::from_str(&first).unwrap();
    let names: Vec<&str> = bundle["splits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    for expected in
        ["TEST", "TRAIN", "TRAIN_AGREE", "DEV_FIT", "DEV_VALIDATE", "DEV_TEST", "FIT", "VALIDATE"]
    {
        assert!(names.contains(&expected), "missing split {expected}");
    }
}

#[test]
fn evaluate_identical_files_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p.csv");
    std::fs::write(&pred, "tweet_id,label\n1,1\n2,2\n3,3\n4,1\n").unwrap();
    let out = run_in(
        dir.path(),
        &["evaluate", "--pred", "p.csv", "--gold", "p.csv"],
    );
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(value["classification"]["accuracy"], 1.0);
    assert_eq!(value["agreement"]["kappa"], 1.0);
}

#[test]
fn train_pipeline_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 120);
    write_labeled(dir.path(), 120);

    assert_success(&run_in(
        dir.path(),
        &[
            "init-checkpoint",
            "--preset",
            "tiny",
            "--vocab-size",
            "1000",
            "--max-len",
            "24",
            "--models-dir",
            "models",
        ],
    ));
    assert_success(&run_in(
        dir.path(),
        &["restore-ids", "--corpus", "corpus.csv", "--labeled", "labeled.csv", "--out", "out/restore"],
    ));
    assert_success(&run_in(
        dir.path(),
        &[
            "split",
            "--label-set",
            "out/restore/label_set.csv",
            "--per-year",
            "5",
            "--year-start",
            "2012",
            "--year-end",
            "2014",
            "--set",
            "cross_val_folds=3",
            "--out",
            "out/splits",
        ],
    ));
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--label-set",
            "out/restore/label_set.csv",
            "--splits",
            "out/splits/splits.json",
            "--set",
            "trials=1",
            "--set",
            "max_epochs=3",
            "--set",
            "batch_size=16",
            "--set",
            "learning_rate=0.005",
            "--out",
            "out/train",
        ],
    );
    assert_success(&out);
    let report_path = dir.path().join("out/train/experiment_report.json");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
    assert!(report["aggregate_ar"]["accuracy"]["mean"].as_f64().unwrap() > 0.5);
    assert!(dir.path().join("out/train/run_manifest.json").is_file());
}

/// Minimal chat-completions server: answers every request with a fixed
/// JSON body, counting requests.
fn spawn_stub_llm(
    responses: &'static str,
) -> (String, std::sync::Arc<std::sync::atomic::AtomicUsize>) {
    use std::io::{BufRead, BufReader, Read, Write as IoWrite};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_thread = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            hits_thread.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() || line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0u8; content_length];
            let _ = reader.read_exact(&mut body);
            let payload = format!(
                "{{\"choices\":[{{\"message\":{{\"role\":\"assistant\",\"content\":{responses}}}}}]}}"
            );
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                payload.len(),
                payload
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (format!("http://{addr}"), hits)
}

#[test]
fn llm_classify_against_stub_endpoint_uses_cache_on_rerun() {
    use std::sync::atomic::Ordering;

    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 30);
    write_labeled(dir.path(), 12);
    assert_success(&run_in(
        dir.path(),
        &["restore-ids", "--corpus", "corpus.csv", "--labeled", "labeled.csv", "--out", "out/restore"],
    ));

    let (base_url, hits) = spawn_stub_llm("\"2\"");
    let args = [
        "llm-classify",
        "--label-set",
        "out/restore/label_set.csv",
        "--mode",
        "direct",
        "--base-url",
        &base_url,
        "--backoff-base-ms",
        "0",
        "--cache",
        "cache.jsonl",
        "--out",
        "out/llm",
    ];
    let out = framing()
        .current_dir(dir.path())
        .env("LLM_API_KEY", "test-key")
        .args(args)
        .output()
        .unwrap();
    assert_success(&out);
    let first_hits = hits.load(Ordering::SeqCst);
    assert_eq!(first_hits, 12, "one request per tweet");
    assert!(dir.path().join("out/llm/responses.jsonl").is_file());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/llm/llm_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["classified"], 12);

    // Rerun: everything served from the cache, zero new requests.
    let out = framing()
        .current_dir(dir.path())
        .env("LLM_API_KEY", "test-key")
        .args(args)
        .output()
        .unwrap();
    assert_success(&out);
    assert_eq!(hits.load(Ordering::SeqCst), first_hits, "rerun must not hit the network");
}

#[test]
fn stats_requires_valid_metadata() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 30);
    std::fs::write(
        dir.path().join("labels.csv"),
        "tweet_id,label\n0,1\n1,2\n2,3\n",
    )
    .unwrap();
    // Duplicate author rows are fatal.
    std::fs::write(
        dir.path().join("metadata.csv"),
        "author_id,party,gender,race,state\na0,D,F,white,NV\na0,R,M,white,TX\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "stats",
            "--labeled-corpus",
            "labels.csv",
            "--corpus",
            "corpus.csv",
            "--metadata",
            "metadata.csv",
            "--out",
            "out/stats",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate author_id"));
}
