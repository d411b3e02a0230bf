use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use sha2::{Digest, Sha256};

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo").join(name)
}

fn cilforge(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cilforge"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("CILFORGE_ENDPOINT")
        .env_remove("CILFORGE_API_KEY")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Config over the demo fixture with outputs in `dir`.
fn table_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "[paths]\nquestions = {:?}\narticles = {:?}\ntables = {:?}\noutput_dir = {:?}\n\n[oracle]\nkind = \"table\"\n\n[cil]\npolicy = \"all\"\n{extra}",
        demo("questions.jsonl"),
        demo("articles.jsonl"),
        demo("tables.json"),
        dir.join("out"),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.trim().is_empty()).count()
}

#[test]
fn demo_config_cil_writes_one_record_per_article() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["demo.toml", "questions.jsonl", "articles.jsonl", "tables.json", "corpus.jsonl"] {
        std::fs::copy(demo(f), dir.path().join(f)).unwrap();
    }
    ok(&cilforge(&dir.path().join("demo.toml"), &["cil"]));
    assert_eq!(lines(&dir.path().join("out/cil-scores.jsonl")), lines(&demo("articles.jsonl")));
}

#[test]
fn partition_split_and_min_count_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = table_config(dir.path(), "");
    ok(&cilforge(&cfg, &["cil"]));
    ok(&cilforge(&cfg, &["partition"]));
    let p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/partition.json")).unwrap()).unwrap();
    let ids = |k: &str| -> Vec<String> {
        p[k].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
    };
    assert_eq!(ids("l1"), ["and6", "and5", "linear6", "linear7-no", "linear5-mild"]);
    assert_eq!(ids("l2").len(), 4);

    ok(&cilforge(&cfg, &["--min-count", "0", "partition"]));
    let p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/partition.json")).unwrap()).unwrap();
    assert_eq!(p["l1"].as_array().unwrap().len(), lines(&demo("questions.jsonl")));
    assert!(p["l2"].as_array().unwrap().is_empty());
}

#[test]
fn full_table_pipeline_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = table_config(dir.path(), "[evaluate]\nn = 5\ncutoffs = [0.5, 1.0]\n");
    for cmd in ["ingest", "cil", "partition", "evaluate", "temporal", "report"] {
        ok(&cilforge(&cfg, &[cmd]));
    }
    let out = dir.path().join("out");
    let csv = std::fs::read_to_string(out.join("results-temporal.csv")).unwrap();
    assert!(csv.starts_with("cutoff,brier_mean,brier_std,mean_retrieved_cil,flagged_count"), "{csv}");
    assert_eq!(csv.lines().count(), 3);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("L1 5 / L2 4"), "{report}");
    assert!(out.join("report-cil-histogram.csv").is_file());
    assert!(out.join("report-questions.csv").is_file());

    let high = cilforge(&cfg, &["--retrieval", "cil-high", "evaluate"]);
    let brier = |o: &Output| -> f64 {
        ok(o);
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
        v["brier_mean"].as_f64().unwrap()
    };
    let high = brier(&high);
    let low = cilforge(&cfg, &["--retrieval", "cil-low", "evaluate"]);
    let low = brier(&low);
    assert!(high < low, "{high} vs {low}");
}

#[test]
fn l1_subset_evaluates_only_l1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = table_config(dir.path(), "[evaluate]\nsubset = \"l1\"\n");
    let early = cilforge(&cfg, &["evaluate"]);
    assert_eq!(early.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&early.stderr).contains("run `partition` first"));
    ok(&cilforge(&cfg, &["cil"]));
    ok(&cilforge(&cfg, &["partition"]));
    ok(&cilforge(&cfg, &["evaluate"]));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/results.json")).unwrap()).unwrap();
    assert_eq!(v["questions"], 5);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = table_config(dir.path(), "");
    assert_eq!(cilforge(&cfg, &["--bogus", "cil"]).status.code(), Some(2));
    assert_eq!(cilforge(&cfg, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(cilforge(&cfg, &["--retrieval", "best", "evaluate"]).status.code(), Some(2));
    let no_config = Command::new(env!("CARGO_BIN_EXE_cilforge")).arg("cil").output().unwrap();
    assert_eq!(no_config.status.code(), Some(2));
}

#[test]
fn validation_error_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = std::fs::read_to_string(demo("articles.jsonl")).unwrap();
    let mut rows: Vec<&str> = good.lines().collect();
    let bad = rows[2].replace("\"publish_date\":\"2024-01-15\"", "\"publish_date\":\"soon\"");
    rows[2] = &bad;
    let articles = dir.path().join("articles.jsonl");
    std::fs::write(&articles, rows.join("\n")).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[paths]\nquestions = {:?}\narticles = \"articles.jsonl\"\ntables = {:?}\n[oracle]\nkind = \"table\"\n",
            demo("questions.jsonl"),
            demo("tables.json")
        ),
    )
    .unwrap();
    let out = cilforge(&cfg, &["ingest"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error[validation]"), "{err}");
    assert!(err.contains("articles.jsonl:3:"), "{err}");
    assert!(err.contains("publish_date"), "{err}");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = table_config(dir.path(), "policy_typo = 1\n");
    let out = cilforge(&cfg, &["cil"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[config]"));

    let cfg = table_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("policy = \"all\"", "policy = \"monte-carlo\"");
    std::fs::write(&cfg, text).unwrap();
    let out = cilforge(&cfg, &["cil"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    ok(&cilforge(&cfg, &["--seed", "7", "cil"]));
}

struct Server {
    endpoint: String,
    hits: Arc<AtomicUsize>,
}

/// OpenAI-compatible endpoint whose answer is a pure function of the
/// request body.
fn chat_server() -> Server {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", server.server_addr().to_ip().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let digest = Sha256::digest(body.as_bytes());
            let p = 0.05 + f64::from(digest[0]) / 255.0 * 0.9;
            let reply = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": format!("Weighing it up.\n*{p:.2}*")}}]
            });
            let _ = req.respond(tiny_http::Response::from_string(reply.to_string()));
        }
    });
    Server { endpoint, hits }
}

fn llm_config(dir: &Path, endpoint: &str) -> PathBuf {
    let questions: Vec<String> = std::fs::read_to_string(demo("questions.jsonl"))
        .unwrap()
        .lines()
        .take(2)
        .map(String::from)
        .collect();
    let ids: Vec<String> = questions
        .iter()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    let articles: Vec<String> = std::fs::read_to_string(demo("articles.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            ids.iter().any(|id| v["question_id"] == id.as_str())
        })
        .map(String::from)
        .collect();
    std::fs::write(dir.join("questions.jsonl"), questions.join("\n")).unwrap();
    std::fs::write(dir.join("articles.jsonl"), articles.join("\n")).unwrap();
    let path = dir.join("llm.toml");
    std::fs::write(
        &path,
        format!(
            "[paths]\nquestions = \"questions.jsonl\"\narticles = \"articles.jsonl\"\noutput_dir = \"out\"\n\n\
             [oracle]\nkind = \"llm\"\n\n[provider]\nendpoint = {endpoint:?}\nmodel = \"demo-model\"\nbackoff_ms = 1\n\n\
             [cil]\npolicy = \"top-k\"\nk = 2\n\n[evaluate]\nretrieval = \"cil-high\"\nn = 3\nruns = 2\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn warm_cache_reruns_are_free_and_identical() {
    let server = chat_server();
    let dir = tempfile::tempdir().unwrap();
    let cfg = llm_config(dir.path(), &server.endpoint);
    let out = dir.path().join("out");
    ok(&cilforge(&cfg, &["cil"]));
    ok(&cilforge(&cfg, &["evaluate"]));
    let cold = server.hits.load(Ordering::SeqCst);
    assert!(cold > 0);
    let scores = std::fs::read(out.join("cil-scores.jsonl")).unwrap();
    let results = std::fs::read(out.join("results.json")).unwrap();
    let n_articles = lines(&dir.path().join("articles.jsonl"));
    assert_eq!(lines(&out.join("cil-scores.jsonl")), n_articles);

    let cil = cilforge(&cfg, &["cil"]);
    ok(&cil);
    assert!(String::from_utf8_lossy(&cil.stdout).contains("provider calls 0"));
    ok(&cilforge(&cfg, &["evaluate"]));
    assert_eq!(server.hits.load(Ordering::SeqCst), cold);
    assert_eq!(std::fs::read(out.join("cil-scores.jsonl")).unwrap(), scores);
    assert_eq!(std::fs::read(out.join("results.json")).unwrap(), results);

    // Parallelism changes scheduling only.
    ok(&cilforge(&cfg, &["--parallelism", "1", "cil"]));
    assert_eq!(std::fs::read(out.join("cil-scores.jsonl")).unwrap(), scores);
    assert_eq!(server.hits.load(Ordering::SeqCst), cold);

    ok(&cilforge(&cfg, &["--no-cache", "evaluate"]));
    assert!(server.hits.load(Ordering::SeqCst) > cold);
    assert_eq!(std::fs::read(out.join("results.json")).unwrap(), results);
}

#[test]
fn endpoint_env_overrides_config() {
    let server = chat_server();
    let dir = tempfile::tempdir().unwrap();
    let cfg = llm_config(dir.path(), "http://127.0.0.1:9/unreachable");
    let out = Command::new(env!("CARGO_BIN_EXE_cilforge"))
        .args(["--config"])
        .arg(&cfg)
        .args(["--no-cache", "cil"])
        .env("CILFORGE_ENDPOINT", &server.endpoint)
        .output()
        .unwrap();
    ok(&out);
    assert!(server.hits.load(Ordering::SeqCst) > 0);
}
