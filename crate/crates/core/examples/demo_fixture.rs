//! Writes the offline demo: the partition fixture's questions, articles and
//! joint tables plus a config that scores them with the table oracle.
//!
//!     cargo run -p cilforge-core --example demo_fixture -- fixtures/demo

use std::path::PathBuf;

use cilforge_core::pipeline::SearchHit;
use cilforge_core::records::{write_json, write_jsonl};
use cilforge_core::synthetic::partition_fixture;

const CONFIG: &str = r#"[paths]
questions = "questions.jsonl"
articles = "articles.jsonl"
tables = "tables.json"
corpus = "corpus.jsonl"
output_dir = "out"

[oracle]
kind = "table"

[grouping]
group_span_days = 10
window = 3

[cil]
policy = "all"

[partition]
tau = 0.1
min_count = 5

[evaluate]
retrieval = "naive-embedding"
n = 5
reasoning = "cot"
runs = 2
cutoffs = [0.25, 0.5, 0.75, 1.0]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("fixtures/demo"), PathBuf::from);
    let fixture = partition_fixture()?;
    let bench = &fixture.benchmark;
    let corpus: Vec<SearchHit> = bench
        .articles
        .iter()
        .map(|a| SearchHit {
            url: Some(format!("https://news.example/{}/{}", a.question_id, a.id)),
            title: a.title.clone(),
            publish_date: a.publish_date,
            body: a.body.clone(),
        })
        .collect();
    write_jsonl(&dir.join("questions.jsonl"), &bench.questions)?;
    write_jsonl(&dir.join("articles.jsonl"), &bench.articles)?;
    write_json(&dir.join("tables.json"), &bench.tables_map())?;
    write_jsonl(&dir.join("corpus.jsonl"), &corpus)?;
    std::fs::write(dir.join("demo.toml"), CONFIG)?;
    println!(
        "wrote {} questions, {} articles to {}",
        bench.questions.len(),
        bench.articles.len(),
        dir.display()
    );
    Ok(())
}
