//! JSON-lines persistence for questions and articles.
//!
//! Records are validated field by field so that a bad line produces an error
//! naming the offending key rather than a generic deserializer message.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::scm::CilScore;
use crate::types::{NewsArticle, Question, QuestionSource};

const QUESTION_KEYS: &[&str] = &[
    "id",
    "title",
    "background",
    "resolution_criteria",
    "open_date",
    "resolved_date",
    "ground_truth",
    "source",
];

const ARTICLE_KEYS: &[&str] = &[
    "id",
    "question_id",
    "publish_date",
    "title",
    "body",
    "url",
    "summary",
    "relevance_rating",
    "cil",
];

fn as_object(raw: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(raw)? {
        Value::Object(map) => Ok(map),
        _ => Err(Error::schema("<record>", "expected a JSON object")),
    }
}

fn required<'a>(map: &'a Map<String, Value>, field: &str) -> Result<&'a Value> {
    match map.get(field) {
        Some(Value::Null) | None => Err(Error::schema(field, "missing required key")),
        Some(v) => Ok(v),
    }
}

fn string_field(map: &Map<String, Value>, field: &str) -> Result<String> {
    match required(map, field)? {
        Value::String(s) => Ok(s.clone()),
        // ids are opaque; accept numeric ids from sloppy exporters
        Value::Number(n) if field.ends_with("id") => Ok(n.to_string()),
        other => Err(Error::schema(field, format!("expected string, got {other}"))),
    }
}

fn text_field(map: &Map<String, Value>, field: &str) -> Result<String> {
    let s = string_field(map, field)?;
    if s.trim().is_empty() {
        return Err(Error::Invariant(format!("`{field}` must be non-empty")));
    }
    Ok(s)
}

fn date_field(map: &Map<String, Value>, field: &str) -> Result<NaiveDate> {
    let s = string_field(map, field)?;
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::schema(field, format!("expected YYYY-MM-DD date ({e})")))
}

fn optional_string(map: &Map<String, Value>, field: &str) -> Result<Option<String>> {
    match map.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(Error::schema(field, format!("expected string, got {other}"))),
    }
}

fn passthrough(map: &Map<String, Value>, known: &[&str]) -> BTreeMap<String, Value> {
    map.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Parses one line of `questions.jsonl`.
pub fn parse_question_record(raw: &str) -> Result<Question> {
    let map = as_object(raw)?;
    let ground_truth = match required(&map, "ground_truth")? {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| Error::schema("ground_truth", "expected integer 0 or 1"))?,
        Value::Bool(b) => u64::from(*b),
        other => {
            return Err(Error::schema(
                "ground_truth",
                format!("expected integer, got {other}"),
            ))
        }
    };
    if ground_truth > 1 {
        return Err(Error::Invariant(format!(
            "ground_truth must be 0 or 1, got {ground_truth}"
        )));
    }
    let source = string_field(&map, "source")?
        .parse::<QuestionSource>()
        .map_err(|e| Error::schema("source", e))?;

    let question = Question {
        id: string_field(&map, "id")?,
        title: text_field(&map, "title")?,
        background: text_field(&map, "background")?,
        resolution_criteria: text_field(&map, "resolution_criteria")?,
        open_date: date_field(&map, "open_date")?,
        resolved_date: date_field(&map, "resolved_date")?,
        ground_truth: ground_truth as u8,
        source,
        metadata: passthrough(&map, QUESTION_KEYS),
    };
    if question.resolved_date < question.open_date {
        return Err(Error::Invariant(format!(
            "resolved_date {} precedes open_date {}",
            question.resolved_date, question.open_date
        )));
    }
    Ok(question)
}

/// Parses one line of `articles.jsonl`. Ownership checks against the
/// question (publish date before resolution) happen in [`validate_articles`].
pub fn parse_article_record(raw: &str) -> Result<NewsArticle> {
    let map = as_object(raw)?;
    let relevance_rating = match map.get("relevance_rating") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => {
            let r = n
                .as_u64()
                .ok_or_else(|| Error::schema("relevance_rating", "expected integer 1..6"))?;
            if !(1..=6).contains(&r) {
                return Err(Error::Invariant(format!(
                    "relevance_rating must be in 1..=6, got {r}"
                )));
            }
            Some(r as u8)
        }
        Some(other) => {
            return Err(Error::schema(
                "relevance_rating",
                format!("expected integer, got {other}"),
            ))
        }
    };
    let cil = match map.get("cil") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value::<CilScore>(v.clone())
                .map_err(|e| Error::schema("cil", e.to_string()))?,
        ),
    };
    Ok(NewsArticle {
        id: string_field(&map, "id")?,
        question_id: string_field(&map, "question_id")?,
        publish_date: date_field(&map, "publish_date")?,
        title: string_field(&map, "title")?,
        body: string_field(&map, "body")?,
        url: optional_string(&map, "url")?,
        summary: optional_string(&map, "summary")?,
        relevance_rating,
        cil,
        metadata: passthrough(&map, ARTICLE_KEYS),
    })
}

fn read_lines<T>(path: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<(usize, T)>> {
    let file = File::open(path)?;
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = parse(&line).map_err(|e| at_line(&display, idx + 1, e))?;
        out.push((idx + 1, item));
    }
    Ok(out)
}

fn at_line(path: &str, line: usize, e: Error) -> Error {
    Error::AtLine {
        path: path.to_string(),
        line,
        source: Box::new(e),
    }
}

pub fn read_questions(path: &Path) -> Result<Vec<Question>> {
    let display = path.display().to_string();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (line, q) in read_lines(path, parse_question_record)? {
        if !seen.insert(q.id.clone()) {
            let e = Error::Invariant(format!("duplicate question id `{}`", q.id));
            return Err(at_line(&display, line, e));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn read_articles(path: &Path) -> Result<Vec<NewsArticle>> {
    Ok(read_lines(path, parse_article_record)?.into_iter().map(|(_, a)| a).collect())
}

/// Reads articles and validates each against `questions`, reporting the
/// offending line on failure.
pub fn read_articles_checked(path: &Path, questions: &[Question]) -> Result<Vec<NewsArticle>> {
    let display = path.display().to_string();
    let mut checker = ArticleChecker::new(questions);
    let mut out = Vec::new();
    for (line, a) in read_lines(path, parse_article_record)? {
        checker.check(&a).map_err(|e| at_line(&display, line, e))?;
        out.push(a);
    }
    Ok(out)
}

struct ArticleChecker<'a> {
    by_id: BTreeMap<&'a str, &'a Question>,
    seen: std::collections::HashSet<(String, String)>,
}

impl<'a> ArticleChecker<'a> {
    fn new(questions: &'a [Question]) -> Self {
        Self {
            by_id: questions.iter().map(|q| (q.id.as_str(), q)).collect(),
            seen: Default::default(),
        }
    }

    fn check(&mut self, a: &NewsArticle) -> Result<()> {
        let q = self.by_id.get(a.question_id.as_str()).ok_or_else(|| {
            Error::Invariant(format!(
                "article `{}` references unknown question `{}`",
                a.id, a.question_id
            ))
        })?;
        if a.publish_date >= q.resolved_date {
            return Err(Error::Invariant(format!(
                "article `{}` published {} on/after resolution {} of `{}`",
                a.id, a.publish_date, q.resolved_date, q.id
            )));
        }
        if !self.seen.insert((a.question_id.clone(), a.id.clone())) {
            return Err(Error::Invariant(format!(
                "duplicate article id `{}` for question `{}`",
                a.id, a.question_id
            )));
        }
        Ok(())
    }
}

/// Checks every article against its owning question: the question must exist
/// and the article must predate the resolution.
pub fn validate_articles(questions: &[Question], articles: &[NewsArticle]) -> Result<()> {
    let mut checker = ArticleChecker::new(questions);
    articles.iter().try_for_each(|a| checker.check(a))
}

/// Groups articles by question id, keeping input order within each group.
pub fn articles_by_question(articles: &[NewsArticle]) -> BTreeMap<String, Vec<NewsArticle>> {
    let mut map: BTreeMap<String, Vec<NewsArticle>> = BTreeMap::new();
    for a in articles {
        map.entry(a.question_id.clone()).or_default().push(a.clone());
    }
    map
}

/// Writes one JSON value per line, replacing the file atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes pretty JSON atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"id":"q1","title":"Will it rain?","background":"Weather.","resolution_criteria":"Rain gauge > 1mm.","open_date":"2024-01-01","resolved_date":"2024-08-15","ground_truth":1,"source":"metaculus","tags":["x"]}"#;

    #[test]
    fn parses_question_and_keeps_unknown_keys() {
        let q = parse_question_record(GOOD).unwrap();
        assert_eq!(q.ground_truth, 1);
        assert_eq!(q.resolved_date, NaiveDate::from_ymd_opt(2024, 8, 15).unwrap());
        assert_eq!(q.metadata["tags"], serde_json::json!(["x"]));
        let round = serde_json::to_string(&q).unwrap();
        assert_eq!(parse_question_record(&round).unwrap(), q);
    }

    #[test]
    fn missing_resolution_criteria_names_field() {
        let raw = GOOD.replace(r#""resolution_criteria":"Rain gauge > 1mm.","#, "");
        match parse_question_record(&raw) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "resolution_criteria"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ground_truth_two_is_invariant_error() {
        let raw = GOOD.replace(r#""ground_truth":1"#, r#""ground_truth":2"#);
        assert!(matches!(parse_question_record(&raw), Err(Error::Invariant(_))));
    }

    #[test]
    fn resolved_before_open_rejected() {
        let raw = GOOD.replace("2024-08-15", "2023-12-01");
        assert!(matches!(parse_question_record(&raw), Err(Error::Invariant(_))));
    }

    #[test]
    fn ill_typed_date_is_schema_error() {
        let raw = GOOD.replace(r#""open_date":"2024-01-01""#, r#""open_date":20240101"#);
        match parse_question_record(&raw) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "open_date"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn article_rating_out_of_scale() {
        let raw = r#"{"id":"a","question_id":"q1","publish_date":"2024-02-01","title":"t","body":"b","relevance_rating":7}"#;
        assert!(matches!(parse_article_record(raw), Err(Error::Invariant(_))));
    }

    #[test]
    fn article_after_resolution_rejected() {
        let q = parse_question_record(GOOD).unwrap();
        let a = parse_article_record(
            r#"{"id":"a","question_id":"q1","publish_date":"2024-08-15","title":"t","body":"b"}"#,
        )
        .unwrap();
        assert!(validate_articles(&[q], &[a]).is_err());
    }

    #[test]
    fn checked_read_reports_line() {
        let q = parse_question_record(GOOD).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let ok = r#"{"id":"a","question_id":"q1","publish_date":"2024-02-01","title":"t","body":"b"}"#;
        let stray = ok.replace("q1", "q9");
        std::fs::write(&path, format!("{ok}\n\n{stray}\n")).unwrap();
        let err = read_articles_checked(&path, &[q]).unwrap_err();
        match &err {
            Error::AtLine { line, .. } => assert_eq!(*line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("a.jsonl:3:"), "{err}");
    }
}
