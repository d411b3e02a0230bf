use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::queries::QuerySet;
use crate::{Error, NewsArticle, Question, Result};

/// A search result before it is bound to a question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    #[serde(default)]
    pub url: Option<String>,
    pub title: String,
    pub publish_date: NaiveDate,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRequest<'a> {
    pub query: &'a str,
    /// Exclusive upper bound on publish dates.
    pub before: NaiveDate,
    pub after: Option<NaiveDate>,
    pub limit: usize,
}

pub trait NewsSearch: Send + Sync {
    fn search(&self, request: &SearchRequest<'_>) -> Result<Vec<SearchHit>>;
}

fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Keyword search over an in-memory corpus. A document matches when it
/// shares at least one token with the query; more shared tokens rank higher.
pub struct LocalCorpusSearch {
    docs: Vec<(SearchHit, BTreeSet<String>)>,
}

impl LocalCorpusSearch {
    pub fn new(docs: Vec<SearchHit>) -> Self {
        Self {
            docs: docs
                .into_iter()
                .map(|d| {
                    let t = tokens(&format!("{} {}", d.title, d.body));
                    (d, t)
                })
                .collect(),
        }
    }

    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut docs = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let hit: SearchHit = serde_json::from_str(&line).map_err(|e| Error::AtLine {
                path: path.display().to_string(),
                line: i + 1,
                source: Box::new(e.into()),
            })?;
            docs.push(hit);
        }
        Ok(Self::new(docs))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl NewsSearch for LocalCorpusSearch {
    fn search(&self, request: &SearchRequest<'_>) -> Result<Vec<SearchHit>> {
        let q = tokens(request.query);
        let mut scored: Vec<(usize, &SearchHit)> = self
            .docs
            .iter()
            .filter(|(d, _)| d.publish_date < request.before)
            .filter(|(d, _)| request.after.is_none_or(|a| d.publish_date >= a))
            .map(|(d, t)| (q.intersection(t).count(), d))
            .filter(|(n, _)| *n > 0)
            .collect();
        scored.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(a.1.publish_date.cmp(&b.1.publish_date))
                .then(a.1.title.cmp(&b.1.title))
        });
        Ok(scored
            .into_iter()
            .take(request.limit)
            .map(|(_, d)| d.clone())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpSearchConfig {
    pub endpoint: String,
    pub query_param: String,
    pub start_param: String,
    pub end_param: String,
    pub limit_param: String,
    pub timeout_secs: u64,
}

impl Default for HttpSearchConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            query_param: "q".into(),
            start_param: "start_date".into(),
            end_param: "end_date".into(),
            limit_param: "limit".into(),
            timeout_secs: 60,
        }
    }
}

/// GET client for a search service returning a JSON array of hits.
pub struct HttpNewsSearch {
    config: HttpSearchConfig,
    agent: ureq::Agent,
}

impl HttpNewsSearch {
    pub fn new(config: HttpSearchConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
                .http_status_as_error(false)
                .build(),
        );
        Self { config, agent }
    }
}

impl NewsSearch for HttpNewsSearch {
    fn search(&self, request: &SearchRequest<'_>) -> Result<Vec<SearchHit>> {
        let c = &self.config;
        // the service's end date is inclusive
        let end = request.before.pred_opt().unwrap_or(request.before);
        let mut req = self
            .agent
            .get(&c.endpoint)
            .query(&c.query_param, request.query)
            .query(&c.end_param, end.to_string())
            .query(&c.limit_param, request.limit.to_string());
        if let Some(a) = request.after {
            req = req.query(&c.start_param, a.to_string());
        }
        let mut response = req
            .call()
            .map_err(|e| Error::Pipeline(format!("search request failed: {e}")))?;
        let status = response.status();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Pipeline(format!("search response unreadable: {e}")))?;
        if !status.is_success() {
            return Err(Error::Pipeline(format!("search returned {status}")));
        }
        Ok(serde_json::from_str(&body)?)
    }
}

/// Lowercased title plus the URL's host and path, so tracking parameters
/// and scheme differences do not split duplicates.
pub fn dedup_key(title: &str, url: Option<&str>) -> String {
    let title = title.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let location = url
        .and_then(|u| url::Url::parse(u).ok())
        .map(|u| {
            let host = u.host_str().unwrap_or("").trim_start_matches("www.").to_lowercase();
            format!("{host}{}", u.path().trim_end_matches('/'))
        })
        .unwrap_or_default();
    format!("{title}|{location}")
}

fn article_id(question_id: &str, key: &str) -> String {
    let digest = Sha256::digest(key.as_bytes());
    format!("{question_id}-{}", &hex::encode(digest)[..12])
}

/// Union of per-query results for `question`, deduplicated, with anything
/// dated on or after the resolution date dropped. Client failures are
/// returned as warnings alongside whatever was collected.
pub fn search_news(
    question: &Question,
    queries: &QuerySet,
    client: &dyn NewsSearch,
    per_query_limit: usize,
) -> (Vec<NewsArticle>, Vec<String>) {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for query in queries.all() {
        let request = SearchRequest {
            query,
            before: question.resolved_date,
            after: None,
            limit: per_query_limit,
        };
        let hits = match client.search(&request) {
            Ok(h) => h,
            Err(e) => {
                warnings.push(format!("query `{query}`: {e}"));
                continue;
            }
        };
        for hit in hits {
            if hit.publish_date >= question.resolved_date {
                continue;
            }
            let key = dedup_key(&hit.title, hit.url.as_deref());
            if !seen.insert(key.clone()) {
                continue;
            }
            out.push(NewsArticle {
                id: article_id(&question.id, &key),
                question_id: question.id.clone(),
                publish_date: hit.publish_date,
                title: hit.title,
                body: hit.body,
                url: hit.url,
                summary: None,
                relevance_rating: None,
                cil: None,
                metadata: Default::default(),
            });
        }
    }
    (out, warnings)
}
