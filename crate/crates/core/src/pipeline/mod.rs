//! Benchmark construction: query generation, search, relevance rating,
//! selection, summarization, scoring and L1/L2 partitioning.

pub mod curate;
pub mod partition;
pub mod queries;
pub mod search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::LlmOracle;
use crate::{NewsArticle, Question, Result};

pub use curate::{rate_relevance, select_top_articles, summarize_article, Flagged};
pub use partition::{
    attach_scores, partition, score_and_partition, score_questions, BenchmarkPartition, CilRecord,
    PartitionConfig, ScoringRun,
};
pub use queries::{generate_queries, QueryGenConfig, QuerySet};
pub use search::{search_news, HttpNewsSearch, HttpSearchConfig, LocalCorpusSearch, NewsSearch, SearchHit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub queries: QueryGenConfig,
    pub per_query_limit: usize,
    pub top_k: usize,
    pub summary_words: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            queries: QueryGenConfig::default(),
            per_query_limit: 20,
            top_k: 100,
            summary_words: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltQuestion {
    pub queries: QuerySet,
    pub articles: Vec<NewsArticle>,
    pub warnings: Vec<String>,
}

/// Collects, rates, selects and summarizes articles for one question.
pub fn build_question(
    question: &Question,
    llm: &LlmOracle,
    search: &dyn NewsSearch,
    cfg: &BuildConfig,
) -> Result<BuiltQuestion> {
    let queries = generate_queries(question, llm, &cfg.queries)?;
    let (candidates, mut warnings) = search_news(question, &queries, search, cfg.per_query_limit);
    let candidates: Vec<NewsArticle> = candidates
        .into_iter()
        .filter(|a| {
            let keep = !a.body.trim().is_empty();
            if !keep {
                log::info!("dropping {}: empty body", a.id);
            }
            keep
        })
        .collect();
    let rated: Vec<(NewsArticle, Option<String>)> = candidates
        .into_par_iter()
        .map(|mut a| {
            let r = rate_relevance(question, &a, llm)?;
            a.relevance_rating = Some(r.value);
            Ok((a, r.flag))
        })
        .collect::<Result<_>>()?;
    let mut pool = Vec::with_capacity(rated.len());
    for (a, flag) in rated {
        warnings.extend(flag);
        pool.push(a);
    }
    let selected = select_top_articles(pool, cfg.top_k);
    let summarized: Vec<(NewsArticle, Option<String>)> = selected
        .into_par_iter()
        .map(|mut a| {
            let s = summarize_article(&a, llm, cfg.summary_words)?;
            a.summary = Some(s.value);
            Ok((a, s.flag))
        })
        .collect::<Result<_>>()?;
    let mut articles = Vec::with_capacity(summarized.len());
    for (a, flag) in summarized {
        warnings.extend(flag);
        articles.push(a);
    }
    articles.sort_by(|a, b| (a.publish_date, &a.id).cmp(&(b.publish_date, &b.id)));
    Ok(BuiltQuestion {
        queries,
        articles,
        warnings,
    })
}
