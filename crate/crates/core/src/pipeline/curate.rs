use crate::oracle::{parse_rating, render_prompt, LlmOracle, OracleQuery, QueryKind};
use crate::{Error, NewsArticle, Question, Result};

/// Characters of body text used when summarization fails.
pub const SUMMARY_FALLBACK_CHARS: usize = 512;

/// A value with an optional note explaining a degraded path.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub flag: Option<String>,
}

fn require_body(article: &NewsArticle) -> Result<()> {
    if article.body.trim().is_empty() {
        return Err(Error::InvalidArgument(format!("article {} has an empty body", article.id)));
    }
    Ok(())
}

/// Rates on the 1..=6 scale. An unparsable or out-of-scale reply is retried
/// once, then the rating defaults to 1.
pub fn rate_relevance(question: &Question, article: &NewsArticle, llm: &LlmOracle) -> Result<Flagged<u8>> {
    require_body(article)?;
    let query = OracleQuery::new(QueryKind::Relevance)
        .with_question(question)
        .bind("article", format!("{}\n{}", article.title, article.body));
    let prompt = render_prompt(&query)?;
    for attempt in 0..2 {
        let text = llm.complete(QueryKind::Relevance, &prompt, attempt)?;
        if let Ok(r) = parse_rating(&text) {
            return Ok(Flagged { value: r, flag: None });
        }
    }
    Ok(Flagged {
        value: 1,
        flag: Some(format!("article {}: relevance unparsable, defaulted to 1", article.id)),
    })
}

/// Highest rated first; ties by earlier date then id. Unrated articles sort
/// last.
pub fn select_top_articles(mut candidates: Vec<NewsArticle>, k: usize) -> Vec<NewsArticle> {
    candidates.sort_by(|a, b| {
        b.relevance_rating
            .unwrap_or(0)
            .cmp(&a.relevance_rating.unwrap_or(0))
            .then(a.publish_date.cmp(&b.publish_date))
            .then(a.id.cmp(&b.id))
    });
    candidates.truncate(k);
    candidates
}

fn leading_chars(text: &str, n: usize) -> String {
    text.chars().take(n).collect()
}

/// One completion. Provider failures and empty replies fall back to the
/// leading characters of the body.
pub fn summarize_article(article: &NewsArticle, llm: &LlmOracle, max_words: usize) -> Result<Flagged<String>> {
    require_body(article)?;
    let query = OracleQuery::new(QueryKind::Summarize)
        .bind("max_words", max_words.to_string())
        .bind("title", article.title.clone())
        .bind("article", article.body.clone());
    let prompt = render_prompt(&query)?;
    let fallback = |why: String| Flagged {
        value: leading_chars(&article.body, SUMMARY_FALLBACK_CHARS),
        flag: Some(format!("article {}: {why}; using leading body text", article.id)),
    };
    match llm.complete(QueryKind::Summarize, &prompt, 0) {
        Ok(text) if !text.trim().is_empty() => Ok(Flagged {
            value: text.trim().to_string(),
            flag: None,
        }),
        Ok(_) => Ok(fallback("empty summary".into())),
        Err(e) => {
            log::warn!("summarizing {} failed: {e}", article.id);
            Ok(fallback(format!("summarization failed ({e})")))
        }
    }
}
