use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::embed::{cosine, Embedder};
use crate::{Error, NewsArticle, Question, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalKind {
    None,
    NaiveEmbedding,
    RelevanceRated,
    CilHigh,
    CilLow,
}

impl RetrievalKind {
    pub const ALL: [RetrievalKind; 5] = [
        Self::None,
        Self::NaiveEmbedding,
        Self::RelevanceRated,
        Self::CilHigh,
        Self::CilLow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::NaiveEmbedding => "naive-embedding",
            Self::RelevanceRated => "relevance-rated",
            Self::CilHigh => "cil-high",
            Self::CilLow => "cil-low",
        }
    }
}

impl fmt::Display for RetrievalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown retrieval strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalStrategy {
    pub kind: RetrievalKind,
    pub n: usize,
}

impl RetrievalStrategy {
    pub fn new(kind: RetrievalKind, n: usize) -> Result<Self> {
        let s = Self { kind, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != RetrievalKind::None && self.n == 0 {
            return Err(Error::InvalidArgument(format!(
                "retrieval `{}` needs n >= 1",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Scores candidate articles for a question; a hook for learned rerankers.
pub trait Reranker: Send + Sync {
    fn score(&self, question: &Question, candidates: &[&NewsArticle]) -> Result<Vec<f64>>;
}

pub fn question_text(q: &Question) -> String {
    format!("{}\n{}", q.title, q.background)
}

/// Higher score first, then earlier date, then id.
fn top_n(mut scored: Vec<(f64, &NewsArticle)>, n: usize) -> Vec<&NewsArticle> {
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.publish_date.cmp(&b.1.publish_date))
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    scored.into_iter().take(n).map(|(_, a)| a).collect()
}

fn required<'a, T>(
    articles: &'a [NewsArticle],
    what: &str,
    get: impl Fn(&NewsArticle) -> Option<T>,
) -> Result<Vec<(T, &'a NewsArticle)>> {
    let missing: Vec<&str> = articles
        .iter()
        .filter(|a| get(a).is_none())
        .map(|a| a.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Strategy(format!(
            "{} article(s) lack {what}: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok(articles.iter().map(|a| (get(a).unwrap(), a)).collect())
}

/// Up to `strategy.n` articles from `articles`, best first.
pub fn retrieve<'a>(
    question: &Question,
    articles: &'a [NewsArticle],
    strategy: &RetrievalStrategy,
    embedder: &dyn Embedder,
) -> Result<Vec<&'a NewsArticle>> {
    strategy.validate()?;
    let n = strategy.n;
    Ok(match strategy.kind {
        RetrievalKind::None => Vec::new(),
        RetrievalKind::NaiveEmbedding => {
            let qv = embedder.embed(&question_text(question));
            let scored = articles
                .iter()
                .map(|a| (cosine(&qv, &embedder.embed(a.event_text())), a))
                .collect();
            top_n(scored, n)
        }
        RetrievalKind::RelevanceRated => {
            let scored = required(articles, "a relevance rating", |a| a.relevance_rating)?;
            top_n(scored.into_iter().map(|(r, a)| (f64::from(r), a)).collect(), n)
        }
        RetrievalKind::CilHigh => top_n(required(articles, "a CIL score", NewsArticle::cil_value)?, n),
        RetrievalKind::CilLow => {
            let scored = required(articles, "a CIL score", NewsArticle::cil_value)?;
            top_n(scored.into_iter().map(|(v, a)| (-v, a)).collect(), n)
        }
    })
}

/// Top `n` by an external reranker, same tie-break as [`retrieve`].
pub fn retrieve_reranked<'a>(
    question: &Question,
    articles: &'a [NewsArticle],
    n: usize,
    reranker: &dyn Reranker,
) -> Result<Vec<&'a NewsArticle>> {
    let refs: Vec<&NewsArticle> = articles.iter().collect();
    let scores = reranker.score(question, &refs)?;
    if scores.len() != refs.len() {
        return Err(Error::Strategy(format!(
            "reranker returned {} scores for {} candidates",
            scores.len(),
            refs.len()
        )));
    }
    if scores.iter().any(|s| s.partial_cmp(&0.0).is_none()) {
        return Err(Error::Strategy("reranker returned NaN".into()));
    }
    Ok(top_n(scores.into_iter().zip(refs).collect(), n))
}

/// Mean CIL of `retrieved`, or `None` if none carry a score.
pub fn mean_cil(retrieved: &[&NewsArticle]) -> Option<f64> {
    let v: Vec<f64> = retrieved.iter().filter_map(|a| a.cil_value()).collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::embed::HashedBagOfTokens;
    use crate::scm::{CilScore, EstimationMode};
    use crate::testutil::{article, question};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, day).unwrap()
    }

    fn scored(id: &str, day: u32, v: f64) -> NewsArticle {
        let mut a = article(id, d(day));
        a.cil = Some(CilScore {
            value: v,
            p_do1: 0.5,
            p_do0: 0.5 - v,
            conditioning_set_size: 0,
            estimation_mode: EstimationMode::FullEnumeration,
            oracle_calls: 2,
        });
        a
    }

    fn ids(v: &[&NewsArticle]) -> Vec<String> {
        v.iter().map(|a| a.id.clone()).collect()
    }

    fn q() -> Question {
        question("q", NaiveDate::from_ymd_opt(2024, 6, 1).unwrap(), 1)
    }

    #[test]
    fn cil_high_and_low() {
        let arts = vec![scored("a", 1, 0.7), scored("b", 2, 0.0), scored("c", 3, -0.2)];
        let e = HashedBagOfTokens::default();
        let high = retrieve(&q(), &arts, &RetrievalStrategy::new(RetrievalKind::CilHigh, 2).unwrap(), &e).unwrap();
        assert_eq!(ids(&high), vec!["a", "b"]);
        let low = retrieve(&q(), &arts, &RetrievalStrategy::new(RetrievalKind::CilLow, 2).unwrap(), &e).unwrap();
        assert_eq!(ids(&low), vec!["c", "b"]);
    }

    #[test]
    fn none_is_empty() {
        let arts = vec![scored("a", 1, 0.7)];
        let s = RetrievalStrategy::new(RetrievalKind::None, 0).unwrap();
        assert!(retrieve(&q(), &arts, &s, &HashedBagOfTokens::default()).unwrap().is_empty());
        assert!(RetrievalStrategy::new(RetrievalKind::CilHigh, 0).is_err());
    }

    #[test]
    fn question_text_ranks_first() {
        let question = q();
        let mut arts: Vec<NewsArticle> = (1..6).map(|i| article(&format!("a{i}"), d(i))).collect();
        arts[3].summary = Some(question_text(&question));
        let s = RetrievalStrategy::new(RetrievalKind::NaiveEmbedding, 3).unwrap();
        let got = retrieve(&question, &arts, &s, &HashedBagOfTokens::default()).unwrap();
        assert_eq!(got[0].id, "a4");
    }

    #[test]
    fn missing_scores_named() {
        let arts = vec![scored("a", 1, 0.1), article("bare", d(2))];
        let e = HashedBagOfTokens::default();
        let err = retrieve(&q(), &arts, &RetrievalStrategy::new(RetrievalKind::CilLow, 1).unwrap(), &e).unwrap_err();
        assert!(err.to_string().contains("bare"), "{err}");
        let err = retrieve(&q(), &arts, &RetrievalStrategy::new(RetrievalKind::RelevanceRated, 1).unwrap(), &e).unwrap_err();
        assert!(matches!(err, Error::Strategy(_)));
    }

    #[test]
    fn relevance_ties_by_date() {
        let mut arts = vec![article("late", d(9)), article("early", d(2)), article("low", d(1))];
        arts[0].relevance_rating = Some(5);
        arts[1].relevance_rating = Some(5);
        arts[2].relevance_rating = Some(2);
        let s = RetrievalStrategy::new(RetrievalKind::RelevanceRated, 2).unwrap();
        let got = retrieve(&q(), &arts, &s, &HashedBagOfTokens::default()).unwrap();
        assert_eq!(ids(&got), vec!["early", "late"]);
    }

    struct ByLength;
    impl Reranker for ByLength {
        fn score(&self, _: &Question, c: &[&NewsArticle]) -> Result<Vec<f64>> {
            Ok(c.iter().map(|a| a.body.len() as f64).collect())
        }
    }

    #[test]
    fn reranker_hook() {
        let mut arts = vec![article("a", d(1)), article("b", d(2))];
        arts[1].body = "much longer body text".into();
        let got = retrieve_reranked(&q(), &arts, 1, &ByLength).unwrap();
        assert_eq!(got[0].id, "b");
    }

    proptest! {
        #[test]
        fn cil_extremes_bound_any_subset(values in proptest::collection::vec(-1.0f64..1.0, 1..15), n in 1usize..6) {
            let arts: Vec<NewsArticle> = values.iter().enumerate()
                .map(|(i, v)| scored(&format!("a{i:02}"), 1 + (i as u32 % 28), *v)).collect();
            let e = HashedBagOfTokens::default();
            let take = |k| retrieve(&q(), &arts, &RetrievalStrategy::new(k, n).unwrap(), &e).unwrap();
            let high = mean_cil(&take(RetrievalKind::CilHigh)).unwrap();
            let low = mean_cil(&take(RetrievalKind::CilLow)).unwrap();
            let naive = mean_cil(&take(RetrievalKind::NaiveEmbedding)).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let k = n.min(values.len());
            let best = sorted[..k].iter().sum::<f64>() / k as f64;
            let worst = sorted[values.len() - k..].iter().sum::<f64>() / k as f64;
            prop_assert!((high - best).abs() < 1e-12);
            prop_assert!((low - worst).abs() < 1e-12);
            prop_assert!(high >= naive - 1e-12 && naive >= low - 1e-12);
        }
    }
}
