//! Chronological bucketing of articles and forecast-progress fractions.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::types::{GroupingConfig, NewsArticle, Question};

/// Group index of a date relative to an anchor: whole spans elapsed.
pub fn group_of(date: NaiveDate, anchor: NaiveDate, span_days: u32) -> usize {
    let days = (date - anchor).num_days();
    debug_assert!(days >= 0, "date precedes group anchor");
    (days.max(0) as u64 / u64::from(span_days.max(1))) as usize
}

/// Maps each article id to its group index. Day zero is the earliest
/// publish date in the list; articles on the same date share a group.
pub fn assign_groups(
    articles: &[NewsArticle],
    cfg: &GroupingConfig,
) -> Result<BTreeMap<String, usize>> {
    cfg.validate()?;
    let anchor = articles
        .iter()
        .map(|a| a.publish_date)
        .min()
        .ok_or_else(|| Error::EmptyInput("cannot group an empty article list".into()))?;
    Ok(articles
        .iter()
        .map(|a| {
            (
                a.id.clone(),
                group_of(a.publish_date, anchor, cfg.group_span_days),
            )
        })
        .collect())
}

/// Position of `article_date` within `[earliest, resolved_date]` as a fraction.
/// A zero-length span counts as complete.
pub fn forecast_progress(
    article_date: NaiveDate,
    question: &Question,
    earliest: NaiveDate,
) -> Result<f64> {
    if article_date < earliest || article_date > question.resolved_date {
        return Err(Error::Range(format!(
            "date {article_date} outside forecasting span [{earliest}, {}]",
            question.resolved_date
        )));
    }
    let span = (question.resolved_date - earliest).num_days();
    if span == 0 {
        return Ok(1.0);
    }
    Ok((article_date - earliest).num_days() as f64 / span as f64)
}
