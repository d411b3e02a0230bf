use chrono::NaiveDate;

use crate::types::{NewsArticle, Question, QuestionSource};

pub use crate::oracle::mock::{EchoProvider, ScriptedProvider};

pub fn question(id: &str, resolved: NaiveDate, truth: u8) -> Question {
    Question {
        id: id.to_string(),
        title: format!("Will event {id} happen?"),
        background: "Some background.".into(),
        resolution_criteria: "Resolves yes if it happens.".into(),
        open_date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().min(resolved),
        resolved_date: resolved,
        ground_truth: truth,
        source: QuestionSource::Synthetic,
        metadata: Default::default(),
    }
}

pub fn article(id: &str, date: NaiveDate) -> NewsArticle {
    NewsArticle {
        id: id.to_string(),
        question_id: "q".into(),
        publish_date: date,
        title: format!("title {id}"),
        body: format!("body {id}"),
        url: None,
        summary: None,
        relevance_rating: None,
        cil: None,
        metadata: Default::default(),
    }
}
