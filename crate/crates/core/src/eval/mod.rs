//! Evaluation of retrieval and reasoning strategies by Brier score, with
//! temporal-progress restriction of the article pool.

pub mod embed;
pub mod evaluate;
pub mod reason;
pub mod retrieve;

pub use embed::{cosine, Embedder, HashedBagOfTokens, HttpEmbedder, HttpEmbedderConfig};
pub use evaluate::{
    evaluate, restrict_pools, temporal_evaluate, write_temporal_csv, EvaluationResult, QuestionOutcome,
    TemporalPoint, NO_ARTICLES_FLAG,
};
pub use reason::{
    reason, Forecaster, Prediction, PromptForecaster, ReasoningKind, ReasoningStrategy, TableForecaster,
    FALLBACK_PREDICTION,
};
pub use retrieve::{
    mean_cil, question_text, retrieve, retrieve_reranked, Reranker, RetrievalKind, RetrievalStrategy,
};
