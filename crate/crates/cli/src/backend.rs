use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::Context;
use cilforge_core::eval::{
    Embedder, Forecaster, HashedBagOfTokens, HttpEmbedder, HttpEmbedderConfig, PromptForecaster,
    TableForecaster,
};
use cilforge_core::oracle::{
    CachedProvider, HttpChatProvider, LlmOracle, LlmSettings, ProviderConfig, ResponseCache,
    TableOracle,
};
use cilforge_core::pipeline::{HttpNewsSearch, LocalCorpusSearch, NewsSearch};
use cilforge_core::{JointTable, ProbabilityOracle};

use crate::config::{config_error, EmbeddingKind, OracleKind, RunConfig, SearchKind};

pub struct Settings {
    pub parallelism: usize,
    pub no_cache: bool,
}

pub enum Backend {
    Llm(LlmOracle),
    Table(TableOracle),
}

impl Backend {
    pub fn open(cfg: &RunConfig, s: &Settings) -> anyhow::Result<Self> {
        match cfg.oracle.kind {
            OracleKind::Table => {
                let path = cfg.input(&cfg.paths.tables, "paths.tables")?;
                let text = std::fs::read_to_string(&path)?;
                let tables: BTreeMap<String, JointTable> = serde_json::from_str(&text)
                    .with_context(|| format!("{}: not a map of question id to joint table", path.display()))?;
                let oracle = TableOracle::new(tables)
                    .with_context(|| format!("{}: invalid table", path.display()))?;
                Ok(Self::Table(oracle))
            }
            OracleKind::Llm => Ok(Self::Llm(open_llm(cfg, s)?)),
        }
    }

    pub fn oracle(&self) -> &dyn ProbabilityOracle {
        match self {
            Self::Llm(o) => o,
            Self::Table(o) => o,
        }
    }

    pub fn llm(&self) -> Option<&LlmOracle> {
        match self {
            Self::Llm(o) => Some(o),
            Self::Table(_) => None,
        }
    }

    pub fn forecaster(&self, cfg: &RunConfig) -> Box<dyn Forecaster + '_> {
        match self {
            Self::Llm(o) => Box::new(PromptForecaster::new(o, cfg.evaluate.reasoning)),
            Self::Table(o) => Box::new(TableForecaster::new(o)),
        }
    }

    /// One line of call accounting for the console.
    pub fn usage(&self) -> String {
        match self {
            Self::Llm(o) => format!(
                "provider calls {}, cache hits {}",
                o.gateway().provider_calls(),
                o.gateway().cache_hits()
            ),
            Self::Table(o) => format!("table queries {}", o.queries()),
        }
    }
}

fn env_nonempty(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

fn open_llm(cfg: &RunConfig, s: &Settings) -> anyhow::Result<LlmOracle> {
    let p = &cfg.provider;
    let endpoint = env_nonempty(&p.endpoint_env)
        .or_else(|| p.endpoint.clone())
        .ok_or_else(|| config_error(format!("[provider] endpoint is not set (config or ${})", p.endpoint_env)))?;
    if p.model.trim().is_empty() {
        return Err(config_error("[provider] model is not set"));
    }
    if p.calls == 0 {
        return Err(config_error("[provider] calls must be at least 1"));
    }
    let mut pc = ProviderConfig::new(&endpoint);
    pc.api_key = env_nonempty(&p.api_key_env);
    pc.response_path = p.response_path.clone();
    pc.timeout_secs = p.timeout_secs;
    pc.attempts = p.attempts.max(1);
    pc.backoff_ms = p.backoff_ms;
    let cache = if s.no_cache {
        None
    } else {
        let dir = cfg.cache_dir();
        Some(ResponseCache::new(&dir).with_context(|| format!("cannot open cache {}", dir.display()))?)
    };
    let gateway = CachedProvider::new(Arc::new(HttpChatProvider::new(pc)), cache, s.parallelism);
    let settings = LlmSettings {
        model: p.model.clone(),
        temperatures: p.temperatures,
        probability_calls: p.calls,
    };
    Ok(LlmOracle::new(gateway, settings))
}

pub fn embedder(cfg: &RunConfig) -> anyhow::Result<Box<dyn Embedder>> {
    let e = &cfg.embedding;
    if e.dimension == 0 {
        return Err(config_error("[embedding] dimension must be at least 1"));
    }
    match e.kind {
        EmbeddingKind::Hashed => Ok(Box::new(HashedBagOfTokens::new(e.dimension))),
        EmbeddingKind::Http => {
            let endpoint = e
                .endpoint
                .clone()
                .ok_or_else(|| config_error("[embedding] kind http needs an endpoint"))?;
            Ok(Box::new(HttpEmbedder::new(HttpEmbedderConfig {
                endpoint,
                model: e.model.clone(),
                api_key: env_nonempty(&e.api_key_env),
                response_path: e.response_path.clone(),
                dimension: e.dimension,
                ..HttpEmbedderConfig::default()
            })))
        }
    }
}

pub fn search(cfg: &RunConfig) -> anyhow::Result<Box<dyn NewsSearch>> {
    match cfg.search.kind {
        SearchKind::Local => {
            let path = cfg.input(&cfg.paths.corpus, "paths.corpus")?;
            Ok(Box::new(LocalCorpusSearch::from_jsonl(&path)?))
        }
        SearchKind::Http => {
            if cfg.search.http.endpoint.trim().is_empty() {
                return Err(config_error("[search] kind http needs an endpoint"));
            }
            Ok(Box::new(HttpNewsSearch::new(cfg.search.http.clone())))
        }
    }
}
