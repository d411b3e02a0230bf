use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cilforge_core::eval::{ReasoningKind, RetrievalKind, RetrievalStrategy};
use cilforge_core::oracle::Temperatures;
use cilforge_core::pipeline::{BuildConfig, HttpSearchConfig, PartitionConfig};
use cilforge_core::{CilPolicy, EvaluationConfig, GroupingConfig};
use serde::Deserialize;

/// A problem with the configuration itself, as opposed to the data.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub oracle: OracleSection,
    pub provider: ProviderSection,
    pub grouping: GroupingSection,
    pub cil: CilSection,
    pub partition: PartitionSection,
    pub evaluate: EvaluateSection,
    pub build: BuildConfig,
    pub search: SearchSection,
    pub embedding: EmbeddingSection,
    /// Set at load time; relative paths are resolved against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub questions: Option<PathBuf>,
    pub articles: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Local search corpus used by `build`.
    pub corpus: Option<PathBuf>,
    /// Joint tables per question id for the table oracle.
    pub tables: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            questions: None,
            articles: None,
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            corpus: None,
            tables: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    #[default]
    Llm,
    Table,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub kind: OracleKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub endpoint: Option<String>,
    /// Environment variable that overrides `endpoint` when set.
    pub endpoint_env: String,
    pub model: String,
    pub api_key_env: String,
    pub response_path: String,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub backoff_ms: u64,
    /// Completions averaged per probability estimate.
    pub calls: u32,
    pub temperatures: Temperatures,
}

impl Default for ProviderSection {
    fn default() -> Self {
        let base = cilforge_core::oracle::ProviderConfig::new("");
        Self {
            endpoint: None,
            endpoint_env: "CILFORGE_ENDPOINT".into(),
            model: String::new(),
            api_key_env: "CILFORGE_API_KEY".into(),
            response_path: base.response_path,
            timeout_secs: base.timeout_secs,
            attempts: base.attempts,
            backoff_ms: base.backoff_ms,
            calls: 2,
            temperatures: Temperatures::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupingSection {
    pub group_span_days: u32,
    pub window: u32,
}

impl Default for GroupingSection {
    fn default() -> Self {
        let g = GroupingConfig::default();
        Self {
            group_span_days: g.group_span_days,
            window: g.window,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    All,
    #[default]
    TopK,
    MonteCarlo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CilSection {
    pub policy: PolicyKind,
    pub k: usize,
    pub samples: usize,
    pub seed: Option<u64>,
}

impl Default for CilSection {
    fn default() -> Self {
        Self {
            policy: PolicyKind::default(),
            k: 3,
            samples: 256,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub tau: f64,
    pub min_count: usize,
}

impl Default for PartitionSection {
    fn default() -> Self {
        let p = PartitionConfig::default();
        Self {
            tau: p.tau,
            min_count: p.min_count,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    #[default]
    All,
    L1,
    L2,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub retrieval: RetrievalKind,
    pub n: usize,
    pub reasoning: ReasoningKind,
    pub runs: usize,
    pub cutoffs: Vec<f64>,
    /// Which partition side to evaluate; `l1`/`l2` need partition.json.
    pub subset: Subset,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        let e = EvaluationConfig::default();
        Self {
            retrieval: RetrievalKind::NaiveEmbedding,
            n: e.retrieval_n,
            reasoning: ReasoningKind::Cot,
            runs: e.runs,
            cutoffs: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            subset: Subset::All,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchKind {
    #[default]
    Local,
    Http,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct SearchSection {
    pub kind: SearchKind,
    #[serde(flatten)]
    pub http: HttpSearchConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    #[default]
    Hashed,
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub kind: EmbeddingKind,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub model: String,
    pub api_key_env: String,
    pub response_path: String,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let h = cilforge_core::eval::HttpEmbedderConfig::default();
        Self {
            kind: EmbeddingKind::Hashed,
            dimension: h.dimension,
            endpoint: None,
            model: String::new(),
            api_key_env: "CILFORGE_API_KEY".into(),
            response_path: h.response_path,
        }
    }
}

/// Values given on the command line; each replaces its config counterpart.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub cache_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub min_count: Option<usize>,
    pub window: Option<u32>,
    pub group_span: Option<u32>,
    pub retrieval: Option<RetrievalKind>,
    pub n: Option<usize>,
    pub reasoning: Option<ReasoningKind>,
    pub runs: Option<usize>,
    pub cutoffs: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| config_error(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
        cfg.base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.cache_dir {
            // Flag paths are taken relative to the working directory.
            self.paths.cache_dir = Some(std::path::absolute(v).unwrap_or_else(|_| v.clone()));
        }
        if let Some(v) = o.seed {
            self.cil.seed = Some(v);
        }
        if let Some(v) = o.tau {
            self.partition.tau = v;
        }
        if let Some(v) = o.min_count {
            self.partition.min_count = v;
        }
        if let Some(v) = o.window {
            self.grouping.window = v;
        }
        if let Some(v) = o.group_span {
            self.grouping.group_span_days = v;
        }
        if let Some(v) = o.retrieval {
            self.evaluate.retrieval = v;
        }
        if let Some(v) = o.n {
            self.evaluate.n = v;
        }
        if let Some(v) = o.reasoning {
            self.evaluate.reasoning = v;
        }
        if let Some(v) = o.runs {
            self.evaluate.runs = v;
        }
        if let Some(v) = &o.cutoffs {
            self.evaluate.cutoffs = v.clone();
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// An input file that must exist before the command starts.
    pub fn input(&self, value: &Option<PathBuf>, key: &str) -> anyhow::Result<PathBuf> {
        let p = value
            .as_deref()
            .ok_or_else(|| config_error(format!("`{key}` is not set")))?;
        let p = self.resolve(p);
        if !p.is_file() {
            return Err(config_error(format!("`{key}` = {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn questions_path(&self) -> anyhow::Result<PathBuf> {
        self.input(&self.paths.questions, "paths.questions")
    }

    pub fn articles_path(&self) -> anyhow::Result<PathBuf> {
        self.input(&self.paths.articles, "paths.articles")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output_dir)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    pub fn cache_dir(&self) -> PathBuf {
        match &self.paths.cache_dir {
            Some(p) => self.resolve(p),
            None => self.output("cache"),
        }
    }

    pub fn grouping(&self) -> anyhow::Result<GroupingConfig> {
        GroupingConfig::new(self.grouping.group_span_days, self.grouping.window)
            .map_err(|e| config_error(format!("[grouping]: {e}")))
    }

    pub fn cil_policy(&self) -> anyhow::Result<CilPolicy> {
        let c = &self.cil;
        Ok(match c.policy {
            PolicyKind::All => CilPolicy::All,
            PolicyKind::TopK => {
                if c.k == 0 {
                    return Err(config_error("[cil] k must be at least 1"));
                }
                CilPolicy::TopK { k: c.k }
            }
            PolicyKind::MonteCarlo => {
                let seed = c
                    .seed
                    .ok_or_else(|| config_error("[cil] policy monte-carlo needs a seed (config `seed` or --seed)"))?;
                if c.samples == 0 {
                    return Err(config_error("[cil] samples must be at least 1"));
                }
                CilPolicy::MonteCarlo {
                    samples: c.samples,
                    seed,
                }
            }
        })
    }

    pub fn partition(&self) -> anyhow::Result<PartitionConfig> {
        let p = &self.partition;
        if !p.tau.is_finite() {
            return Err(config_error("[partition] tau must be finite"));
        }
        Ok(PartitionConfig {
            tau: p.tau,
            min_count: p.min_count,
        })
    }

    pub fn retrieval(&self) -> anyhow::Result<RetrievalStrategy> {
        RetrievalStrategy::new(self.evaluate.retrieval, self.evaluate.n)
            .map_err(|e| config_error(format!("[evaluate]: {e}")))
    }

    pub fn evaluation(&self) -> anyhow::Result<EvaluationConfig> {
        let cfg = EvaluationConfig {
            retrieval_n: self.evaluate.n.max(1),
            runs: self.evaluate.runs,
        };
        cfg.validate().map_err(|e| config_error(format!("[evaluate]: {e}")))?;
        Ok(cfg)
    }

    pub fn cutoffs(&self) -> anyhow::Result<Vec<f64>> {
        let c = &self.evaluate.cutoffs;
        if c.is_empty() {
            return Err(config_error("[evaluate] cutoffs is empty"));
        }
        if let Some(bad) = c.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(config_error(format!("[evaluate] cutoff {bad} is outside (0, 1]")));
        }
        Ok(c.clone())
    }
}
