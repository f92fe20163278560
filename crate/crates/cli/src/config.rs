//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use greenai_core::analytics::{default_windows, LeaderboardOptions, Window};
use greenai_core::corpus::{IngestOptions, SourceFile, YearBasis};
use greenai_core::hdbscan::HdbscanConfig;
use greenai_core::impact::{ValuationParams, DEFAULT_PI_BAR};
use greenai_core::topicmodel::{GridSpec, SelectionCriteria};
use greenai_core::umap::LayoutConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub out: PathBuf,
    pub paths: Paths,
    pub ingest: IngestOptions,
    pub text: TextConfig,
    pub layout: LayoutConfig,
    pub clustering: HdbscanConfig,
    pub fit: FitConfig,
    pub grid: GridSpec,
    pub selection: SelectionCriteria,
    pub analytics: AnalyticsConfig,
    pub valuation: ValuationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            threads: 0,
            out: PathBuf::from("out"),
            paths: Paths::default(),
            ingest: IngestOptions::default(),
            text: TextConfig::default(),
            // The selected model of the reference analysis.
            layout: LayoutConfig { n_neighbors: 30, min_dist: 0.1, n_components: 2, ..LayoutConfig::default() },
            clustering: HdbscanConfig { min_cluster_size: 200, ..HdbscanConfig::default() },
            fit: FitConfig::default(),
            grid: GridSpec::default(),
            selection: SelectionCriteria::default(),
            analytics: AnalyticsConfig::default(),
            valuation: ValuationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Tabular patent sources merged on patent id.
    pub sources: Vec<SourceFile>,
    /// `.pemb` or `.csv`; the fallback embedder runs when absent.
    pub embeddings: Option<PathBuf>,
    /// CSV `patent_id,xi_musd1982`.
    pub valuations: Option<PathBuf>,
    /// CSV `patent_id,r,n_same_day,market_cap` for computing values with the filter.
    pub returns: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub boilerplate: Option<PathBuf>,
    /// CSV `topic_id,macro_id,macro_label`.
    pub macro_domains: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub min_df: usize,
    /// Dimension of the fallback embedding.
    pub fallback_dim: usize,
    /// Required embedding dimension when loading from file; 0 accepts any.
    pub expect_dim: usize,
    pub top_n: usize,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig { min_df: 5, fallback_dim: 384, expect_dim: 0, top_n: 10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Take the layout and clustering settings from the grid-search selection.
    pub use_selection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub windows: Vec<Window>,
    pub leaderboard: LeaderboardOptions,
    pub top_k: usize,
    pub rolling_window: usize,
    /// Inclusive year range for time series; the corpus span when absent.
    pub year_range: Option<(i32, i32)>,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            windows: default_windows(),
            leaderboard: LeaderboardOptions { basis: YearBasis::Grant, ..Default::default() },
            top_k: 10,
            rolling_window: 3,
            year_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValuationConfig {
    pub pi_bar: f64,
    pub delta: Option<f64>,
    pub sigma_eps: Option<f64>,
    pub winsorize: Option<f64>,
}

impl Default for ValuationConfig {
    fn default() -> Self {
        ValuationConfig { pi_bar: DEFAULT_PI_BAR, delta: None, sigma_eps: None, winsorize: None }
    }
}

impl ValuationConfig {
    pub fn params(&self) -> Result<ValuationParams> {
        let (Some(delta), Some(sigma_eps)) = (self.delta, self.sigma_eps) else {
            return Err(CliError::Usage("valuation.delta and valuation.sigma_eps are required with paths.returns".into()));
        };
        ValuationParams::new(self.pi_bar, delta, sigma_eps).map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// A parsed config together with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Original file contents, or empty when running on defaults.
    pub source_text: String,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(LoadedConfig { config, source_text: text })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        for s in &mut self.paths.sources {
            fix(&mut s.path);
        }
        let p = &mut self.paths;
        for opt in [&mut p.embeddings, &mut p.valuations, &mut p.returns, &mut p.stopwords, &mut p.boilerplate, &mut p.macro_domains] {
            if let Some(path) = opt {
                fix(path);
            }
        }
    }

    /// Checks value ranges and that every configured input file exists.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        let optional = [&p.embeddings, &p.valuations, &p.returns, &p.stopwords, &p.boilerplate, &p.macro_domains];
        for path in p.sources.iter().map(|s| &s.path).chain(optional.into_iter().flatten()) {
            if !path.exists() {
                return Err(CliError::Data(format!("configured input {} does not exist", path.display())));
            }
        }
        if self.text.min_df == 0 {
            return Err(CliError::Usage("text.min_df must be at least 1".into()));
        }
        if self.text.top_n == 0 {
            return Err(CliError::Usage("text.top_n must be at least 1".into()));
        }
        if self.analytics.rolling_window == 0 || self.analytics.rolling_window % 2 == 0 {
            return Err(CliError::Usage("analytics.rolling_window must be odd".into()));
        }
        if let Some(w) = self.analytics.windows.iter().find(|w| w.start > w.end) {
            return Err(CliError::Usage(format!("window {} is empty", w.label())));
        }
        if self.ingest.min_year > self.ingest.max_year {
            return Err(CliError::Usage("ingest.min_year exceeds ingest.max_year".into()));
        }
        Ok(())
    }
}
