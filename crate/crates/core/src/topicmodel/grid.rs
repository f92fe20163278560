//! Hyperparameter grid search, model filtering and selection.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hdbscan::HdbscanConfig;
use crate::umap::LayoutConfig;

use super::{fit_model, ModelInputs, ModelMetrics, TopicError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_neighbors: Vec<usize>,
    pub min_dist: Vec<f64>,
    pub min_cluster_size: Vec<usize>,
    pub n_components: Vec<usize>,
}

impl Default for GridSpec {
    /// The 3 × 3 × 3 × 2 grid.
    fn default() -> Self {
        GridSpec {
            n_neighbors: vec![10, 30, 50],
            min_dist: vec![0.1, 0.4, 0.8],
            min_cluster_size: vec![50, 200, 500],
            n_components: vec![2, 5],
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.n_neighbors.len() * self.min_dist.len() * self.min_cluster_size.len() * self.n_components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian product, `n_components` varying fastest.
    pub fn configs(&self) -> Vec<GridConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &n_neighbors in &self.n_neighbors {
            for &min_dist in &self.min_dist {
                for &min_cluster_size in &self.min_cluster_size {
                    for &n_components in &self.n_components {
                        out.push(GridConfig { n_neighbors, min_dist, min_cluster_size, n_components });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub min_cluster_size: usize,
    pub n_components: usize,
}

impl GridConfig {
    /// Stable identifier used as the results-log key.
    pub fn key(&self) -> String {
        format!("nn{}-md{}-mcs{}-nc{}", self.n_neighbors, self.min_dist, self.min_cluster_size, self.n_components)
    }

    /// Run seed: base seed mixed with the first 8 bytes of SHA-256 of [`Self::key`].
    pub fn derive_seed(&self, base_seed: u64) -> u64 {
        let digest = Sha256::digest(self.key().as_bytes());
        base_seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn cmp_lex(&self, other: &Self) -> Ordering {
        self.n_neighbors
            .cmp(&other.n_neighbors)
            .then(self.min_dist.total_cmp(&other.min_dist))
            .then(self.min_cluster_size.cmp(&other.min_cluster_size))
            .then(self.n_components.cmp(&other.n_components))
    }

    pub fn layout(&self, template: &LayoutConfig, seed: u64) -> LayoutConfig {
        LayoutConfig {
            n_neighbors: self.n_neighbors,
            min_dist: self.min_dist,
            n_components: self.n_components,
            seed,
            ..template.clone()
        }
    }

    pub fn clustering(&self, min_samples: Option<usize>) -> HdbscanConfig {
        HdbscanConfig { min_cluster_size: self.min_cluster_size, min_samples, allow_single_cluster: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub config: GridConfig,
    pub key: String,
    pub seed: u64,
    pub status: RunStatus,
    pub metrics: Option<ModelMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub base_seed: u64,
    /// Worker count; 0 uses the global pool.
    pub threads: usize,
    /// Source of the non-tuned layout settings (epochs, learning rate, ...).
    pub layout: LayoutConfig,
    pub min_samples: Option<usize>,
    pub top_n: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { base_seed: 0, threads: 0, layout: LayoutConfig::default(), min_samples: None, top_n: 10 }
    }
}

/// Fits and scores a single configuration. Failures become a `Failed` run.
pub fn run_config(inputs: &ModelInputs, cfg: &GridConfig, opts: &GridOptions) -> GridRun {
    let seed = cfg.derive_seed(opts.base_seed);
    let layout = LayoutConfig { parallel: false, ..cfg.layout(&opts.layout, seed) };
    let outcome = fit_model(inputs, &layout, &cfg.clustering(opts.min_samples), opts.top_n);
    let (status, metrics) = match outcome {
        Ok(m) => (RunStatus::Ok, Some(m.metrics)),
        Err(e) => (RunStatus::Failed(e.to_string()), None),
    };
    GridRun { config: *cfg, key: cfg.key(), seed, status, metrics }
}

/// Runs every grid configuration on a worker pool. Runs found in
/// `previous` (matched by key and seed) are reused rather than refitted.
/// `on_done` sees each fresh run as it completes, in completion order;
/// the returned list is in grid order.
pub fn grid_search(
    inputs: &ModelInputs,
    grid: &GridSpec,
    opts: &GridOptions,
    previous: &[GridRun],
    on_done: &(dyn Fn(&GridRun) + Sync),
) -> Result<Vec<GridRun>, TopicError> {
    use rayon::prelude::*;
    if grid.is_empty() {
        return Err(TopicError::EmptyGrid);
    }
    let done: HashMap<&str, &GridRun> = previous.iter().map(|r| (r.key.as_str(), r)).collect();
    let configs = grid.configs();
    let work = || {
        configs
            .par_iter()
            .map(|cfg| match done.get(cfg.key().as_str()) {
                Some(r) if r.seed == cfg.derive_seed(opts.base_seed) => (*r).clone(),
                _ => {
                    let run = run_config(inputs, cfg, opts);
                    on_done(&run);
                    run
                }
            })
            .collect::<Vec<_>>()
    };
    if opts.threads == 0 {
        Ok(work())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| TopicError::Pool(e.to_string()))?;
        Ok(pool.install(work))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionCriteria {
    /// C1: outlier share must stay strictly below this percentage.
    pub max_outlier_pct: f64,
    /// C2 bounds on the topic count.
    pub min_topics: usize,
    pub max_topics: usize,
    pub inclusive_topic_bounds: bool,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria { max_outlier_pct: 20.0, min_topics: 5, max_topics: 30, inclusive_topic_bounds: true }
    }
}

impl SelectionCriteria {
    pub fn accepts(&self, m: &ModelMetrics) -> bool {
        let c1 = m.outlier_pct < self.max_outlier_pct;
        let c2 = if self.inclusive_topic_bounds {
            (self.min_topics..=self.max_topics).contains(&m.n_topics)
        } else {
            m.n_topics > self.min_topics && m.n_topics < self.max_topics
        };
        c1 && c2 && m.umass.is_some() && m.diversity_pct.is_some()
    }
}

/// Successful runs meeting both criteria, in input order.
pub fn filter_models(runs: &[GridRun], criteria: &SelectionCriteria) -> Vec<GridRun> {
    runs.iter()
        .filter(|r| r.status == RunStatus::Ok && r.metrics.as_ref().is_some_and(|m| criteria.accepts(m)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRun {
    pub rank: usize,
    pub pareto: bool,
    pub run: GridRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub selected: GridRun,
    /// Every survivor: Pareto points first, then by |UMass| ascending,
    /// diversity descending, configuration order.
    pub ranking: Vec<RankedRun>,
}

fn objectives(r: &GridRun) -> (f64, f64) {
    let m = r.metrics.as_ref().expect("survivors carry metrics");
    (m.umass.expect("survivor umass").abs(), m.diversity_pct.expect("survivor diversity"))
}

/// Pareto front on (low |UMass|, high diversity), resolved by |UMass|.
pub fn select_model(survivors: &[GridRun]) -> Result<Selection, TopicError> {
    if survivors.is_empty() {
        return Err(TopicError::NoSurvivors);
    }
    let obj: Vec<(f64, f64)> = survivors.iter().map(objectives).collect();
    let dominated = |i: usize| {
        obj.iter().any(|&(u, d)| u <= obj[i].0 && d >= obj[i].1 && (u < obj[i].0 || d > obj[i].1))
    };
    let mut order: Vec<(bool, usize)> = (0..survivors.len()).map(|i| (!dominated(i), i)).collect();
    order.sort_by(|&(pa, a), &(pb, b)| {
        pb.cmp(&pa)
            .then(obj[a].0.total_cmp(&obj[b].0))
            .then(obj[b].1.total_cmp(&obj[a].1))
            .then(survivors[a].config.cmp_lex(&survivors[b].config))
    });
    let ranking: Vec<RankedRun> = order
        .iter()
        .enumerate()
        .map(|(rank, &(pareto, i))| RankedRun { rank: rank + 1, pareto, run: survivors[i].clone() })
        .collect();
    Ok(Selection { selected: ranking[0].run.clone(), ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(nn: usize, umass: f64, div: f64, outliers: f64, topics: usize) -> GridRun {
        let config = GridConfig { n_neighbors: nn, min_dist: 0.1, min_cluster_size: 50, n_components: 2 };
        GridRun {
            key: config.key(),
            seed: 0,
            config,
            status: RunStatus::Ok,
            metrics: Some(ModelMetrics { umass: Some(umass), diversity_pct: Some(div), outlier_pct: outliers, n_topics: topics }),
        }
    }

    #[test]
    fn default_grid_has_54_configs() {
        let g = GridSpec::default();
        assert_eq!(g.len(), 54);
        let configs = g.configs();
        assert_eq!(configs.len(), 54);
        let mut keys: Vec<String> = configs.iter().map(GridConfig::key).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 54);
    }

    #[test]
    fn singleton_grid() {
        let g = GridSpec { n_neighbors: vec![15], min_dist: vec![0.1], min_cluster_size: vec![5], n_components: vec![2] };
        assert_eq!(g.configs().len(), 1);
    }

    #[test]
    fn seeds_differ_per_config_and_base() {
        let c = GridSpec::default().configs();
        assert_ne!(c[0].derive_seed(1), c[1].derive_seed(1));
        assert_ne!(c[0].derive_seed(1), c[0].derive_seed(2));
        assert_eq!(c[3].derive_seed(9), c[3].derive_seed(9));
    }

    #[test]
    fn filter_boundaries() {
        let crit = SelectionCriteria::default();
        let runs = vec![
            run(1, -3.0, 80.0, 32.0, 16),
            run(2, -3.0, 80.0, 10.0, 40),
            run(3, -2.9693, 81.25, 12.1, 16),
            run(4, -3.0, 80.0, 20.0, 10),
            run(5, -3.0, 80.0, 19.99, 5),
            run(6, -3.0, 80.0, 5.0, 30),
            run(7, -3.0, 80.0, 5.0, 4),
            run(8, -3.0, 80.0, 5.0, 31),
        ];
        let kept: Vec<usize> = filter_models(&runs, &crit).iter().map(|r| r.config.n_neighbors).collect();
        assert_eq!(kept, [3, 5, 6]);
        let strict = SelectionCriteria { inclusive_topic_bounds: false, ..crit };
        let kept: Vec<usize> = filter_models(&runs, &strict).iter().map(|r| r.config.n_neighbors).collect();
        assert_eq!(kept, [3]);
    }

    #[test]
    fn failed_runs_are_filtered() {
        let mut r = run(1, -1.0, 90.0, 1.0, 10);
        r.status = RunStatus::Failed("boom".into());
        assert!(filter_models(&[r], &SelectionCriteria::default()).is_empty());
    }

    #[test]
    fn dominance_selects_dominating_model() {
        let s = select_model(&[run(1, -2.9, 81.0, 1.0, 10), run(2, -3.5, 80.0, 1.0, 10)]).unwrap();
        assert_eq!(s.selected.config.n_neighbors, 1);
        assert!(s.ranking[0].pareto && !s.ranking[1].pareto);
    }

    #[test]
    fn non_dominated_pair_uses_umass() {
        let s = select_model(&[run(1, -2.9, 81.0, 1.0, 10), run(2, -2.5, 78.0, 1.0, 10)]).unwrap();
        assert_eq!(s.selected.config.n_neighbors, 2);
        assert!(s.ranking.iter().all(|r| r.pareto));
    }

    #[test]
    fn exact_ties_fall_back_to_config_order() {
        let s = select_model(&[run(9, -2.0, 70.0, 1.0, 10), run(3, -2.0, 70.0, 1.0, 10)]).unwrap();
        assert_eq!(s.selected.config.n_neighbors, 3);
        let single = select_model(&[run(4, -1.0, 50.0, 1.0, 10)]).unwrap();
        assert_eq!(single.selected.config.n_neighbors, 4);
        assert!(matches!(select_model(&[]), Err(TopicError::NoSurvivors)));
    }
}
