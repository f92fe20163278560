use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use greenai_core::topicmodel::{filter_models, grid_search, select_model, GridOptions, GridRun, RunStatus, SelectionCriteria, TopicError};
use serde::{Deserialize, Serialize};

use super::{load_corpus, opt, prepare, Prepared};
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, Manifest, StageDir};

pub const GRID_LOG: &str = "grid_log.ndjson";

/// One line of the append-only results log. Runs are reused on resume only
/// when the fingerprint of everything besides the grid point matches.
#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    fingerprint: String,
    run: GridRun,
}

#[derive(Serialize)]
struct SelectionFile<'a> {
    criteria: &'a SelectionCriteria,
    n_runs: usize,
    n_failed: usize,
    n_survivors: usize,
    selected: Option<&'a GridRun>,
    ranking: Vec<RankedSummary<'a>>,
}

#[derive(Serialize)]
struct RankedSummary<'a> {
    rank: usize,
    pareto: bool,
    key: &'a str,
}

fn fingerprint(cfg: &LoadedConfig, prep: &Prepared, opts: &GridOptions) -> Result<String> {
    let c = &cfg.config;
    let payload = serde_json::json!({
        "text": c.text,
        "options": opts,
        "embeddings": prep.embedding_source,
        "docs": prep.doc_ids,
        "stopwords": c.paths.stopwords,
        "boilerplate": c.paths.boilerplate,
    });
    Ok(sha256_hex(&serde_json::to_vec(&payload)?))
}

fn read_log(path: &Path, fingerprint: &str) -> Result<Vec<GridRun>> {
    let Ok(file) = std::fs::File::open(path) else {
        return Ok(Vec::new());
    };
    let mut runs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(&line) {
            Ok(l) if l.fingerprint == fingerprint => runs.push(l.run),
            Ok(_) => {}
            // A run interrupted mid-write leaves a truncated last line.
            Err(e) => log::warn!("{}:{}: unreadable log line skipped ({e})", path.display(), i + 1),
        }
    }
    Ok(runs)
}

/// Runs the hyperparameter grid, appending each finished run to the log,
/// then filters and selects a model.
pub fn cmd_gridsearch(cfg: &LoadedConfig) -> Result<Manifest> {
    let c = &cfg.config;
    let mut stage = StageDir::create(&c.out, "gridsearch")?;
    let corpus = load_corpus(&mut stage)?;
    let prep = prepare(cfg, &corpus, &mut stage)?;
    let opts = GridOptions {
        base_seed: c.seed,
        threads: c.threads,
        layout: c.layout.clone(),
        min_samples: c.clustering.min_samples,
        top_n: c.text.top_n,
    };
    let fp = fingerprint(cfg, &prep, &opts)?;
    let log_path = stage.path(GRID_LOG);
    let previous = read_log(&log_path, &fp)?;
    if !previous.is_empty() {
        log::info!("resuming: {} runs found in {}", previous.len(), log_path.display());
    }
    let log_file = OpenOptions::new().create(true).append(true).open(&log_path).map_err(CliError::io(&log_path))?;
    let log_file = Mutex::new(log_file);
    let on_done = |run: &GridRun| {
        let line = serde_json::to_string(&LogLine { fingerprint: fp.clone(), run: run.clone() }).expect("run serializes");
        let mut f = log_file.lock().expect("log lock");
        if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
            log::error!("cannot append to {}: {e}", log_path.display());
        }
        log::info!("grid run {} done", run.key);
    };
    let runs = grid_search(&prep.inputs(), &c.grid, &opts, &previous, &on_done)?;
    drop(log_file);

    let survivors = filter_models(&runs, &c.selection);
    let selection = match select_model(&survivors) {
        Ok(s) => Some(s),
        Err(TopicError::NoSurvivors) => {
            log::warn!("no grid run passed the outlier and topic-count filters");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let ranks: BTreeMap<&str, (usize, bool)> = selection
        .iter()
        .flat_map(|s| s.ranking.iter().map(|r| (r.run.key.as_str(), (r.rank, r.pareto))))
        .collect();
    let selected_key = selection.as_ref().map(|s| s.selected.key.as_str());

    let header = [
        "key", "n_neighbors", "min_dist", "min_cluster_size", "n_components", "seed", "status", "message", "n_topics",
        "outlier_pct", "umass", "diversity_pct", "passes_filters", "rank", "pareto", "selected",
    ];
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let m = r.metrics.as_ref();
            let (status, message) = match &r.status {
                RunStatus::Ok => ("ok", String::new()),
                RunStatus::Failed(msg) => ("failed", msg.clone()),
            };
            let rank = ranks.get(r.key.as_str());
            vec![
                r.key.clone(),
                r.config.n_neighbors.to_string(),
                r.config.min_dist.to_string(),
                r.config.min_cluster_size.to_string(),
                r.config.n_components.to_string(),
                r.seed.to_string(),
                status.to_string(),
                message,
                m.map(|m| m.n_topics.to_string()).unwrap_or_default(),
                opt(m.map(|m| m.outlier_pct)),
                opt(m.and_then(|m| m.umass)),
                opt(m.and_then(|m| m.diversity_pct)),
                rank.is_some().to_string(),
                rank.map(|r| r.0.to_string()).unwrap_or_default(),
                rank.map(|r| r.1.to_string()).unwrap_or_default(),
                (selected_key == Some(r.key.as_str())).to_string(),
            ]
        })
        .collect();
    stage.write_records("gridsearch.csv", &header, &rows)?;
    stage.write_json("gridsearch.json", &runs)?;
    let file = SelectionFile {
        criteria: &c.selection,
        n_runs: runs.len(),
        n_failed: runs.iter().filter(|r| r.status != RunStatus::Ok).count(),
        n_survivors: survivors.len(),
        selected: selection.as_ref().map(|s| &s.selected),
        ranking: selection
            .iter()
            .flat_map(|s| s.ranking.iter().map(|r| RankedSummary { rank: r.rank, pareto: r.pareto, key: &r.run.key }))
            .collect(),
    };
    stage.write_json("selection.json", &file)?;
    stage.record_output(&log_path, false)?;
    stage.finish(cfg)
}
