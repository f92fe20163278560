use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use greenai_core::corpus::{Corpus, PatentRecord};
use greenai_core::impact::{
    attach_precomputed_values, filtered_expectation, patent_value, read_valuations, topic_impact, AttachReport, ImpactOptions,
    ImpactReport, ImpactSummary, ValuationInput, ValuationParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_corpus, read_labels, read_topics, LabelRow, TopicsFile, LABELS_FILE, TOPICS_FILE};
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, StageDir};

pub const SCATTER_FILE: &str = "impact_scatter.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub topic_id: i32,
    pub label: String,
    pub mean_citations: f64,
    pub mean_value: Option<f64>,
    pub count: usize,
    pub macro_id: Option<u32>,
}

#[derive(Deserialize)]
struct ReturnRow {
    patent_id: String,
    r: f64,
    n_same_day: u32,
    market_cap: f64,
}

#[derive(Serialize)]
struct ValuedRow {
    patent_id: String,
    r: f64,
    n_same_day: u32,
    market_cap: f64,
    expected_value_ratio: f64,
    xi_musd: f64,
}

/// Per-patent values from grant-day returns through the truncated-normal filter.
fn values_from_returns(path: &Path, params: &ValuationParams) -> Result<Vec<ValuedRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let rows: Vec<ReturnRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    rows.into_par_iter()
        .map(|r| {
            let input = ValuationInput { r: r.r, n_same_day: r.n_same_day, market_cap: r.market_cap };
            let xi = patent_value(&input, params).map_err(|e| CliError::Data(format!("patent {}: {e}", r.patent_id)))?;
            Ok(ValuedRow {
                expected_value_ratio: filtered_expectation(r.r, params),
                xi_musd: xi,
                patent_id: r.patent_id,
                r: r.r,
                n_same_day: r.n_same_day,
                market_cap: r.market_cap,
            })
        })
        .collect()
}

/// Topic impact for the fitted documents of `corpus`.
pub(crate) fn compute_impact(corpus: &Corpus, labels: &[LabelRow], topics: &TopicsFile, winsorize: Option<f64>) -> Result<(ImpactReport, Vec<ScatterRow>)> {
    let by_id: HashMap<&str, &PatentRecord> = corpus.iter().map(|r| (r.patent_id.as_str(), r)).collect();
    let mut records = Vec::with_capacity(labels.len());
    let mut topic_ids = Vec::with_capacity(labels.len());
    for l in labels {
        let r = by_id.get(l.doc_id.as_str()).ok_or_else(|| CliError::Data(format!("labelled document {} is not in the corpus", l.doc_id)))?;
        records.push(*r);
        topic_ids.push(l.topic_id);
    }
    let report = topic_impact(&records, &topic_ids, topics.n_topics, &ImpactOptions { winsorize })?;
    let scatter_row = |s: &ImpactSummary, label: String, macro_id: Option<u32>| ScatterRow {
        topic_id: s.topic_id,
        label,
        mean_citations: s.mean_citations,
        mean_value: s.mean_value,
        count: s.count,
        macro_id,
    };
    let mut scatter: Vec<ScatterRow> = report
        .topics
        .iter()
        .zip(&topics.topics)
        .map(|(s, t)| scatter_row(s, t.label(3), Some(t.macro_id)))
        .collect();
    if let Some(o) = &report.outliers {
        scatter.push(scatter_row(o, "outliers".into(), None));
    }
    Ok((report, scatter))
}

#[derive(Serialize)]
struct CoverageFile {
    precomputed: Option<AttachReport>,
    from_returns: Option<AttachReport>,
    /// Share of fitted documents with a value after all joins.
    fitted_coverage: f64,
}

/// Joins valuation data and writes per-topic citation and value means.
pub fn cmd_impact(cfg: &LoadedConfig) -> Result<Manifest> {
    let c = &cfg.config;
    let mut stage = StageDir::create(&c.out, "impact")?;
    let mut corpus = load_corpus(&mut stage)?;
    let labels = read_labels(&stage.require_upstream("fit", LABELS_FILE)?)?;
    let topics = read_topics(&stage.require_upstream("fit", TOPICS_FILE)?)?;

    let mut precomputed = None;
    if let Some(path) = &c.paths.valuations {
        stage.record_input(path)?;
        let file = std::fs::File::open(path).map_err(CliError::io(path))?;
        let (joined, report) = attach_precomputed_values(&corpus, &read_valuations(file)?);
        log::info!("valuation coverage {:.1}%", 100.0 * report.coverage);
        corpus = joined;
        precomputed = Some(report);
    }
    let mut from_returns = None;
    if let Some(path) = &c.paths.returns {
        stage.record_input(path)?;
        let params = c.valuation.params()?;
        let valued = values_from_returns(path, &params)?;
        let mut map = BTreeMap::new();
        for v in &valued {
            if map.insert(v.patent_id.clone(), v.xi_musd).is_some() {
                return Err(CliError::Data(format!("returns file lists patent {} more than once", v.patent_id)));
            }
        }
        stage.write_csv("patent_values.csv", &valued)?;
        let (joined, report) = attach_precomputed_values(&corpus, &map);
        corpus = joined;
        from_returns = Some(report);
    }

    let (report, scatter) = compute_impact(&corpus, &labels, &topics, c.valuation.winsorize)?;
    let rows: Vec<&ImpactSummary> = report.topics.iter().chain(report.outliers.iter()).collect();
    stage.write_csv("impact.csv", &rows)?;
    stage.write_json("impact.json", &report)?;
    stage.write_csv(SCATTER_FILE, &scatter)?;
    let valued = rows.iter().map(|s| s.valued).sum::<usize>();
    let fitted_coverage = if labels.is_empty() { 0.0 } else { valued as f64 / labels.len() as f64 };
    stage.write_json("valuation_coverage.json", &CoverageFile { precomputed, from_returns, fitted_coverage })?;
    stage.finish(cfg)
}
