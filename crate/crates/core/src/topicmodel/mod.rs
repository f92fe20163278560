//! Topics from embeddings: layout, density clustering, keywords and scores.

mod ctfidf;
mod grid;
mod metrics;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hdbscan::{hdbscan, ClusterLabels, CondensedTree, HdbscanConfig, HdbscanError};
use crate::textprep::{CooccurrenceIndex, DocTermCounts, Vocabulary};
use crate::umap::{embed, LayoutConfig, LayoutResult, UmapError};

pub use ctfidf::{ctfidf, ctfidf_from_counts, top_keywords, top_term_ids, topic_term_counts, TopicScores};
pub use grid::{
    filter_models, grid_search, run_config, select_model, GridConfig, GridOptions, GridRun, GridSpec, RankedRun,
    RunStatus, Selection, SelectionCriteria,
};
pub use metrics::{topic_diversity, umass_coherence, umass_topic, ModelMetrics, UMASS_EPSILON};

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("no topics")]
    NoTopics,
    #[error("topic {topic} has no tokens")]
    EmptyTopic { topic: usize },
    #[error("{labels} labels for {docs} documents")]
    LengthMismatch { labels: usize, docs: usize },
    #[error("coherence needs at least 2 terms per topic, got {n}")]
    TooFewTerms { n: usize },
    #[error("term id {term} occurs in no document")]
    UnseenTerm { term: u32 },
    #[error("centroids need 2-D coordinates, got {0} columns")]
    NotTwoDimensional(usize),
    #[error("macro-domain mapping has no entry for topic {topic}")]
    MissingMacro { topic: usize },
    #[error("macro-domain mapping lists topic {topic} more than once")]
    DuplicateMacro { topic: usize },
    #[error("macro-domain mapping {path}: {message}")]
    MacroFile { path: String, message: String },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("no model satisfies the selection criteria")]
    NoSurvivors,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Umap(#[from] UmapError),
    #[error(transparent)]
    Hdbscan(#[from] HdbscanError),
}

/// Everything a model fit reads: document vectors and the term statistics
/// of the same documents, row-aligned.
#[derive(Clone, Copy)]
pub struct ModelInputs<'a> {
    pub embeddings: ArrayView2<'a, f64>,
    pub doc_term: &'a DocTermCounts,
    pub vocab: &'a Vocabulary,
    pub cooccurrence: &'a CooccurrenceIndex,
}

#[derive(Debug, Clone)]
pub struct TopicFit {
    pub labels: ClusterLabels,
    pub layout: LayoutResult,
    pub tree: CondensedTree,
}

/// Layout followed by clustering of the layout coordinates. Outliers keep
/// label -1.
pub fn fit_topics(embeddings: ArrayView2<f64>, layout: &LayoutConfig, clustering: &HdbscanConfig) -> Result<TopicFit, TopicError> {
    let layout = embed(embeddings, layout)?;
    let out = hdbscan(layout.coords.view(), clustering)?;
    Ok(TopicFit { labels: out.labels, layout, tree: out.tree })
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub fit: TopicFit,
    /// `None` when no topic was found.
    pub scores: Option<TopicScores>,
    pub keywords: Vec<Vec<(String, f64)>>,
    pub metrics: ModelMetrics,
}

/// [`fit_topics`] plus c-TF-IDF keywords and model metrics.
pub fn fit_model(inputs: &ModelInputs, layout: &LayoutConfig, clustering: &HdbscanConfig, top_n: usize) -> Result<FittedModel, TopicError> {
    if inputs.embeddings.nrows() != inputs.doc_term.n_docs() {
        return Err(TopicError::LengthMismatch { labels: inputs.embeddings.nrows(), docs: inputs.doc_term.n_docs() });
    }
    let fit = fit_topics(inputs.embeddings, layout, clustering)?;
    let outlier_pct = 100.0 * fit.labels.outlier_fraction();
    let n_topics = fit.labels.n_clusters;
    if n_topics == 0 {
        let metrics = ModelMetrics { umass: None, diversity_pct: None, outlier_pct, n_topics };
        return Ok(FittedModel { fit, scores: None, keywords: Vec::new(), metrics });
    }
    let scores = ctfidf(inputs.doc_term, &fit.labels)?;
    let keywords = top_keywords(&scores, inputs.vocab, top_n);
    let ids = top_term_ids(&scores, top_n);
    let umass = umass_coherence(&ids, inputs.cooccurrence, UMASS_EPSILON)?;
    let words: Vec<Vec<&str>> = keywords.iter().map(|t| t.iter().map(|(w, _)| w.as_str()).collect()).collect();
    let diversity = topic_diversity(&words, top_n)?;
    let metrics = ModelMetrics { umass: Some(umass), diversity_pct: Some(diversity), outlier_pct, n_topics };
    Ok(FittedModel { fit, scores: Some(scores), keywords, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: usize,
    pub patent_count: usize,
    pub top_words: Vec<(String, f64)>,
    pub centroid_2d: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCentroids {
    pub centroids: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
    /// Euclidean distances between centroids.
    pub distances: Vec<Vec<f64>>,
}

impl TopicCentroids {
    /// Plot radius proportional to `sqrt(count)`, the largest topic at `max_radius`.
    pub fn bubble_radii(&self, max_radius: f64) -> Vec<f64> {
        let top = self.counts.iter().copied().max().unwrap_or(0) as f64;
        self.counts.iter().map(|&c| if top > 0.0 { max_radius * (c as f64 / top).sqrt() } else { 0.0 }).collect()
    }
}

/// Mean 2-D position of each topic's documents.
pub fn topic_centroids(coords: ArrayView2<f64>, labels: &ClusterLabels) -> Result<TopicCentroids, TopicError> {
    if coords.ncols() != 2 {
        return Err(TopicError::NotTwoDimensional(coords.ncols()));
    }
    if coords.nrows() != labels.labels.len() {
        return Err(TopicError::LengthMismatch { labels: labels.labels.len(), docs: coords.nrows() });
    }
    let k = labels.n_clusters;
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in coords.rows().into_iter().zip(&labels.labels) {
        if l >= 0 {
            let l = l as usize;
            sums[l][0] += row[0];
            sums[l][1] += row[1];
            counts[l] += 1;
        }
    }
    if let Some(topic) = counts.iter().position(|&c| c == 0) {
        return Err(TopicError::EmptyTopic { topic });
    }
    let centroids: Vec<[f64; 2]> = sums.iter().zip(&counts).map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64]).collect();
    let distances = centroids
        .iter()
        .map(|a| centroids.iter().map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()).collect())
        .collect();
    Ok(TopicCentroids { centroids, counts, distances })
}

/// Coordinates for plotting: the fitted layout when already 2-D, otherwise
/// a fresh 2-D layout with the same neighbourhood settings.
pub fn plot_coordinates(embeddings: ArrayView2<f64>, fit: &TopicFit, layout: &LayoutConfig) -> Result<Array2<f64>, TopicError> {
    if fit.layout.coords.ncols() == 2 {
        return Ok(fit.layout.coords.clone());
    }
    Ok(embed(embeddings, &LayoutConfig { n_components: 2, ..layout.clone() })?.coords)
}

pub fn summarize_topics(model: &FittedModel, centroids: &TopicCentroids) -> Vec<TopicSummary> {
    let sizes = model.fit.labels.sizes();
    (0..model.fit.labels.n_clusters)
        .map(|k| TopicSummary {
            topic_id: k,
            patent_count: sizes[k],
            top_words: model.keywords.get(k).cloned().unwrap_or_default(),
            centroid_2d: centroids.centroids[k],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroDomain {
    pub macro_id: u32,
    pub macro_label: String,
}

/// Topic id → macro-domain, read from CSV `topic_id,macro_id,macro_label`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMapping {
    pub topics: BTreeMap<usize, MacroDomain>,
}

impl MacroMapping {
    pub fn identity(n_topics: usize) -> Self {
        MacroMapping {
            topics: (0..n_topics)
                .map(|k| (k, MacroDomain { macro_id: k as u32, macro_label: format!("topic {k}") }))
                .collect(),
        }
    }

    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self, TopicError> {
        #[derive(Deserialize)]
        struct Row {
            topic_id: usize,
            macro_id: u32,
            macro_label: String,
        }
        let err = |message: String| TopicError::MacroFile { path: source.to_string(), message };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut topics = BTreeMap::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| err(e.to_string()))?;
            let entry = MacroDomain { macro_id: row.macro_id, macro_label: row.macro_label };
            if topics.insert(row.topic_id, entry).is_some() {
                return Err(TopicError::DuplicateMacro { topic: row.topic_id });
            }
        }
        Ok(MacroMapping { topics })
    }

    pub fn load(path: &Path) -> Result<Self, TopicError> {
        let file = std::fs::File::open(path)
            .map_err(|e| TopicError::MacroFile { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn get(&self, topic: usize) -> Option<&MacroDomain> {
        self.topics.get(&topic)
    }
}

/// Macro-domain id per document; `None` for outliers.
pub fn apply_macro_domains(labels: &ClusterLabels, mapping: &MacroMapping) -> Result<Vec<Option<u32>>, TopicError> {
    if let Some(topic) = (0..labels.n_clusters).find(|k| !mapping.topics.contains_key(k)) {
        return Err(TopicError::MissingMacro { topic });
    }
    Ok(labels.labels.iter().map(|&l| (l >= 0).then(|| mapping.topics[&(l as usize)].macro_id)).collect())
}
