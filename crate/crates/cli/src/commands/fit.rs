use greenai_core::hdbscan::HdbscanConfig;
use greenai_core::topicmodel::{
    apply_macro_domains, fit_model, plot_coordinates, summarize_topics, topic_centroids, GridRun, MacroMapping, ModelMetrics,
};
use greenai_core::umap::LayoutConfig;
use serde::{Deserialize, Serialize};

use super::{load_corpus, prepare, LabelRow, LABELS_FILE, TOPICS_FILE};
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, StageDir};

/// Largest bubble radius in plot pixels.
pub const MAX_BUBBLE: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRow {
    pub topic_id: usize,
    pub patent_count: usize,
    pub top_words: Vec<(String, f64)>,
    pub centroid_2d: [f64; 2],
    pub bubble_radius: f64,
    pub macro_id: u32,
    pub macro_label: String,
}

impl TopicRow {
    /// Short label from the leading keywords.
    pub fn label(&self, n: usize) -> String {
        self.top_words.iter().take(n).map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsFile {
    pub n_docs: usize,
    pub n_topics: usize,
    pub n_outliers: usize,
    pub metrics: ModelMetrics,
    pub layout: LayoutConfig,
    pub clustering: HdbscanConfig,
    pub topics: Vec<TopicRow>,
}

#[derive(Serialize)]
struct FitDiagnostics<'a> {
    curve_a: f64,
    curve_b: f64,
    curve_rms: f64,
    loss_first_decile: f64,
    loss_last_decile: f64,
    embedding_source: &'a str,
    vocabulary_size: usize,
}

#[derive(Deserialize)]
struct SelectionFile {
    selected: Option<GridRun>,
}

fn settings(cfg: &LoadedConfig, stage: &mut StageDir) -> Result<(LayoutConfig, HdbscanConfig)> {
    let c = &cfg.config;
    if !c.fit.use_selection {
        return Ok((LayoutConfig { seed: c.seed, ..c.layout.clone() }, c.clustering.clone()));
    }
    let path = stage.require_upstream("gridsearch", "selection.json")?;
    let text = std::fs::read(&path).map_err(CliError::io(&path))?;
    let sel: SelectionFile = serde_json::from_slice(&text)?;
    let Some(run) = sel.selected else {
        return Err(CliError::Data("grid search selected no model; set fit.use_selection = false".into()));
    };
    let clustering = HdbscanConfig { allow_single_cluster: c.clustering.allow_single_cluster, ..run.config.clustering(c.clustering.min_samples) };
    Ok((run.config.layout(&c.layout, run.seed), clustering))
}

/// Fits one topic model and writes labels, coordinates, topics and metrics.
pub fn cmd_fit(cfg: &LoadedConfig) -> Result<Manifest> {
    let c = &cfg.config;
    let mut stage = StageDir::create(&c.out, "fit")?;
    let corpus = load_corpus(&mut stage)?;
    let (layout, clustering) = settings(cfg, &mut stage)?;
    let prep = prepare(cfg, &corpus, &mut stage)?;
    let model = fit_model(&prep.inputs(), &layout, &clustering, c.text.top_n)?;
    let labels = &model.fit.labels;
    log::info!("{} topics, {:.1}% outliers", labels.n_clusters, model.metrics.outlier_pct);

    let rows: Vec<LabelRow> = prep
        .doc_ids
        .iter()
        .zip(&labels.labels)
        .zip(&labels.membership_lambda)
        .map(|((id, &topic_id), &membership_lambda)| LabelRow { doc_id: id.clone(), topic_id, membership_lambda })
        .collect();
    stage.write_csv(LABELS_FILE, &rows)?;

    let coords = plot_coordinates(prep.embeddings.view(), &model.fit, &layout)?;
    let coord_rows: Vec<Vec<String>> =
        prep.doc_ids.iter().zip(coords.rows()).map(|(id, r)| vec![id.clone(), r[0].to_string(), r[1].to_string()]).collect();
    stage.write_records("coordinates.csv", &["doc_id", "x", "y"], &coord_rows)?;

    let mapping = match &c.paths.macro_domains {
        Some(p) => {
            stage.record_input(p)?;
            MacroMapping::load(p)?
        }
        None => MacroMapping::identity(labels.n_clusters),
    };
    apply_macro_domains(labels, &mapping)?;

    let mut topics = Vec::new();
    if labels.n_clusters > 0 {
        let centroids = topic_centroids(coords.view(), labels)?;
        let radii = centroids.bubble_radii(MAX_BUBBLE);
        for (s, r) in summarize_topics(&model, &centroids).into_iter().zip(radii) {
            let m = mapping.get(s.topic_id).expect("mapping validated");
            topics.push(TopicRow {
                topic_id: s.topic_id,
                patent_count: s.patent_count,
                top_words: s.top_words,
                centroid_2d: s.centroid_2d,
                bubble_radius: r,
                macro_id: m.macro_id,
                macro_label: m.macro_label.clone(),
            });
        }
        let header: Vec<String> = std::iter::once("topic_id".to_string()).chain((0..centroids.distances.len()).map(|k| k.to_string())).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let dist_rows: Vec<Vec<String>> = centroids
            .distances
            .iter()
            .enumerate()
            .map(|(k, row)| std::iter::once(k.to_string()).chain(row.iter().map(f64::to_string)).collect())
            .collect();
        stage.write_records("centroid_distances.csv", &header, &dist_rows)?;
    } else {
        log::warn!("no topics found; centroids skipped");
    }

    let file = TopicsFile {
        n_docs: prep.doc_ids.len(),
        n_topics: labels.n_clusters,
        n_outliers: labels.n_outliers(),
        metrics: model.metrics.clone(),
        layout,
        clustering,
        topics,
    };
    stage.write_json(TOPICS_FILE, &file)?;
    let (first, last) = model.fit.layout.loss_deciles();
    let curve = &model.fit.layout.curve;
    stage.write_json(
        "diagnostics.json",
        &FitDiagnostics {
            curve_a: curve.a,
            curve_b: curve.b,
            curve_rms: curve.rms,
            loss_first_decile: first,
            loss_last_decile: last,
            embedding_source: &prep.embedding_source,
            vocabulary_size: prep.vocab.len(),
        },
    )?;
    stage.write_json("condensed_tree.json", &model.fit.tree.to_json())?;
    stage.finish(cfg)
}

