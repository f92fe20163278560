use std::collections::BTreeSet;

use greenai_core::embedding::fallback_embed;
use greenai_core::hdbscan::HdbscanConfig;
use greenai_core::textprep::{build_doc_term, preprocess_all, CooccurrenceIndex, TermSet};
use greenai_core::topicmodel::{filter_models, fit_model, grid_search, select_model, GridOptions, GridSpec, ModelInputs, SelectionCriteria};
use greenai_core::umap::LayoutConfig;
use greenai_fixtures as fx;

struct Prepared {
    planted: fx::PlantedCorpus,
    vocab: greenai_core::textprep::Vocabulary,
    counts: greenai_core::textprep::DocTermCounts,
    index: CooccurrenceIndex,
    emb: ndarray::Array2<f64>,
}

fn prepare(n_docs: usize, seed: u64) -> Prepared {
    let planted = fx::planted_corpus(n_docs, 3, 30, 40, seed);
    let docs = preprocess_all(&planted.abstracts, &TermSet::english_stopwords(), &TermSet::patent_boilerplate());
    let (vocab, counts) = build_doc_term(&docs, 2).unwrap();
    let index = CooccurrenceIndex::new(&counts);
    let emb = fallback_embed(&counts, 64, seed).unwrap().into_values();
    Prepared { planted, vocab, counts, index, emb }
}

fn inputs(p: &Prepared) -> ModelInputs<'_> {
    ModelInputs { embeddings: p.emb.view(), doc_term: &p.counts, vocab: &p.vocab, cooccurrence: &p.index }
}

#[test]
fn keywords_come_from_one_planted_vocabulary() {
    let p = prepare(300, 5);
    let layout = LayoutConfig { n_neighbors: 15, seed: 5, ..Default::default() };
    let model = fit_model(&inputs(&p), &layout, &HdbscanConfig::new(30), 10).unwrap();
    assert_eq!(model.metrics.n_topics, 3);
    let vocabs: Vec<BTreeSet<&str>> = p.planted.vocabularies.iter().map(|v| v.iter().map(String::as_str).collect()).collect();
    for words in &model.keywords {
        let owners: BTreeSet<usize> = words
            .iter()
            .filter_map(|(w, _)| vocabs.iter().position(|v| v.contains(w.as_str())))
            .collect();
        assert_eq!(owners.len(), 1, "{words:?}");
    }
    assert_eq!(model.metrics.diversity_pct, Some(100.0));
    assert!(model.metrics.umass.unwrap() <= 0.0);
}

#[test]
fn fits_repeat_exactly() {
    let p = prepare(150, 6);
    let layout = LayoutConfig { n_neighbors: 10, seed: 1, ..Default::default() };
    let a = fit_model(&inputs(&p), &layout, &HdbscanConfig::new(20), 5).unwrap();
    let b = fit_model(&inputs(&p), &layout, &HdbscanConfig::new(20), 5).unwrap();
    assert_eq!(a.fit.labels.labels, b.fit.labels.labels);
    assert_eq!(a.fit.layout.coords, b.fit.layout.coords);
    assert_eq!(a.keywords, b.keywords);
}

#[test]
fn small_grid_selects_a_survivor_and_resumes() {
    let p = prepare(150, 7);
    let grid = GridSpec { n_neighbors: vec![10, 15], min_dist: vec![0.1], min_cluster_size: vec![20, 200], n_components: vec![2] };
    let opts = GridOptions { base_seed: 3, threads: 2, ..Default::default() };
    let runs = grid_search(&inputs(&p), &grid, &opts, &[], &|_| {}).unwrap();
    assert_eq!(runs.len(), 4);
    let criteria = SelectionCriteria { min_topics: 2, max_topics: 10, max_outlier_pct: 40.0, ..Default::default() };
    let survivors = filter_models(&runs, &criteria);
    // Clusters of 200 cannot form in 150 documents.
    assert!(survivors.iter().all(|r| r.config.min_cluster_size == 20));
    let sel = select_model(&survivors).unwrap();
    assert_eq!(sel.ranking.len(), survivors.len());

    let fresh = std::sync::atomic::AtomicUsize::new(0);
    let again = grid_search(&inputs(&p), &grid, &opts, &runs, &|_| {
        fresh.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    })
    .unwrap();
    assert_eq!(again, runs);
    assert_eq!(fresh.into_inner(), 0);
}
