//! Subcommand implementations and the state they share.

mod build;
mod fit;
mod gridsearch;
mod impact;
mod report;

use std::path::Path;

use greenai_core::corpus::Corpus;
use greenai_core::embedding::{fallback_embed, load_embeddings, load_embeddings_csv, EmbeddingMatrix};
use greenai_core::textprep::{build_doc_term, preprocess_all, CooccurrenceIndex, DocTermCounts, TermSet, Vocabulary};
use greenai_core::topicmodel::ModelInputs;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use build::cmd_build;
pub use fit::{cmd_fit, TopicRow, TopicsFile};
pub use gridsearch::cmd_gridsearch;
pub use impact::cmd_impact;
pub use report::cmd_report;

use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::manifest::StageDir;

pub const CORPUS_FILE: &str = "corpus.ndjson";
pub const LABELS_FILE: &str = "labels.csv";
pub const TOPICS_FILE: &str = "topics.json";

pub(crate) fn load_corpus(stage: &mut StageDir) -> Result<Corpus> {
    let path = stage.require_upstream("build", CORPUS_FILE)?;
    Ok(Corpus::load_ndjson(&path)?)
}

/// Preprocessed documents of the corpus records that carry an abstract.
pub(crate) struct Prepared {
    pub doc_ids: Vec<String>,
    pub vocab: Vocabulary,
    pub doc_term: DocTermCounts,
    pub cooccurrence: CooccurrenceIndex,
    pub embeddings: Array2<f64>,
    /// Describes where the embeddings came from, for the manifest and
    /// grid-log fingerprint.
    pub embedding_source: String,
}

impl Prepared {
    pub fn inputs(&self) -> ModelInputs<'_> {
        ModelInputs { embeddings: self.embeddings.view(), doc_term: &self.doc_term, vocab: &self.vocab, cooccurrence: &self.cooccurrence }
    }
}

fn term_set(path: Option<&Path>, default: fn() -> TermSet, stage: &mut StageDir) -> Result<TermSet> {
    match path {
        Some(p) => {
            stage.record_input(p)?;
            Ok(TermSet::load(p)?)
        }
        None => Ok(default()),
    }
}

pub(crate) fn prepare(cfg: &LoadedConfig, corpus: &Corpus, stage: &mut StageDir) -> Result<Prepared> {
    let c = &cfg.config;
    let records: Vec<_> = corpus.iter().filter(|r| r.has_abstract()).collect();
    if records.len() < 3 {
        return Err(CliError::Data(format!("{} documents with abstracts; at least 3 are needed", records.len())));
    }
    let skipped = corpus.len() - records.len();
    if skipped > 0 {
        log::warn!("{skipped} patents without abstract are left out of topic modelling");
    }
    let stopwords = term_set(c.paths.stopwords.as_deref(), TermSet::english_stopwords, stage)?;
    let boilerplate = term_set(c.paths.boilerplate.as_deref(), TermSet::patent_boilerplate, stage)?;
    let texts: Vec<&str> = records.iter().map(|r| r.abstract_text.as_deref().unwrap_or("")).collect();
    let tokens = preprocess_all(&texts, &stopwords, &boilerplate);
    let (vocab, doc_term) = build_doc_term(&tokens, c.text.min_df)?;
    let doc_ids: Vec<String> = records.iter().map(|r| r.patent_id.clone()).collect();
    let (matrix, embedding_source) = match &c.paths.embeddings {
        Some(path) => {
            stage.record_input(path)?;
            let m = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                load_embeddings_csv(path)?
            } else {
                load_embeddings(path)?
            };
            if c.text.expect_dim > 0 {
                m.expect_dim(c.text.expect_dim)?;
            }
            (m.align_to(&doc_ids)?, format!("file:{}", path.display()))
        }
        None => {
            log::info!("no embedding file configured; using the fallback embedder ({} dims)", c.text.fallback_dim);
            let m = fallback_embed(&doc_term, c.text.fallback_dim, c.seed)?;
            (m, format!("fallback:dim={}:seed={}", c.text.fallback_dim, c.seed))
        }
    };
    let cooccurrence = CooccurrenceIndex::new(&doc_term);
    Ok(Prepared { doc_ids, vocab, doc_term, cooccurrence, embeddings: EmbeddingMatrix::into_values(matrix), embedding_source })
}

/// One row of `labels.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub doc_id: String,
    pub topic_id: i32,
    pub membership_lambda: f64,
}

pub(crate) fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub(crate) fn read_topics(path: &Path) -> Result<TopicsFile> {
    let text = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(serde_json::from_slice(&text)?)
}

/// Formats an optional real for CSV; missing values become empty cells.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
