use greenai_core::corpus::{build_green_ai_corpus, ingest_patents, CorpusManifest, YearBasis};

use super::CORPUS_FILE;
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, StageDir};

/// Ingests the configured sources and keeps the green-AI intersection.
pub fn cmd_build(cfg: &LoadedConfig) -> Result<Manifest> {
    let c = &cfg.config;
    if c.paths.sources.is_empty() {
        return Err(CliError::Usage("build needs at least one [[paths.sources]] entry".into()));
    }
    let mut stage = StageDir::create(&c.out, "build")?;
    for s in &c.paths.sources {
        stage.record_input(&s.path)?;
    }
    let ingested = ingest_patents(&c.paths.sources, &c.ingest)?;
    let (corpus, filter) = build_green_ai_corpus(&ingested.corpus);
    log::info!("green-AI filter kept {} of {} patents", filter.retained, filter.input);

    let mut bytes = Vec::new();
    corpus.write_ndjson(&mut bytes).map_err(|e| CliError::Internal(e.to_string()))?;
    stage.write_bytes(CORPUS_FILE, &bytes)?;

    let years: Vec<i32> = corpus.iter().filter_map(|r| r.year(YearBasis::Grant)).collect();
    let summary = CorpusManifest {
        records: corpus.len(),
        with_abstract: corpus.iter().filter(|r| r.has_abstract()).count(),
        filter,
        ingest: ingested.warnings,
        year_range: (years.iter().copied().min().unwrap_or(0), years.iter().copied().max().unwrap_or(0)),
        provenance: c.paths.sources.iter().map(|s| s.path.display().to_string()).collect(),
    };
    stage.write_json("corpus_summary.json", &summary)?;
    stage.finish(cfg)
}
