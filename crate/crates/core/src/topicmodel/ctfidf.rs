//! Class-based TF-IDF over clustered documents.

use crate::hdbscan::ClusterLabels;
use crate::textprep::{DocTermCounts, Vocabulary};

use super::TopicError;

/// Per-topic term weights, each topic sparse and ascending by term id.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicScores {
    pub topics: Vec<Vec<(u32, f64)>>,
    /// Set when only one topic exists, which forces every score to 0.
    pub degenerate: bool,
}

impl TopicScores {
    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn score(&self, topic: usize, term: u32) -> f64 {
        let row = &self.topics[topic];
        row.binary_search_by_key(&term, |&(t, _)| t).map_or(0.0, |i| row[i].1)
    }
}

/// Term frequencies aggregated per topic; outlier documents are skipped.
pub fn topic_term_counts(doc_term: &DocTermCounts, labels: &ClusterLabels) -> Result<Vec<Vec<(u32, u64)>>, TopicError> {
    if labels.labels.len() != doc_term.n_docs() {
        return Err(TopicError::LengthMismatch { labels: labels.labels.len(), docs: doc_term.n_docs() });
    }
    let mut dense: Vec<Vec<u64>> = vec![vec![0; doc_term.n_terms()]; labels.n_clusters];
    for (doc, &l) in labels.labels.iter().enumerate() {
        if l >= 0 {
            let acc = &mut dense[l as usize];
            for &(t, c) in doc_term.row(doc) {
                acc[t as usize] += u64::from(c);
            }
        }
    }
    Ok(dense
        .into_iter()
        .map(|row| row.into_iter().enumerate().filter(|&(_, c)| c > 0).map(|(t, c)| (t as u32, c)).collect())
        .collect())
}

/// `score(t, k) = (f_tk / Σ_t' f_t'k) · ln(N / n_t)` with `N` the number of
/// topics and `n_t` the number of topics containing `t`.
pub fn ctfidf_from_counts(counts: &[Vec<(u32, u64)>], n_terms: usize) -> Result<TopicScores, TopicError> {
    if counts.is_empty() {
        return Err(TopicError::NoTopics);
    }
    let mut topics_with = vec![0u32; n_terms];
    for (k, row) in counts.iter().enumerate() {
        if row.is_empty() {
            return Err(TopicError::EmptyTopic { topic: k });
        }
        for &(t, _) in row {
            topics_with[t as usize] += 1;
        }
    }
    let n = counts.len() as f64;
    let topics = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().map(|&(_, c)| c).sum();
            row.iter()
                .map(|&(t, c)| (t, (c as f64 / total as f64) * (n / f64::from(topics_with[t as usize])).ln()))
                .collect()
        })
        .collect();
    Ok(TopicScores { topics, degenerate: counts.len() == 1 })
}

pub fn ctfidf(doc_term: &DocTermCounts, labels: &ClusterLabels) -> Result<TopicScores, TopicError> {
    ctfidf_from_counts(&topic_term_counts(doc_term, labels)?, doc_term.n_terms())
}

/// Top `n` terms per topic by score; ties go to the lexicographically smaller term.
pub fn top_keywords(scores: &TopicScores, vocab: &Vocabulary, n: usize) -> Vec<Vec<(String, f64)>> {
    scores
        .topics
        .iter()
        .map(|row| {
            let mut ranked: Vec<(u32, f64)> = row.clone();
            // Term ids follow lexicographic term order, so the id breaks ties.
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(n);
            ranked.into_iter().map(|(t, s)| (vocab.term(t).to_string(), s)).collect()
        })
        .collect()
}

/// Term ids of the top `n` terms per topic, same order as [`top_keywords`].
pub fn top_term_ids(scores: &TopicScores, n: usize) -> Vec<Vec<u32>> {
    scores
        .topics
        .iter()
        .map(|row| {
            let mut ranked = row.clone();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.into_iter().take(n).map(|(t, _)| t).collect()
        })
        .collect()
}
