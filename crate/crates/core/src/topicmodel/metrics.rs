//! Intrinsic topic quality: UMass coherence and topic diversity.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::textprep::CooccurrenceIndex;

use super::TopicError;

/// Smoothing added to co-document counts.
pub const UMASS_EPSILON: f64 = 1e-12;

/// `2 / (n (n-1)) Σ_{i<j} ln((D(w_i, w_j) + ε) / D(w_i))` where `w_i` ranks
/// above `w_j`.
pub fn umass_topic(words: &[u32], index: &CooccurrenceIndex, eps: f64) -> Result<f64, TopicError> {
    let n = words.len();
    if n < 2 {
        return Err(TopicError::TooFewTerms { n });
    }
    let mut sum = 0.0;
    for i in 0..n {
        let di = index.doc_freq(words[i]);
        if di == 0 {
            return Err(TopicError::UnseenTerm { term: words[i] });
        }
        for &wj in &words[i + 1..] {
            sum += ((index.co_doc_freq(words[i], wj) as f64 + eps) / di as f64).ln();
        }
    }
    Ok(2.0 * sum / (n * (n - 1)) as f64)
}

/// Unweighted mean of [`umass_topic`] over topics.
pub fn umass_coherence(topics: &[Vec<u32>], index: &CooccurrenceIndex, eps: f64) -> Result<f64, TopicError> {
    if topics.is_empty() {
        return Err(TopicError::NoTopics);
    }
    let mut total = 0.0;
    for t in topics {
        total += umass_topic(t, index, eps)?;
    }
    Ok(total / topics.len() as f64)
}

/// `100 · |∪_k W_k| / (K · n)`.
pub fn topic_diversity<S: AsRef<str>>(topics: &[Vec<S>], n: usize) -> Result<f64, TopicError> {
    if topics.is_empty() || n == 0 {
        return Err(TopicError::NoTopics);
    }
    let unique: HashSet<&str> = topics.iter().flat_map(|t| t.iter().take(n).map(AsRef::as_ref)).collect();
    Ok(100.0 * unique.len() as f64 / (topics.len() * n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    /// `None` when no topic was found.
    pub umass: Option<f64>,
    pub diversity_pct: Option<f64>,
    pub outlier_pct: f64,
    pub n_topics: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::build_doc_term;
    use proptest::prelude::*;

    fn index(raw: &[&[&str]]) -> (crate::textprep::Vocabulary, CooccurrenceIndex) {
        let docs: Vec<Vec<&str>> = raw.iter().map(|d| d.to_vec()).collect();
        let (v, dt) = build_doc_term(&docs, 1).unwrap();
        (v, CooccurrenceIndex::new(&dt))
    }

    #[test]
    fn single_pair_example() {
        let (v, ix) = index(&[&["a", "b"], &["a"], &["b", "c"]]);
        let t = [v.id("a").unwrap(), v.id("b").unwrap()];
        let u = umass_topic(&t, &ix, UMASS_EPSILON).unwrap();
        assert!((u - ((1.0 + 1e-12) / 2.0f64).ln()).abs() < 1e-15);
        assert!((u + 0.6931).abs() < 1e-4);
    }

    #[test]
    fn fully_cooccurring_topic_near_zero() {
        let (v, ix) = index(&[&["x", "y", "z"], &["x", "y", "z"], &["q"]]);
        let t: Vec<u32> = ["x", "y", "z"].iter().map(|w| v.id(w).unwrap()).collect();
        let u = umass_topic(&t, &ix, UMASS_EPSILON).unwrap();
        // ln((D + ε) / D) = ε / D + O(ε²): positive but bounded by ε.
        assert!(u >= -1e-6 && u <= UMASS_EPSILON, "{u}");
    }

    #[test]
    fn rank_order_matters() {
        // D(a)=3, D(b)=1, D(a,b)=1.
        let (v, ix) = index(&[&["a", "b"], &["a"], &["a"]]);
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        assert!((umass_topic(&[a, b], &ix, 0.0).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert_eq!(umass_topic(&[b, a], &ix, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn diversity_closed_forms() {
        let distinct = vec![vec!["a", "b"], vec!["c", "d"]];
        assert_eq!(topic_diversity(&distinct, 2).unwrap(), 100.0);
        let same = vec![vec!["a", "b", "c"]; 4];
        assert_eq!(topic_diversity(&same, 3).unwrap(), 25.0);
        // 16 topics of 10 words with 130 distinct words overall.
        let mut topics: Vec<Vec<String>> = (0..16).map(|k| (0..10).map(|i| format!("w{}", k * 10 + i)).collect()).collect();
        for (k, t) in topics.iter_mut().enumerate().take(15) {
            for (i, w) in t.iter_mut().enumerate().take(2) {
                // Reuse words of the last topic.
                *w = format!("w{}", 150 + (k * 2 + i) % 10);
            }
        }
        let unique: HashSet<&String> = topics.iter().flatten().collect();
        assert_eq!(unique.len(), 130);
        assert_eq!(topic_diversity(&topics, 10).unwrap(), 81.25);
    }

    #[test]
    fn too_few_terms() {
        let (v, ix) = index(&[&["a"]]);
        assert!(umass_topic(&[v.id("a").unwrap()], &ix, UMASS_EPSILON).is_err());
    }

    proptest! {
        #[test]
        fn diversity_bounds(k in 1usize..8, n in 1usize..6, pool in 1usize..30, seed in 0u64..500) {
            let mut rng = greenai_fixtures::rng(seed);
            let topics: Vec<Vec<String>> = (0..k)
                .map(|_| {
                    let mut words: Vec<String> = (0..pool).map(|i| format!("t{i}")).collect();
                    rand::seq::SliceRandom::shuffle(words.as_mut_slice(), &mut rng);
                    words.truncate(n.min(pool));
                    words
                })
                .collect();
            prop_assume!(pool >= n);
            let d = topic_diversity(&topics, n).unwrap();
            prop_assert!(d >= 100.0 / k as f64 - 1e-12 && d <= 100.0);
        }

        #[test]
        fn umass_mean_permutation_invariant(seed in 0u64..300) {
            let mut rng = greenai_fixtures::rng(seed);
            let raw: Vec<Vec<String>> = (0..10)
                .map(|_| (0..4).map(|_| format!("w{}", rand::Rng::gen_range(&mut rng, 0..8))).collect())
                .collect();
            let (v, dt) = build_doc_term(&raw, 1).unwrap();
            let ix = CooccurrenceIndex::new(&dt);
            prop_assume!(v.len() >= 4);
            let topics: Vec<Vec<u32>> = vec![vec![0, 1], vec![2, 3, 1], vec![3, 0]];
            let mut rev = topics.clone();
            rev.reverse();
            let a = umass_coherence(&topics, &ix, UMASS_EPSILON).unwrap();
            let b = umass_coherence(&rev, &ix, UMASS_EPSILON).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
