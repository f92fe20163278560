//! Abstract tokenization and document-term statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("term `{0}` is not in the vocabulary")]
    UnknownTerm(String),
    #[error("cannot read term list {path}: {message}")]
    TermList { path: String, message: String },
}

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const BUNDLED_BOILERPLATE: &str = include_str!("../data/boilerplate.txt");

/// Version tag of the bundled stopword file, recorded in run manifests.
pub const STOPWORDS_VERSION: &str = "en-v1";

/// A set of lowercase terms read from a one-term-per-line list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermSet(HashSet<String>);

impl TermSet {
    /// Parses a term list: `#` starts a comment, blank lines are ignored.
    pub fn parse(text: &str) -> Self {
        TermSet(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| TextError::TermList { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn english_stopwords() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn patent_boilerplate() -> Self {
        Self::parse(BUNDLED_BOILERPLATE)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TermSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TermSet(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Splits lowercased text into runs of letters and digits, keeping a hyphen
/// only when it sits between two alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if c == '-'
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokenizes and drops stopwords, boilerplate and one-character tokens.
pub fn preprocess(text: &str, stopwords: &TermSet, boilerplate: &TermSet) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().count() >= 2 && !stopwords.contains(t) && !boilerplate.contains(t))
        .collect()
}

/// [`preprocess`] over many documents in parallel; order is preserved.
pub fn preprocess_all<S: AsRef<str> + Sync>(texts: &[S], stopwords: &TermSet, boilerplate: &TermSet) -> Vec<Vec<String>> {
    texts.par_iter().map(|t| preprocess(t.as_ref(), stopwords, boilerplate)).collect()
}

/// Terms in lexicographic order with dense ids and document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// D(w): number of documents containing `id`.
    pub fn doc_freq(&self, id: u32) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn doc_freq_of(&self, term: &str) -> Result<u32, TextError> {
        self.id(term).map(|i| self.doc_freq(i)).ok_or_else(|| TextError::UnknownTerm(term.to_string()))
    }
}

/// Sparse document-term frequency matrix aligned to a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermCounts {
    rows: Vec<Vec<(u32, u32)>>,
    totals: Vec<u64>,
    n_terms: usize,
}

impl DocTermCounts {
    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    /// `(term id, count)` pairs of one document, ascending by id.
    pub fn row(&self, doc: usize) -> &[(u32, u32)] {
        &self.rows[doc]
    }

    pub fn rows(&self) -> &[Vec<(u32, u32)>] {
        &self.rows
    }

    pub fn total(&self, doc: usize) -> u64 {
        self.totals[doc]
    }

    pub fn get(&self, doc: usize, term: u32) -> u32 {
        let row = &self.rows[doc];
        row.binary_search_by_key(&term, |&(t, _)| t).map_or(0, |i| row[i].1)
    }
}

/// Builds the vocabulary (terms with document frequency ≥ `min_df`) and the
/// count matrix over the retained terms.
pub fn build_doc_term<S: AsRef<str>>(docs: &[Vec<S>], min_df: usize) -> Result<(Vocabulary, DocTermCounts), TextError> {
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let min_df = min_df.max(1) as u32;
    let kept: Vec<(&str, u32)> = df.into_iter().filter(|&(_, d)| d >= min_df).collect();
    if kept.is_empty() {
        return Err(TextError::EmptyVocabulary);
    }
    let terms: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let index: HashMap<String, u32> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    let doc_freq = kept.iter().map(|&(_, d)| d).collect();

    let mut rows = Vec::with_capacity(docs.len());
    let mut totals = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in doc {
            if let Some(&id) = index.get(t.as_ref()) {
                *counts.entry(id).or_default() += 1;
            }
        }
        totals.push(counts.values().map(|&c| u64::from(c)).sum());
        rows.push(counts.into_iter().collect());
    }
    let n_terms = terms.len();
    Ok((Vocabulary { terms, index, doc_freq, n_docs: docs.len() }, DocTermCounts { rows, totals, n_terms }))
}

/// Per-term sorted posting lists for co-document counts.
#[derive(Debug, Clone)]
pub struct CooccurrenceIndex {
    postings: Vec<Vec<u32>>,
}

impl CooccurrenceIndex {
    pub fn new(doc_term: &DocTermCounts) -> Self {
        let mut postings = vec![Vec::new(); doc_term.n_terms()];
        for (d, row) in doc_term.rows().iter().enumerate() {
            for &(t, _) in row {
                postings[t as usize].push(d as u32);
            }
        }
        CooccurrenceIndex { postings }
    }

    pub fn doc_freq(&self, term: u32) -> usize {
        self.postings[term as usize].len()
    }

    /// D(a, b): documents containing both terms, by sorted-list intersection.
    pub fn co_doc_freq(&self, a: u32, b: u32) -> usize {
        let (mut x, mut y) = (self.postings[a as usize].as_slice(), self.postings[b as usize].as_slice());
        if x.len() > y.len() {
            std::mem::swap(&mut x, &mut y);
        }
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Co-document frequency by term string.
pub fn co_document_frequency(vocab: &Vocabulary, index: &CooccurrenceIndex, t1: &str, t2: &str) -> Result<usize, TextError> {
    let a = vocab.id(t1).ok_or_else(|| TextError::UnknownTerm(t1.to_string()))?;
    let b = vocab.id(t2).ok_or_else(|| TextError::UnknownTerm(t2.to_string()))?;
    Ok(index.co_doc_freq(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn strips_stopwords_and_boilerplate() {
        let out = preprocess("The invention herein controls a turbine.", &TermSet::english_stopwords(), &TermSet::patent_boilerplate());
        assert_eq!(out, ["controls", "turbine"]);
        assert!(preprocess("", &TermSet::english_stopwords(), &TermSet::patent_boilerplate()).is_empty());
    }

    #[test]
    fn internal_hyphens_survive() {
        // "HVAC-system": h,v,a,c alnum; '-' followed by 's' → kept; then "system".
        // " " closes the token; "HVAC" → "hvac". Neither is a stopword.
        let out = preprocess("HVAC-system HVAC", &TermSet::english_stopwords(), &TermSet::default());
        assert_eq!(out, ["hvac-system", "hvac"]);
        assert_eq!(tokenize("-lead trail- a--b x-1"), ["lead", "trail", "a", "b", "x-1"]);
    }

    #[test]
    fn term_list_comments() {
        let s = TermSet::parse("# header\nFoo\n\nbar # trailing\n");
        assert!(s.contains("foo") && s.contains("bar"));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn document_frequencies() {
        let (v, m) = build_doc_term(&docs(&[&["a", "b"], &["a"]]), 1).unwrap();
        assert_eq!(v.doc_freq_of("a").unwrap(), 2);
        assert_eq!(v.doc_freq_of("b").unwrap(), 1);
        assert_eq!(m.n_docs(), 2);
        let (v2, _) = build_doc_term(&docs(&[&["a", "b"], &["a"]]), 2).unwrap();
        assert_eq!(v2.terms(), ["a"]);
    }

    #[test]
    fn empty_corpus_errors() {
        assert_eq!(build_doc_term(&docs(&[&[], &[]]), 1).unwrap_err(), TextError::EmptyVocabulary);
    }

    #[test]
    fn row_sums_match_brute_force_recount() {
        let d = docs(&[&["wind", "turbine", "wind"], &["grid", "battery"], &["wind", "grid", "grid", "grid"]]);
        let (v, m) = build_doc_term(&d, 1).unwrap();
        for (i, doc) in d.iter().enumerate() {
            assert_eq!(m.total(i), doc.len() as u64);
            for t in doc {
                let brute = doc.iter().filter(|x| *x == t).count() as u32;
                assert_eq!(m.get(i, v.id(t).unwrap()), brute);
            }
        }
    }

    #[test]
    fn co_document_counts() {
        let (v, m) = build_doc_term(&docs(&[&["a", "b"], &["a"], &["b", "c"]]), 1).unwrap();
        let idx = CooccurrenceIndex::new(&m);
        assert_eq!(co_document_frequency(&v, &idx, "a", "b").unwrap(), 1);
        assert_eq!(co_document_frequency(&v, &idx, "a", "a").unwrap(), 2);
        assert_eq!(co_document_frequency(&v, &idx, "a", "c").unwrap(), 0);
        assert_eq!(co_document_frequency(&v, &idx, "a", "zz").unwrap_err(), TextError::UnknownTerm("zz".into()));
    }

    fn arb_docs() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec("[a-f]{1,2}", 0..8), 1..10)
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(text in "[a-zA-Zé0-9 ,.;'-]{0,80}") {
            let (sw, bp) = (TermSet::english_stopwords(), TermSet::patent_boilerplate());
            let once = preprocess(&text, &sw, &bp);
            let twice = preprocess(&once.join(" "), &sw, &bp);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn co_df_bounded_by_marginals(d in arb_docs()) {
            if let Ok((v, m)) = build_doc_term(&d, 1) {
                let idx = CooccurrenceIndex::new(&m);
                for a in 0..v.len() as u32 {
                    for b in 0..v.len() as u32 {
                        let co = idx.co_doc_freq(a, b);
                        prop_assert_eq!(co, idx.co_doc_freq(b, a));
                        prop_assert!(co <= v.doc_freq(a).min(v.doc_freq(b)) as usize);
                        let brute = d.iter().filter(|doc| doc.iter().any(|t| t == v.term(a)) && doc.iter().any(|t| t == v.term(b))).count();
                        prop_assert_eq!(co, brute);
                    }
                }
            }
        }

        #[test]
        fn min_df_keeps_counts_of_retained_terms(d in arb_docs(), min_df in 1usize..4) {
            if let (Ok((v1, m1)), Ok((v2, m2))) = (build_doc_term(&d, 1), build_doc_term(&d, min_df)) {
                for t in v2.terms() {
                    prop_assert_eq!(v1.doc_freq_of(t).unwrap(), v2.doc_freq_of(t).unwrap());
                    for doc in 0..d.len() {
                        prop_assert_eq!(m1.get(doc, v1.id(t).unwrap()), m2.get(doc, v2.id(t).unwrap()));
                    }
                }
            }
        }
    }
}
