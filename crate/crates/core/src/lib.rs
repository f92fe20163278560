pub mod analytics;
pub mod corpus;
pub mod embedding;
pub mod hdbscan;
pub mod impact;
pub mod neighbors;
pub mod textprep;
pub mod topicmodel;
pub mod umap;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/corpus.md")]
    struct Corpus;
    #[doc = include_str!("../../../book/src/textprep.md")]
    struct Textprep;
    #[doc = include_str!("../../../book/src/layout.md")]
    struct Layout;
    #[doc = include_str!("../../../book/src/clustering.md")]
    struct Clustering;
    #[doc = include_str!("../../../book/src/topics.md")]
    struct Topics;
    #[doc = include_str!("../../../book/src/grid.md")]
    struct Grid;
    #[doc = include_str!("../../../book/src/concentration.md")]
    struct Concentration;
    #[doc = include_str!("../../../book/src/valuation.md")]
    struct Valuation;
}
