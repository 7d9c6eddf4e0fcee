//! Bigram TF-IDF knowledge retrieval and recall-at-k evaluation.

mod index;
mod normalize;
mod porter;
mod query;
mod recall;

pub use index::{build_index, idf, BuildReport, Hit, IndexParts, KnowledgeArticle, TfIdfIndex};
pub use normalize::{ngram_terms, normalize_text, TextNormalizer, ENGLISH_STOP_WORDS};
pub use porter::porter_stem;
pub use query::{build_query, Query, DEFAULT_OBJECT_BLOCKLIST};
pub use recall::{eval_recall, ClassRecall, RecallReport, RelevanceLabel, RetrievalAnnotation};

/// Number of articles returned per query by default.
pub const DEFAULT_TOP_K: usize = 5;
