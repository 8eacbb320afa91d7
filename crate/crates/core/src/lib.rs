//! Pun-bearing sentence generation for a tagged context.
//!
//! The pipeline mines heterographic homophones from a pronunciation
//! dictionary, matches them against a context's tags, then produces candidate
//! sentences two ways: constrained beam search over forward and reverse
//! n-gram models that forces a pun counterpart into a fixed slot, and
//! retrieval of short corpus sentences containing both a counterpart and a
//! tag. Candidates are ranked by log-probability plus a tag-coverage bonus
//! and thinned with embedding-based non-maximal suppression.

pub mod candidate;
pub mod evalkit;
pub mod generator;
pub mod lm;
pub mod phonetics;
pub mod pipeline;
pub mod punvocab;
pub mod ranker;
pub mod retriever;

pub use candidate::{Candidate, Method};
pub use generator::{constrained_beam_search, generate_pool, GeneratorConfig};
pub use lm::{Direction, NGramModel};
pub use phonetics::{PhonemeInventory, PunLexicon, PunPair};
pub use punvocab::{PunVocabulary, TagSet};
pub use ranker::{EmbeddingTable, RankerConfig};
pub use retriever::{CorpusIndex, RetrieverConfig};
