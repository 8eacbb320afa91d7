//! Scoring, sorting and non-maximal suppression of candidate pools.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{Candidate, Method};
use crate::punvocab::TagSet;

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("no embedding vectors loaded ({errors} malformed lines)")]
    NoVectors { errors: usize },
    #[error("invalid ranker config: {0}")]
    InvalidConfig(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingLineError {
    pub line: usize,
    pub reason: String,
}

/// Word vectors of a common dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// An empty table: every similarity falls back to bag-of-words cosine.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_vectors(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Self {
        assert!(vectors.values().all(|v| v.len() == dim && v.iter().all(|x| x.is_finite())));
        Self { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    fn mean(&self, tokens: &[String]) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for v in tokens.iter().filter_map(|t| self.vectors.get(t)) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
        (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
    }
}

/// Parses word2vec text format: an optional `count dim` header, then
/// `token v1 ... vdim` lines. Lines of the wrong width or with non-finite
/// values are skipped and reported.
pub fn load_embeddings<R: BufRead>(
    reader: R,
) -> Result<(EmbeddingTable, Vec<EmbeddingLineError>), RankerError> {
    let mut dim: Option<usize> = None;
    let mut vectors = HashMap::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if idx == 0 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        let mut report = |reason: String| errors.push(EmbeddingLineError { line: idx + 1, reason });
        let values: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let Ok(values) = values else {
            report("unparseable component".into());
            continue;
        };
        if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            report("empty or non-finite vector".into());
            continue;
        }
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected {
            report(format!("dimension {} != {expected}", values.len()));
            continue;
        }
        vectors.insert(fields[0].to_string(), values);
    }
    if vectors.is_empty() {
        return Err(RankerError::NoVectors {
            errors: errors.len(),
        });
    }
    Ok((
        EmbeddingTable {
            dim: dim.unwrap_or(0),
            vectors,
        },
        errors,
    ))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

fn bag_of_words_cosine(a: &[String], b: &[String]) -> f64 {
    let mut counts: HashMap<&str, (f64, f64)> = HashMap::new();
    for t in a {
        counts.entry(t).or_default().0 += 1.0;
    }
    for t in b {
        counts.entry(t).or_default().1 += 1.0;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = counts.into_values().unzip();
    cosine(&x, &y)
}

/// Cosine similarity of the mean word vectors of two sentences. Tokens
/// without a vector are skipped; if either side has none, token-count
/// cosine is used instead. Identical token lists always score 1.
pub fn sentence_similarity(a: &[String], b: &[String], emb: &EmbeddingTable) -> f64 {
    if a == b {
        return 1.0;
    }
    match (emb.mean(a), emb.mean(b)) {
        (Some(x), Some(y)) => cosine(&x, &y),
        _ => bag_of_words_cosine(a, b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    pub nms_threshold: f64,
    pub top_k: usize,
    /// Weight of the tag-coverage bonus added to the log-probability.
    pub tag_weight: f64,
    /// Rank generated and retrieved candidates together.
    pub merged: bool,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            nms_threshold: 0.8,
            top_k: 3,
            tag_weight: 1.0,
            merged: false,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<(), RankerError> {
        let bad = |m: &str| Err(RankerError::InvalidConfig(m.to_string()));
        if !(self.nms_threshold > 0.0 && self.nms_threshold <= 1.0) {
            return bad("nms_threshold must be in (0, 1]");
        }
        if self.top_k < 1 {
            return bad("top_k must be at least 1");
        }
        if !self.tag_weight.is_finite() || self.tag_weight < 0.0 {
            return bad("tag_weight must be a non-negative number");
        }
        Ok(())
    }
}

/// Fills in tag coverage and total score for every candidate.
pub fn score_candidates(pool: &mut [Candidate], tags: &TagSet, tag_weight: f64) {
    for c in pool {
        c.tag_coverage = tags.coverage(&c.tokens);
        c.total_score = c.lm_log_prob + tag_weight * c.tag_coverage as f64;
    }
}

/// Scores, sorts and greedily suppresses near-duplicates, returning at most
/// `top_k` candidates best first.
pub fn rank_and_dedup(
    pool: &[Candidate],
    tags: &TagSet,
    emb: &EmbeddingTable,
    cfg: &RankerConfig,
) -> Vec<Candidate> {
    let mut sorted = pool.to_vec();
    score_candidates(&mut sorted, tags, cfg.tag_weight);
    sorted.sort_by(Candidate::rank_cmp);
    let mut kept: Vec<Candidate> = Vec::with_capacity(cfg.top_k.min(sorted.len()));
    for c in sorted {
        if kept.len() == cfg.top_k {
            break;
        }
        if kept
            .iter()
            .all(|k| sentence_similarity(&k.tokens, &c.tokens, emb) < cfg.nms_threshold)
        {
            kept.push(c);
        }
    }
    kept
}

/// Ranked output per candidate family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedPools {
    pub generated: Vec<Candidate>,
    pub retrieved: Vec<Candidate>,
    /// Only filled in merged mode.
    pub merged: Vec<Candidate>,
}

/// Ranks generated and retrieved candidates separately, or together when
/// `cfg.merged` is set. Ambiguous-baseline candidates are ignored here.
pub fn rank_pools(
    pool: &[Candidate],
    tags: &TagSet,
    emb: &EmbeddingTable,
    cfg: &RankerConfig,
) -> RankedPools {
    if cfg.merged {
        let all: Vec<Candidate> = pool
            .iter()
            .filter(|c| c.method != Method::Ambiguous)
            .cloned()
            .collect();
        return RankedPools {
            merged: rank_and_dedup(&all, tags, emb, cfg),
            ..Default::default()
        };
    }
    let (generated, rest): (Vec<Candidate>, Vec<Candidate>) =
        pool.iter().cloned().partition(|c| c.method.is_generated());
    let retrieved: Vec<Candidate> = rest.into_iter().filter(|c| c.method == Method::Retrieved).collect();
    RankedPools {
        generated: rank_and_dedup(&generated, tags, emb, cfg),
        retrieved: rank_and_dedup(&retrieved, tags, emb, cfg),
        merged: Vec::new(),
    }
}
