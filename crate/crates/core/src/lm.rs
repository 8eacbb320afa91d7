//! Direction-tagged interpolated Kneser-Ney n-gram language models.
//!
//! A model is stored in backoff form: every observed n-gram keeps its fully
//! interpolated probability, and every observed context keeps the weight
//! `gamma(h) = D * N1+(h .) / total(h)` that scales the lower-order
//! distribution for unseen continuations. Because the stored values are the
//! interpolated ones, following backoff weights reproduces the interpolated
//! estimate exactly and every context sums to one.
//!
//! Lower orders use continuation counts (number of distinct left neighbours),
//! except for n-grams anchored at the sentence start, which have no left
//! neighbour and keep raw counts. The unigram level is interpolated with a
//! uniform distribution so that `<unk>` and rare tokens never reach zero.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::punvocab::tokenize;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub(crate) const BOS_ID: u32 = 0;
pub(crate) const EOS_ID: u32 = 1;
pub(crate) const UNK_ID: u32 = 2;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_MIN_COUNT: usize = 2;
pub const DISCOUNT: f64 = 0.75;

const FORMAT_NAME: &str = "punster-ngram";
pub const FORMAT_VERSION: u32 = 1;

/// Adjusted counts of each next token, grouped by context.
type Continuations = BTreeMap<Vec<u32>, Vec<(u32, f64)>>;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus contains no sentences")]
    EmptyCorpus,
    #[error("model order must be in [2, 5], got {0}")]
    InvalidOrder(usize),
    #[error("cannot score an empty token sequence")]
    EmptySentence,
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model format version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            other => Err(format!("unknown direction `{other}` (expected forward or reverse)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextEntry {
    /// ln gamma(h)
    backoff: f64,
    /// token id -> ln P(token | h)
    probs: HashMap<u32, f64>,
}

/// A sentence's log-probability with its per-token breakdown.
///
/// `per_token` lists conditionals in the model's decoding order (reversed for
/// reverse models) and ends with the end-of-sentence token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub tokens: Vec<String>,
    pub log_prob: f64,
    pub per_token: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    direction: Direction,
    min_count: usize,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// `levels[k]` holds contexts of length `k`.
    levels: Vec<HashMap<Vec<u32>, ContextEntry>>,
}

/// Reads one sentence per line, tokenizing each line.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Vec<String>>, std::io::Error> {
    let mut sentences = Vec::new();
    for line in reader.lines() {
        let tokens = tokenize(&line?);
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    Ok(sentences)
}

impl NGramModel {
    /// Trains an interpolated Kneser-Ney model. Tokens seen fewer than
    /// `min_count` times become `<unk>`.
    pub fn train(
        corpus: &[Vec<String>],
        order: usize,
        direction: Direction,
        min_count: usize,
    ) -> Result<Self, LmError> {
        if !(2..=5).contains(&order) {
            return Err(LmError::InvalidOrder(order));
        }
        let corpus: Vec<&Vec<String>> = corpus.iter().filter(|s| !s.is_empty()).collect();
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }

        let mut freq: HashMap<&str, usize> = HashMap::new();
        for s in &corpus {
            for t in s.iter() {
                *freq.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<&str> = freq
            .iter()
            .filter(|(t, &c)| c >= min_count && ![BOS, EOS, UNK].contains(t))
            .map(|(t, _)| *t)
            .collect();
        kept.sort_unstable();
        let vocab: Vec<String> = [BOS, EOS, UNK]
            .into_iter()
            .chain(kept)
            .map(str::to_string)
            .collect();
        let ids: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        // adjusted counts per n-gram length
        let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        let mut left: Vec<HashMap<Vec<u32>, HashSet<u32>>> = vec![HashMap::new(); order];
        for s in &corpus {
            let mut seq = Vec::with_capacity(s.len() + 2);
            seq.push(BOS_ID);
            let body = s.iter().map(|t| ids.get(t.as_str()).copied().unwrap_or(UNK_ID));
            match direction {
                Direction::Forward => seq.extend(body),
                Direction::Reverse => seq.extend(body.rev()),
            }
            seq.push(EOS_ID);
            for i in 1..seq.len() {
                for ctx_len in 0..order.min(i + 1) {
                    let start = i - ctx_len;
                    let gram = seq[start..=i].to_vec();
                    if ctx_len + 1 == order || start == 0 {
                        *raw[ctx_len].entry(gram).or_default() += 1;
                    } else {
                        left[ctx_len]
                            .entry(gram)
                            .or_default()
                            .insert(seq[start - 1]);
                    }
                }
            }
        }

        // group adjusted counts by context
        let mut grouped: Vec<Continuations> = vec![BTreeMap::new(); order];
        for ctx_len in 0..order {
            let from_raw = raw[ctx_len].iter().map(|(g, &c)| (g, c as f64));
            let from_left = left[ctx_len].iter().map(|(g, l)| (g, l.len() as f64));
            for (gram, count) in from_raw.chain(from_left) {
                let (ctx, w) = gram.split_at(ctx_len);
                grouped[ctx_len]
                    .entry(ctx.to_vec())
                    .or_default()
                    .push((w[0], count));
            }
        }

        let mut model = Self {
            order,
            direction,
            min_count,
            vocab,
            ids,
            levels: vec![HashMap::new(); order],
        };

        // unigram level: interpolate with uniform over every predictable token
        let unigrams: HashMap<u32, f64> = grouped[0]
            .remove(&Vec::new())
            .unwrap_or_default()
            .into_iter()
            .collect();
        let total: f64 = unigrams.values().sum();
        let types = unigrams.len() as f64;
        let uniform = 1.0 / (model.vocab.len() - 1) as f64;
        let gamma = DISCOUNT * types / total;
        let mut probs = HashMap::new();
        for id in 1..model.vocab.len() as u32 {
            let count = unigrams.get(&id).copied().unwrap_or(0.0);
            let p = (count - DISCOUNT).max(0.0) / total + gamma * uniform;
            probs.insert(id, p.ln());
        }
        model.levels[0].insert(
            Vec::new(),
            ContextEntry {
                backoff: 0.0,
                probs,
            },
        );

        for (ctx_len, contexts) in grouped.into_iter().enumerate().skip(1) {
            for (ctx, mut conts) in contexts {
                conts.sort_by_key(|&(w, _)| w);
                let total: f64 = conts.iter().map(|&(_, c)| c).sum();
                let gamma = DISCOUNT * conts.len() as f64 / total;
                let mut probs = HashMap::with_capacity(conts.len());
                for (w, count) in conts {
                    let lower = model.log_prob_ids(&ctx[1..], w).exp();
                    let p = (count - DISCOUNT).max(0.0) / total + gamma * lower;
                    probs.insert(w, p.ln());
                }
                model.levels[ctx_len].insert(
                    ctx,
                    ContextEntry {
                        backoff: gamma.ln(),
                        probs,
                    },
                );
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Vocabulary including the `<s>`, `</s>` and `<unk>` sentinels.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    /// Number of stored contexts across all levels.
    pub fn context_count(&self) -> usize {
        self.levels.iter().map(HashMap::len).sum()
    }

    /// Every stored context as tokens, sorted (shortest first).
    pub fn stored_contexts(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<u32>> = self
            .levels
            .iter()
            .flat_map(|level| level.keys().cloned())
            .collect();
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out.into_iter()
            .map(|ctx| ctx.iter().map(|&id| self.vocab[id as usize].clone()).collect())
            .collect()
    }

    pub(crate) fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub(crate) fn token(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    pub(crate) fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    /// ln P(w | context) for a context given in decoding order. Only the last
    /// `order - 1` ids are used. Returns `-inf` for `<s>`, which is never
    /// predicted.
    pub(crate) fn log_prob_ids(&self, context: &[u32], w: u32) -> f64 {
        let start = context.len().saturating_sub(self.order - 1);
        let ctx = &context[start..];
        let mut acc = 0.0;
        for len in (0..=ctx.len()).rev() {
            if let Some(entry) = self.levels[len].get(&ctx[ctx.len() - len..]) {
                if let Some(lp) = entry.probs.get(&w) {
                    return acc + lp;
                }
                acc += entry.backoff;
            }
        }
        f64::NEG_INFINITY
    }

    /// Scores `<s> tokens </s>`. Tokens are always given in natural order;
    /// reverse models reverse them internally.
    pub fn score(&self, tokens: &[String]) -> Result<ScoredSentence, LmError> {
        if tokens.is_empty() {
            return Err(LmError::EmptySentence);
        }
        let mut seq: Vec<u32> = Vec::with_capacity(tokens.len() + 2);
        seq.push(BOS_ID);
        let body = tokens.iter().map(|t| self.id(t));
        match self.direction {
            Direction::Forward => seq.extend(body),
            Direction::Reverse => seq.extend(body.rev()),
        }
        seq.push(EOS_ID);
        let mut log_prob = 0.0;
        let mut per_token = Vec::with_capacity(seq.len() - 1);
        for i in 1..seq.len() {
            let lp = self.log_prob_ids(&seq[..i], seq[i]);
            log_prob += lp;
            per_token.push((self.token(seq[i]).to_string(), lp));
        }
        Ok(ScoredSentence {
            tokens: tokens.to_vec(),
            log_prob,
            per_token,
        })
    }

    /// Conditional log-probabilities of every possible next token after
    /// `context` (decoding order, `<s>` is prepended). With `allowed`, the
    /// full-vocabulary conditionals are filtered, not renormalized.
    pub fn next_token_distribution(
        &self,
        context: &[String],
        allowed: Option<&BTreeSet<String>>,
    ) -> BTreeMap<String, f64> {
        let mut ctx = Vec::with_capacity(context.len() + 1);
        ctx.push(BOS_ID);
        ctx.extend(context.iter().map(|t| self.id(t)));
        let mut out = BTreeMap::new();
        for (id, token) in self.vocab.iter().enumerate().skip(1) {
            if allowed.is_some_and(|a| !a.contains(token)) {
                continue;
            }
            out.insert(token.clone(), self.log_prob_ids(&ctx, id as u32));
        }
        out
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), LmError> {
        let mut levels = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let mut contexts: Vec<ContextRecord> = level
                .iter()
                .map(|(ctx, entry)| {
                    let mut probs: Vec<(u32, f64)> =
                        entry.probs.iter().map(|(&w, &lp)| (w, lp)).collect();
                    probs.sort_by_key(|&(w, _)| w);
                    ContextRecord {
                        context: ctx.clone(),
                        backoff: entry.backoff,
                        probs,
                    }
                })
                .collect();
            contexts.sort_by(|a, b| a.context.cmp(&b.context));
            levels.push(contexts);
        }
        let file = ModelFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            order: self.order,
            direction: self.direction,
            discount: DISCOUNT,
            min_count: self.min_count,
            vocab: self.vocab.clone(),
            levels,
        };
        serde_json::to_writer(writer, &file).map_err(|e| LmError::Corrupt(e.to_string()))
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, LmError> {
        let value: serde_json::Value =
            serde_json::from_reader(reader).map_err(|e| LmError::Corrupt(e.to_string()))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(FORMAT_NAME) {
            return Err(LmError::Corrupt("missing or unknown format tag".into()));
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| LmError::Corrupt("missing version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(LmError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| LmError::Corrupt(e.to_string()))?;
        file.into_model()
    }
}

#[derive(Serialize, Deserialize)]
struct ContextRecord {
    context: Vec<u32>,
    backoff: f64,
    probs: Vec<(u32, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    direction: Direction,
    discount: f64,
    min_count: usize,
    vocab: Vec<String>,
    levels: Vec<Vec<ContextRecord>>,
}

impl ModelFile {
    fn into_model(self) -> Result<NGramModel, LmError> {
        let corrupt = |msg: &str| LmError::Corrupt(msg.to_string());
        if !(2..=5).contains(&self.order) || self.levels.len() != self.order {
            return Err(corrupt("order does not match stored levels"));
        }
        if self.vocab.len() < 3 || self.vocab[..3] != [BOS, EOS, UNK] {
            return Err(corrupt("vocabulary must start with the sentinels"));
        }
        let n = self.vocab.len() as u32;
        let ids: HashMap<String, u32> = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if ids.len() != self.vocab.len() {
            return Err(corrupt("duplicate vocabulary entry"));
        }
        let mut levels = Vec::with_capacity(self.order);
        for (len, records) in self.levels.into_iter().enumerate() {
            let mut level = HashMap::with_capacity(records.len());
            for r in records {
                if r.context.len() != len
                    || r.context.iter().any(|&id| id >= n)
                    || r.probs.iter().any(|&(w, _)| w >= n)
                {
                    return Err(corrupt("context or token id out of range"));
                }
                level.insert(
                    r.context,
                    ContextEntry {
                        backoff: r.backoff,
                        probs: r.probs.into_iter().collect(),
                    },
                );
            }
            levels.push(level);
        }
        if levels[0].get(&Vec::new()).map(|e| e.probs.len()) != Some(n as usize - 1) {
            return Err(corrupt("unigram level incomplete"));
        }
        Ok(NGramModel {
            order: self.order,
            direction: self.direction,
            min_count: self.min_count,
            vocab: self.vocab,
            ids,
            levels,
        })
    }
}
