//! Constrained beam search that forces a pun counterpart into a fixed slot.
//!
//! A forward model places the counterpart at position `t` from the start of
//! the sentence; a reverse model decodes right to left and so places it at
//! position `t` from the end. Both are searched for `t = 1..=T` and the
//! results form the generated candidate pool.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{Candidate, Method};
use crate::lm::{Direction, LmError, NGramModel, BOS_ID, EOS_ID, UNK_ID};
use crate::punvocab::PunVocabulary;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("counterpart `{0}` is not in the model vocabulary")]
    CounterpartOov(String),
    #[error("forced position {position} outside 1..={max}")]
    InvalidPosition { position: usize, max: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("expected a {expected} model, got a {found} model")]
    WrongDirection { expected: Direction, found: Direction },
    #[error(transparent)]
    Lm(#[from] LmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Largest forced position; positions `1..=max_position` are tried.
    pub max_position: usize,
    pub beam_size: usize,
    /// Maximum sentence length in tokens, excluding `</s>`.
    pub max_len: usize,
    pub min_len: usize,
    /// Keep every finished beam per slot instead of only the best one.
    pub keep_all_beams: bool,
    /// Rank hypotheses by log-prob per token instead of raw log-prob.
    pub length_normalize: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            max_position: 5,
            beam_size: 6,
            max_len: 20,
            min_len: 4,
            keep_all_beams: true,
            length_normalize: false,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::InvalidConfig(m.to_string()));
        if self.max_position < 1 || self.max_position > self.max_len {
            return bad("max_position must be in 1..=max_len");
        }
        if self.beam_size < 1 {
            return bad("beam_size must be at least 1");
        }
        if self.min_len > self.max_len {
            return bad("min_len must not exceed max_len");
        }
        Ok(())
    }
}

/// A finished hypothesis in natural (left-to-right) token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    pub tokens: Vec<String>,
    /// Log-probability under the searching model, including `</s>`.
    pub log_prob: f64,
    /// 1-based position of the counterpart from the sentence start.
    pub forced_position: usize,
}

#[derive(Debug, Clone)]
struct Hyp {
    ids: Vec<u32>,
    log_prob: f64,
    finished: bool,
}

impl Hyp {
    fn key(&self, length_normalize: bool) -> f64 {
        if length_normalize {
            // +1 for the </s> that every finished hypothesis carries
            let steps = self.ids.len() + usize::from(self.finished);
            self.log_prob / steps.max(1) as f64
        } else {
            self.log_prob
        }
    }
}

fn natural_tokens(model: &NGramModel, ids: &[u32]) -> Vec<String> {
    let body = ids.iter().filter(|&&id| id != EOS_ID).map(|&id| model.token(id).to_string());
    match model.direction() {
        Direction::Forward => body.collect(),
        Direction::Reverse => {
            let mut v: Vec<String> = body.collect();
            v.reverse();
            v
        }
    }
}

fn compare(model: &NGramModel, a: &Hyp, b: &Hyp, length_normalize: bool) -> Ordering {
    b.key(length_normalize)
        .total_cmp(&a.key(length_normalize))
        .then_with(|| natural_tokens(model, &a.ids).cmp(&natural_tokens(model, &b.ids)))
}

/// Beam search over `model` with the counterpart forced at decoding step
/// `position`. Results are sorted best first, at most `beam_size` long.
///
/// `<unk>` is never generated. `</s>` is only allowed once the constraint is
/// placed and the sentence has `min_len` tokens; at step `max_len + 1` it is
/// the only option.
pub fn constrained_beam_search(
    model: &NGramModel,
    counterpart: &str,
    position: usize,
    cfg: &GeneratorConfig,
) -> Result<Vec<BeamHypothesis>, GeneratorError> {
    cfg.validate()?;
    if !model.contains(counterpart) || [BOS_ID, EOS_ID, UNK_ID].contains(&model.id(counterpart)) {
        return Err(GeneratorError::CounterpartOov(counterpart.to_string()));
    }
    if position < 1 || position > cfg.max_position {
        return Err(GeneratorError::InvalidPosition {
            position,
            max: cfg.max_position,
        });
    }
    let forced = model.id(counterpart);
    let free: Vec<u32> = (0..model.vocab_len() as u32)
        .filter(|&id| id != BOS_ID && id != EOS_ID && id != UNK_ID)
        .collect();
    let beam = cfg.beam_size;
    let norm = cfg.length_normalize;

    let mut live = vec![Hyp {
        ids: Vec::new(),
        log_prob: 0.0,
        finished: false,
    }];
    let mut finished: Vec<Hyp> = Vec::new();
    let mut ctx = Vec::with_capacity(cfg.max_len + 2);

    for step in 1..=cfg.max_len + 1 {
        let eos_ok = step > position && step > cfg.min_len;
        let mut expansions = Vec::new();
        for h in &live {
            ctx.clear();
            ctx.push(BOS_ID);
            ctx.extend_from_slice(&h.ids);
            let mut push = |w: u32| {
                let lp = model.log_prob_ids(&ctx, w);
                if lp.is_finite() {
                    let mut ids = h.ids.clone();
                    ids.push(w);
                    expansions.push(Hyp {
                        ids,
                        log_prob: h.log_prob + lp,
                        finished: w == EOS_ID,
                    });
                }
            };
            if step == position {
                push(forced);
            } else if step <= cfg.max_len {
                free.iter().for_each(|&w| push(w));
            }
            if eos_ok {
                push(EOS_ID);
            }
        }
        expansions.sort_by(|a, b| compare(model, a, b, norm));

        let mut next = Vec::with_capacity(beam);
        for (rank, h) in expansions.into_iter().enumerate() {
            if h.finished {
                if rank < beam {
                    finished.push(h);
                }
            } else if next.len() < beam {
                next.push(h);
            } else if rank >= beam {
                break;
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
        if !norm && finished.len() >= beam {
            // extensions only lower the raw log-prob
            finished.sort_by(|a, b| compare(model, a, b, norm));
            let worst = finished[beam - 1].log_prob;
            if live.iter().all(|h| h.log_prob <= worst) {
                break;
            }
        }
    }

    finished.sort_by(|a, b| compare(model, a, b, norm));
    finished.truncate(beam);
    Ok(finished
        .into_iter()
        .map(|h| {
            let len = h.ids.len() - 1;
            BeamHypothesis {
                tokens: natural_tokens(model, &h.ids),
                log_prob: h.log_prob,
                forced_position: match model.direction() {
                    Direction::Forward => position,
                    Direction::Reverse => len + 1 - position,
                },
            }
        })
        .collect())
}

/// The generated pool plus counterparts that had to be skipped.
#[derive(Debug, Clone, Default)]
pub struct GeneratedPool {
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
}

/// Runs the forward and reverse searches for every (pun, counterpart) pair
/// and every position `1..=max_position`. All candidates are re-scored with
/// the forward model so they share one scale.
pub fn generate_pool(
    fwd: &NGramModel,
    rev: &NGramModel,
    vocab: &PunVocabulary,
    cfg: &GeneratorConfig,
) -> Result<GeneratedPool, GeneratorError> {
    cfg.validate()?;
    for (model, expected) in [(fwd, Direction::Forward), (rev, Direction::Reverse)] {
        if model.direction() != expected {
            return Err(GeneratorError::WrongDirection {
                expected,
                found: model.direction(),
            });
        }
    }
    let mut pool = GeneratedPool::default();
    for (pun, counterpart) in vocab.pairs() {
        for (model, method) in [(fwd, Method::GenForward), (rev, Method::GenReverse)] {
            for position in 1..=cfg.max_position {
                let hyps = match constrained_beam_search(model, counterpart, position, cfg) {
                    Ok(h) => h,
                    Err(GeneratorError::CounterpartOov(_)) => {
                        pool.warnings.push(format!(
                            "counterpart `{counterpart}` unknown to the {} model; skipped",
                            model.direction()
                        ));
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let take = if cfg.keep_all_beams { hyps.len() } else { 1 };
                for h in hyps.into_iter().take(take) {
                    let lm_log_prob = fwd.score(&h.tokens)?.log_prob;
                    pool.candidates.push(Candidate {
                        tokens: h.tokens,
                        method,
                        pun_word: pun.to_string(),
                        counterpart: counterpart.to_string(),
                        forced_position: h.forced_position,
                        lm_log_prob,
                        tag_coverage: 0,
                        total_score: lm_log_prob,
                    });
                }
            }
        }
    }
    Ok(pool)
}

/// Swaps each occurrence of a pun word in a plain caption for each of its
/// counterparts, one substitution per candidate.
pub fn ambiguous_baseline(
    caption: &[String],
    vocab: &PunVocabulary,
    fwd: &NGramModel,
) -> Result<Vec<Candidate>, GeneratorError> {
    let mut out = Vec::new();
    for (i, token) in caption.iter().enumerate() {
        let Some(counterparts) = vocab.entries.get(token) else {
            continue;
        };
        for cp in counterparts {
            let mut tokens = caption.to_vec();
            tokens[i] = cp.clone();
            let lm_log_prob = fwd.score(&tokens)?.log_prob;
            out.push(Candidate {
                tokens,
                method: Method::Ambiguous,
                pun_word: token.clone(),
                counterpart: cp.clone(),
                forced_position: i + 1,
                lm_log_prob,
                tag_coverage: 0,
                total_score: lm_log_prob,
            });
        }
    }
    Ok(out)
}
