use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GenForward,
    GenReverse,
    Retrieved,
    Ambiguous,
}

impl Method {
    pub fn is_generated(self) -> bool {
        matches!(self, Method::GenForward | Method::GenReverse)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GenForward => "gen_forward",
            Method::GenReverse => "gen_reverse",
            Method::Retrieved => "retrieved",
            Method::Ambiguous => "ambiguous",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A pun-bearing sentence and how it was produced.
///
/// `forced_position` is 1-based from the start of the sentence and points at
/// the counterpart token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tokens: Vec<String>,
    pub method: Method,
    pub pun_word: String,
    pub counterpart: String,
    pub forced_position: usize,
    pub lm_log_prob: f64,
    pub tag_coverage: usize,
    pub total_score: f64,
}

impl Candidate {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Renders the sentence with the pun in parentheses after its
    /// counterpart: `a bare (bear) black bear`.
    pub fn annotated(&self) -> String {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i + 1 == self.forced_position && *t == self.counterpart {
                    format!("{t} ({})", self.pun_word)
                } else {
                    t.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Canonical order: higher total score first, then token sequence, then
    /// the remaining fields so that equal-scoring candidates never tie.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .total_score
            .total_cmp(&self.total_score)
            .then_with(|| self.tokens.cmp(&other.tokens))
            .then_with(|| self.method.cmp(&other.method))
            .then_with(|| self.forced_position.cmp(&other.forced_position))
            .then_with(|| self.pun_word.cmp(&other.pun_word))
            .then_with(|| self.counterpart.cmp(&other.counterpart))
            .then_with(|| other.lm_log_prob.total_cmp(&self.lm_log_prob))
    }
}
