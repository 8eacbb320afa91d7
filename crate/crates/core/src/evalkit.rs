//! Recall@K from pairwise preference votes.
//!
//! Each vote record says how one of our ranked captions fared against a
//! caption from another approach: `wins` of `total` judges preferred ours.
//! A context counts towards Recall@K when any of our top-K captions wins a
//! strict majority against that opponent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no data for opponent `{0}`")]
    NoData(Opponent),
    #[error("K must be at least 1")]
    InvalidK,
    #[error("votes CSV record {record}: {reason}")]
    InvalidRecord { record: usize, reason: String },
    #[error("votes CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opponent {
    Regular,
    WittyMismatch,
    Ambiguous,
    HumanConstrained,
    HumanFreeform,
    Retrieved,
    Generated,
}

impl Opponent {
    pub const ALL: [Opponent; 7] = [
        Opponent::Regular,
        Opponent::WittyMismatch,
        Opponent::Ambiguous,
        Opponent::HumanConstrained,
        Opponent::HumanFreeform,
        Opponent::Retrieved,
        Opponent::Generated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Opponent::Regular => "regular",
            Opponent::WittyMismatch => "witty_mismatch",
            Opponent::Ambiguous => "ambiguous",
            Opponent::HumanConstrained => "human_constrained",
            Opponent::HumanFreeform => "human_freeform",
            Opponent::Retrieved => "retrieved",
            Opponent::Generated => "generated",
        }
    }
}

impl fmt::Display for Opponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub context_id: String,
    pub candidate_rank: u32,
    pub opponent: Opponent,
    pub wins: u32,
    pub total: u32,
}

impl VoteRecord {
    /// Strict majority of judges preferred our caption.
    pub fn is_win(&self) -> bool {
        self.wins > self.total - self.wins
    }
}

/// Reads `context_id,candidate_rank,opponent,wins,total` records.
pub fn read_votes<R: Read>(reader: R) -> Result<Vec<VoteRecord>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut votes = Vec::new();
    for (i, rec) in rdr.deserialize::<VoteRecord>().enumerate() {
        let rec = rec?;
        let invalid = |reason: &str| EvalError::InvalidRecord {
            record: i + 1,
            reason: reason.to_string(),
        };
        if rec.candidate_rank < 1 {
            return Err(invalid("candidate_rank must be >= 1"));
        }
        if rec.total < 1 || rec.wins > rec.total {
            return Err(invalid("need 0 <= wins <= total and total >= 1"));
        }
        votes.push(rec);
    }
    Ok(votes)
}

/// Fraction of contexts (with any record against `opponent`) where one of
/// our top-`k` captions won a majority.
pub fn recall_at_k(votes: &[VoteRecord], opponent: Opponent, k: u32) -> Result<f64, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    let mut contexts: BTreeMap<&str, bool> = BTreeMap::new();
    for v in votes.iter().filter(|v| v.opponent == opponent) {
        let won = contexts.entry(&v.context_id).or_insert(false);
        *won |= v.candidate_rank <= k && v.is_win();
    }
    if contexts.is_empty() {
        return Err(EvalError::NoData(opponent));
    }
    let wins = contexts.values().filter(|&&w| w).count();
    Ok(wins as f64 / contexts.len() as f64)
}

/// Fraction of individual records with rank <= `k` that won their majority.
/// This is the per-caption reading of the same votes.
pub fn caption_win_rate(votes: &[VoteRecord], opponent: Opponent, k: u32) -> Result<f64, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    let relevant: Vec<&VoteRecord> = votes
        .iter()
        .filter(|v| v.opponent == opponent && v.candidate_rank <= k)
        .collect();
    if relevant.is_empty() {
        return Err(EvalError::NoData(opponent));
    }
    Ok(relevant.iter().filter(|v| v.is_win()).count() as f64 / relevant.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub opponent: Opponent,
    pub contexts: usize,
    /// Recall@1..=max_k.
    pub recall: Vec<f64>,
    /// Per-caption win rate over captions ranked 1..=k, for k = 1..=max_k.
    pub caption_win_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub max_k: u32,
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

/// Per-opponent Recall@1..=max_k rows, in a fixed opponent order.
pub fn comparison_table(votes: &[VoteRecord], max_k: u32) -> Result<ComparisonTable, EvalError> {
    if max_k < 1 {
        return Err(EvalError::InvalidK);
    }
    let mut table = ComparisonTable {
        max_k,
        rows: Vec::new(),
        warnings: Vec::new(),
    };
    if votes.is_empty() {
        table.warnings.push("no vote records; table is empty".into());
        return Ok(table);
    }
    let present: BTreeSet<Opponent> = votes.iter().map(|v| v.opponent).collect();
    for opponent in Opponent::ALL.into_iter().filter(|o| present.contains(o)) {
        let contexts = votes
            .iter()
            .filter(|v| v.opponent == opponent)
            .map(|v| v.context_id.as_str())
            .collect::<BTreeSet<_>>()
            .len();
        let recall = (1..=max_k)
            .map(|k| recall_at_k(votes, opponent, k))
            .collect::<Result<Vec<_>, _>>()?;
        let caption_win_rate = (1..=max_k)
            .map(|k| caption_win_rate(votes, opponent, k).unwrap_or(0.0))
            .collect();
        table.rows.push(ComparisonRow {
            opponent,
            contexts,
            recall,
            caption_win_rate,
        });
    }
    Ok(table)
}

pub fn format_percent(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

impl ComparisonTable {
    /// Fixed-width text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        let mut header = format!("{:<18} {:>8}", "opponent", "contexts");
        for k in 1..=self.max_k {
            header.push_str(&format!(" {:>9}", format!("R@{k}")));
        }
        for k in 1..=self.max_k {
            header.push_str(&format!(" {:>9}", format!("win@{k}")));
        }
        out.push_str(header.trim_end());
        out.push('\n');
        for row in &self.rows {
            let mut line = format!("{:<18} {:>8}", row.opponent.as_str(), row.contexts);
            for r in row.recall.iter().chain(&row.caption_win_rate) {
                line.push_str(&format!(" {:>9}", format_percent(*r)));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ctx: &str, rank: u32, opp: Opponent, wins: u32, total: u32) -> VoteRecord {
        VoteRecord {
            context_id: ctx.into(),
            candidate_rank: rank,
            opponent: opp,
            wins,
            total,
        }
    }

    #[test]
    fn recall_hand_example() {
        use Opponent::Regular;
        let votes = vec![
            rec("c1", 1, Regular, 2, 9),
            rec("c1", 2, Regular, 6, 9),
            rec("c2", 1, Regular, 4, 9),
            rec("c2", 2, Regular, 3, 9),
            rec("c3", 1, Regular, 0, 9),
        ];
        assert_eq!(recall_at_k(&votes, Regular, 1).unwrap(), 0.0);
        assert!((recall_at_k(&votes, Regular, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((recall_at_k(&votes, Regular, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn saturation_and_ties() {
        use Opponent::Ambiguous;
        let votes = vec![rec("a", 1, Ambiguous, 5, 9), rec("b", 1, Ambiguous, 9, 9)];
        for k in 1..=5 {
            assert_eq!(recall_at_k(&votes, Ambiguous, k).unwrap(), 1.0);
        }
        // a tie is not a majority
        let votes = vec![rec("a", 1, Ambiguous, 5, 10)];
        assert_eq!(recall_at_k(&votes, Ambiguous, 1).unwrap(), 0.0);
    }

    #[test]
    fn no_data_and_bad_k() {
        let votes = vec![rec("a", 1, Opponent::Regular, 5, 9)];
        assert_eq!(
            recall_at_k(&votes, Opponent::Generated, 1).unwrap_err().to_string(),
            "no data for opponent `generated`"
        );
        assert!(matches!(recall_at_k(&votes, Opponent::Regular, 0), Err(EvalError::InvalidK)));
    }

    #[test]
    fn reads_csv_and_validates() {
        let csv = "context_id,candidate_rank,opponent,wins,total\nimg1,1,witty_mismatch,7,9\nimg1, 2 ,regular,3,9\n";
        let votes = read_votes(csv.as_bytes()).unwrap();
        assert_eq!(votes.len(), 2);
        assert_eq!(votes[1].opponent, Opponent::Regular);
        let bad = "context_id,candidate_rank,opponent,wins,total\nimg1,1,regular,10,9\n";
        assert!(matches!(read_votes(bad.as_bytes()), Err(EvalError::InvalidRecord { record: 1, .. })));
        let bad = "context_id,candidate_rank,opponent,wins,total\nimg1,1,robots,1,9\n";
        assert!(matches!(read_votes(bad.as_bytes()), Err(EvalError::Csv(_))));
    }

    #[test]
    fn empty_table_warns() {
        let t = comparison_table(&[], 3).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.warnings.len(), 1);
        assert!(t.to_text().starts_with("warning:"));
    }

    #[test]
    fn table_rows_and_text() {
        let votes = vec![
            rec("a", 1, Opponent::Ambiguous, 6, 9),
            rec("b", 1, Opponent::Ambiguous, 2, 9),
            rec("b", 3, Opponent::Ambiguous, 8, 9),
            rec("a", 1, Opponent::Regular, 1, 9),
        ];
        let t = comparison_table(&votes, 3).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].opponent, Opponent::Regular);
        assert_eq!(t.rows[1].recall, vec![0.5, 0.5, 1.0]);
        assert_eq!(t.rows[1].caption_win_rate, vec![0.5, 0.5, 2.0 / 3.0]);
        let text = t.to_text();
        assert!(text.contains("ambiguous"));
        assert!(text.contains("50.0%"));
        assert!(text.contains("100.0%"));
    }
}
