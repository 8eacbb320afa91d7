//! Independent reference implementations used by the property tests and the
//! acceptance suite. Everything here is written for clarity, not speed.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use punster::candidate::{Candidate, Method};
use punster::phonetics::{PairSource, PhonemeInventory, Pronunciation, PunLexicon};
use punster::punvocab::{tokenize, PunVocabulary, TagSet};
use punster::ranker::{sentence_similarity, EmbeddingTable};
use punster::{GeneratorConfig, NGramModel};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------------------
// phonetics

/// Six phonemes: two vowels sharing three of four attributes, a third vowel,
/// and three consonants.
pub const TOY_TABLE: &str = "\
IY vowel high front unrounded tense
IH vowel high front unrounded lax
UW vowel high back rounded tense
P consonant bilabial stop voiceless
B consonant bilabial stop voiced
S consonant alveolar fricative voiceless
";

pub const TOY_SYMBOLS: [&str; 6] = ["IY", "IH", "UW", "P", "B", "S"];

/// Hand-written feature rows for the toy symbols, independent of the parser.
fn toy_features(sym: &str) -> (bool, [&'static str; 4]) {
    match sym {
        "IY" => (true, ["high", "front", "unrounded", "tense"]),
        "IH" => (true, ["high", "front", "unrounded", "lax"]),
        "UW" => (true, ["high", "back", "rounded", "tense"]),
        "P" => (false, ["bilabial", "stop", "voiceless", ""]),
        "B" => (false, ["bilabial", "stop", "voiced", ""]),
        "S" => (false, ["alveolar", "fricative", "voiceless", ""]),
        other => panic!("not a toy phoneme: {other}"),
    }
}

/// Substitution cost in twelfths.
pub fn toy_sub_units(a: &str, b: &str) -> u32 {
    let ((va, fa), (vb, fb)) = (toy_features(a), toy_features(b));
    if va != vb {
        return 12;
    }
    let n = if va { 4 } else { 3 };
    let diff = (0..n).filter(|&i| fa[i] != fb[i]).count() as u32;
    diff * 12 / n as u32
}

/// Plain recursive edit distance in twelfths, no memoisation.
pub fn brute_units(a: &[&str], b: &[&str]) -> u32 {
    match (a.split_first(), b.split_first()) {
        (None, _) => 12 * b.len() as u32,
        (_, None) => 12 * a.len() as u32,
        (Some((x, ra)), Some((y, rb))) => {
            let sub = toy_sub_units(x, y) + brute_units(ra, rb);
            let del = 12 + brute_units(ra, b);
            let ins = 12 + brute_units(a, rb);
            sub.min(del).min(ins)
        }
    }
}

pub fn brute_distance(a: &[&str], b: &[&str]) -> f64 {
    f64::from(brute_units(a, b)) / 12.0
}

pub fn random_toy_sequence<R: Rng>(rng: &mut R, max_len: usize) -> Vec<&'static str> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *TOY_SYMBOLS.choose(rng).unwrap()).collect()
}

/// All-pairs scan: exact when two words share a symbol-identical
/// pronunciation, ar_metric when some pair of pronunciations is at distance
/// zero but none is identical.
pub fn brute_mine(entries: &[Pronunciation], inv: &PhonemeInventory) -> BTreeSet<(String, String, PairSource)> {
    let mut by_word: BTreeMap<&str, Vec<&Pronunciation>> = BTreeMap::new();
    for e in entries {
        by_word.entry(e.word.as_str()).or_default().push(e);
    }
    let words: Vec<&str> = by_word.keys().copied().collect();
    let mut out = BTreeSet::new();
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let (pa, pb) = (&by_word[words[i]], &by_word[words[j]]);
            let mut identical = false;
            let mut zero = false;
            for x in pa {
                for y in pb {
                    identical |= x.phonemes == y.phonemes;
                    zero |= inv.pronunciation_distance(x, y).unwrap() == 0.0;
                }
            }
            if identical {
                out.insert((words[i].to_string(), words[j].to_string(), PairSource::Exact));
            } else if zero {
                out.insert((words[i].to_string(), words[j].to_string(), PairSource::ArMetric));
            }
        }
    }
    out
}

pub fn lexicon_set(lex: &PunLexicon) -> BTreeSet<(String, String, PairSource)> {
    lex.pairs()
        .map(|p| (p.word_a.clone(), p.word_b.clone(), p.source))
        .collect()
}

// ---------------------------------------------------------------------------
// language model and decoding

pub fn sentences(text: &str) -> Vec<Vec<String>> {
    text.lines().map(tokenize).filter(|s| !s.is_empty()).collect()
}

/// A random corpus over `words`, `n` sentences of 1..=`max_len` tokens.
pub fn random_corpus<R: Rng>(rng: &mut R, words: &[&str], n: usize, max_len: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            (0..len).map(|_| words.choose(rng).unwrap().to_string()).collect()
        })
        .collect()
}

/// Every sentence the constrained search could emit, scored with the model,
/// sorted best first with ties broken on the token sequence.
pub fn exhaustive_search(
    model: &NGramModel,
    words: &[String],
    counterpart: &str,
    position: usize,
    cfg: &GeneratorConfig,
) -> Vec<(Vec<String>, f64)> {
    // decoding-order sequences; the constraint sits at decoding step `position`
    let mut all = Vec::new();
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for len in 1..=cfg.max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            let choices: Vec<&String> = if len == position {
                vec![words.iter().find(|w| *w == counterpart).unwrap()]
            } else {
                words.iter().collect()
            };
            for w in choices {
                let mut s = seq.clone();
                s.push(w.clone());
                next.push(s);
            }
        }
        for s in &next {
            if len >= position && len >= cfg.min_len {
                all.push(s.clone());
            }
        }
        frontier = next;
    }
    let mut scored: Vec<(Vec<String>, f64)> = all
        .into_iter()
        .map(|mut s| {
            if model.direction() == punster::Direction::Reverse {
                s.reverse();
            }
            let lp = model.score(&s).unwrap().log_prob;
            (s, lp)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

// ---------------------------------------------------------------------------
// retrieval

/// Scans raw corpus lines in order, mimicking line-mode ingestion.
pub fn scan_retrieve(
    lines: &[String],
    max_words: usize,
    vocab: &PunVocabulary,
    tags: &TagSet,
) -> Vec<(Vec<String>, String, usize)> {
    let counterparts: BTreeSet<&String> = vocab.entries.values().flatten().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for line in lines {
        let toks = tokenize(line);
        if toks.is_empty() || toks.len() >= max_words {
            continue;
        }
        let hit = toks.iter().position(|t| counterparts.contains(t));
        let tagged = toks.iter().any(|t| tags.contains(t));
        if let (Some(pos), true) = (hit, tagged) {
            if seen.insert(toks.clone()) {
                let cp = toks[pos].clone();
                out.push((toks, cp, pos + 1));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// ranking

pub fn candidate(tokens: &[&str], lm: f64, method: Method) -> Candidate {
    Candidate {
        tokens: tokens.iter().map(|s| s.to_string()).collect(),
        method,
        pun_word: "bear".into(),
        counterpart: "bare".into(),
        forced_position: 1,
        lm_log_prob: lm,
        tag_coverage: 0,
        total_score: lm,
    }
}

/// A random pool over a tiny vocabulary so that duplicates and near
/// duplicates are common.
pub fn random_pool<R: Rng>(rng: &mut R, max_size: usize) -> Vec<Candidate> {
    const WORDS: [&str; 8] = ["bare", "bear", "the", "forest", "water", "cold", "tree", "river"];
    let n = rng.gen_range(0..=max_size);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=5);
            let toks: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect();
            // coarse scores produce ties
            let lm = -(rng.gen_range(0..40) as f64) / 4.0;
            let method = if rng.gen_bool(0.5) { Method::GenForward } else { Method::Retrieved };
            candidate(&toks, lm, method)
        })
        .collect()
}

/// Sort by score (with the same tie-break the library documents) and keep a
/// candidate when it is below the threshold against everything kept so far.
pub fn greedy_nms(
    pool: &[Candidate],
    tags: &TagSet,
    weight: f64,
    emb: &EmbeddingTable,
    threshold: f64,
    top_k: usize,
) -> Vec<Candidate> {
    let mut scored: Vec<Candidate> = pool
        .iter()
        .cloned()
        .map(|mut c| {
            let covered: BTreeSet<&String> = c.tokens.iter().filter(|t| tags.contains(t)).collect();
            c.tag_coverage = covered.len();
            c.total_score = c.lm_log_prob + weight * covered.len() as f64;
            c
        })
        .collect();
    scored.sort_by(|a, b| a.rank_cmp(b));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in scored {
        if kept.len() == top_k {
            break;
        }
        if kept.iter().all(|k| sentence_similarity(&k.tokens, &c.tokens, emb) < threshold) {
            kept.push(c);
        }
    }
    kept
}

pub fn toy_embeddings() -> EmbeddingTable {
    let rows: [(&str, [f64; 3]); 6] = [
        ("bare", [1.0, 0.2, 0.0]),
        ("bear", [0.9, 0.1, 0.3]),
        ("forest", [0.0, 1.0, 0.1]),
        ("tree", [0.1, 0.9, 0.0]),
        ("water", [0.0, 0.1, 1.0]),
        ("river", [0.2, 0.0, 0.9]),
    ];
    EmbeddingTable::from_vectors(3, rows.iter().map(|(w, v)| (w.to_string(), v.to_vec())).collect())
}

// ---------------------------------------------------------------------------
// evaluation

pub fn random_votes<R: Rng>(rng: &mut R) -> Vec<punster::evalkit::VoteRecord> {
    use punster::evalkit::{Opponent, VoteRecord};
    let contexts = rng.gen_range(1..=30);
    let mut out = Vec::new();
    for c in 0..contexts {
        for rank in 1..=rng.gen_range(1..=5u32) {
            let opponent = Opponent::ALL[rng.gen_range(0..3)];
            let total = rng.gen_range(1..=5);
            out.push(VoteRecord {
                context_id: format!("c{c}"),
                candidate_rank: rank,
                opponent,
                wins: rng.gen_range(0..=total),
                total,
            });
        }
    }
    out.shuffle(rng);
    out
}

// ---------------------------------------------------------------------------
// fixtures

pub fn demo_dir() -> std::path::PathBuf {
    // works from either crate of the workspace
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/demo")
}

pub fn method_is_generated(c: &Candidate) -> bool {
    matches!(c.method, Method::GenForward | Method::GenReverse)
}
