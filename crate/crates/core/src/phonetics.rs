//! Pronunciation lexicons, articulatory-feature edit distance and pun mining.
//!
//! Pronunciations are read from CMU-format dictionaries:
//!
//! ```text
//! ;;; comment
//! NIGHT  N AY1 T
//! READ(1)  R EH1 D
//! ```
//!
//! Stress digits are stripped, so `AY1` and `AY0` are the same phoneme. Each
//! phoneme carries a categorical feature vector (place, manner and voicing for
//! consonants; height, backness, roundedness and tenseness for vowels). The
//! substitution cost between two phonemes of the same class is the fraction of
//! attributes on which they differ; across classes it is 1.
//!
//! Costs are computed in integer units of 1/12 so that 1/3 (consonants) and
//! 1/4 (vowels) are both exact. Edit distances therefore never suffer from
//! floating point drift, and zero means zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled ARPAbet feature table.
pub const DEFAULT_FEATURE_TABLE: &str = include_str!("../data/phonemes.tsv");

/// Cost units per unit of distance.
const UNITS: u32 = 12;

#[derive(Debug, Error)]
pub enum PhoneticsError {
    #[error("unknown phoneme symbol `{0}`")]
    UnknownPhoneme(String),
    #[error("feature table line {line}: {reason}")]
    FeatureTable { line: usize, reason: String },
    #[error("no valid pronunciation entries parsed ({errors} malformed lines)")]
    NoEntries { errors: usize },
    #[error("pun list line {line}: {reason}")]
    PunList { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhonemeClass {
    Vowel,
    Consonant,
}

impl PhonemeClass {
    fn attribute_count(self) -> usize {
        match self {
            PhonemeClass::Consonant => 3,
            PhonemeClass::Vowel => 4,
        }
    }
}

/// A phoneme symbol with its articulatory attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phoneme {
    pub symbol: String,
    pub class: PhonemeClass,
    pub features: Vec<String>,
}

/// Strips trailing stress digits and uppercases: `ay1` -> `AY`.
pub fn normalize_symbol(raw: &str) -> String {
    raw.trim_end_matches(|c: char| c.is_ascii_digit()).to_ascii_uppercase()
}

/// The set of known phonemes and their feature vectors.
#[derive(Debug, Clone)]
pub struct PhonemeInventory {
    phonemes: Vec<Phoneme>,
    by_symbol: HashMap<String, usize>,
    /// Index of the first phoneme sharing each phoneme's feature vector.
    feature_class: Vec<usize>,
}

impl PhonemeInventory {
    /// Parses a tab- or space-separated feature table (see `data/phonemes.tsv`).
    pub fn parse(text: &str) -> Result<Self, PhoneticsError> {
        let mut phonemes = Vec::new();
        let mut by_symbol = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: String| PhoneticsError::FeatureTable {
                line: line_no,
                reason,
            };
            if fields.len() < 2 {
                return Err(err("expected symbol and class".into()));
            }
            let symbol = normalize_symbol(fields[0]);
            let class = match fields[1].to_ascii_lowercase().as_str() {
                "vowel" => PhonemeClass::Vowel,
                "consonant" => PhonemeClass::Consonant,
                other => return Err(err(format!("unknown class `{other}`"))),
            };
            let features: Vec<String> = fields[2..].iter().map(|f| f.to_ascii_lowercase()).collect();
            if features.len() != class.attribute_count() {
                return Err(err(format!(
                    "{} expects {} attributes, found {}",
                    fields[1],
                    class.attribute_count(),
                    features.len()
                )));
            }
            if by_symbol.contains_key(&symbol) {
                return Err(err(format!("duplicate symbol `{symbol}`")));
            }
            by_symbol.insert(symbol.clone(), phonemes.len());
            phonemes.push(Phoneme {
                symbol,
                class,
                features,
            });
        }
        if phonemes.is_empty() {
            return Err(PhoneticsError::FeatureTable {
                line: 0,
                reason: "empty feature table".into(),
            });
        }
        let feature_class = (0..phonemes.len())
            .map(|i| {
                (0..=i)
                    .find(|&j| {
                        phonemes[j].class == phonemes[i].class
                            && phonemes[j].features == phonemes[i].features
                    })
                    .unwrap_or(i)
            })
            .collect();
        Ok(Self {
            phonemes,
            by_symbol,
            feature_class,
        })
    }

    /// The bundled 39-symbol ARPAbet inventory.
    pub fn arpabet() -> Self {
        Self::parse(DEFAULT_FEATURE_TABLE).expect("bundled feature table is valid")
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn get(&self, symbol: &str) -> Option<&Phoneme> {
        self.by_symbol.get(symbol).map(|&i| &self.phonemes[i])
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.by_symbol.contains_key(symbol)
    }

    fn index(&self, symbol: &str) -> Result<usize, PhoneticsError> {
        self.by_symbol
            .get(symbol)
            .copied()
            .ok_or_else(|| PhoneticsError::UnknownPhoneme(symbol.to_string()))
    }

    fn cost_units(&self, a: usize, b: usize) -> u32 {
        if a == b {
            return 0;
        }
        let (pa, pb) = (&self.phonemes[a], &self.phonemes[b]);
        if pa.class != pb.class {
            return UNITS;
        }
        let differing = pa
            .features
            .iter()
            .zip(&pb.features)
            .filter(|(x, y)| x != y)
            .count() as u32;
        differing * UNITS / pa.class.attribute_count() as u32
    }

    /// Articulatory substitution cost between two phoneme symbols, in [0, 1].
    pub fn phoneme_distance(&self, a: &str, b: &str) -> Result<f64, PhoneticsError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        Ok(f64::from(self.cost_units(ia, ib)) / f64::from(UNITS))
    }

    fn indices(&self, p: &Pronunciation) -> Result<Vec<usize>, PhoneticsError> {
        p.phonemes.iter().map(|s| self.index(s)).collect()
    }

    /// Weighted Levenshtein distance: substitutions cost `phoneme_distance`,
    /// insertions and deletions cost 1.
    pub fn pronunciation_distance(
        &self,
        a: &Pronunciation,
        b: &Pronunciation,
    ) -> Result<f64, PhoneticsError> {
        let units = self.distance_units(&self.indices(a)?, &self.indices(b)?);
        Ok(f64::from(units) / f64::from(UNITS))
    }

    fn distance_units(&self, a: &[usize], b: &[usize]) -> u32 {
        let mut prev: Vec<u32> = (0..=b.len() as u32).map(|j| j * UNITS).collect();
        let mut cur = vec![0u32; b.len() + 1];
        for (i, &pa) in a.iter().enumerate() {
            cur[0] = (i as u32 + 1) * UNITS;
            for (j, &pb) in b.iter().enumerate() {
                let sub = prev[j] + self.cost_units(pa, pb);
                let del = prev[j + 1] + UNITS;
                let ins = cur[j] + UNITS;
                cur[j + 1] = sub.min(del).min(ins);
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prev[b.len()]
    }

    /// Key under which two pronunciations collide iff their distance is zero.
    fn feature_key(&self, p: &Pronunciation) -> Result<Vec<usize>, PhoneticsError> {
        p.phonemes
            .iter()
            .map(|s| self.index(s).map(|i| self.feature_class[i]))
            .collect()
    }
}

/// One dictionary entry line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pronunciation {
    pub word: String,
    pub phonemes: Vec<String>,
    pub variant: u32,
}

impl Pronunciation {
    /// Builds a pronunciation from stress-marked or bare symbols; variant 1.
    pub fn new(word: &str, phonemes: &[&str]) -> Self {
        Self {
            word: word.to_lowercase(),
            phonemes: phonemes.iter().map(|p| normalize_symbol(p)).collect(),
            variant: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

/// Result of parsing a pronunciation dictionary: valid entries plus
/// per-line problems that were skipped.
#[derive(Debug, Clone, Default)]
pub struct ParsedDictionary {
    pub entries: Vec<Pronunciation>,
    pub errors: Vec<LineError>,
}

fn parse_entry_line(line: &str, inventory: &PhonemeInventory) -> Result<Pronunciation, String> {
    // cmudict 0.7b+ appends `# comment` to a few entries
    let line = match line.find(" #") {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut fields = line.split_whitespace();
    let head = fields.next().ok_or("empty line")?;
    let (word, variant) = match head.strip_suffix(')').and_then(|h| h.rsplit_once('(')) {
        Some((word, n)) if !word.is_empty() => {
            let n: u32 = n
                .parse()
                .map_err(|_| format!("bad variant suffix in `{head}`"))?;
            (word, n + 1)
        }
        _ => (head, 1),
    };
    let phonemes: Vec<String> = fields.map(normalize_symbol).collect();
    if phonemes.is_empty() {
        return Err(format!("`{head}` has no phonemes"));
    }
    if let Some(bad) = phonemes.iter().find(|p| !inventory.contains(p)) {
        return Err(format!("unknown phoneme symbol `{bad}`"));
    }
    Ok(Pronunciation {
        word: word.to_lowercase(),
        phonemes,
        variant,
    })
}

/// Parses a CMU-format pronouncing dictionary.
///
/// Malformed lines are collected in [`ParsedDictionary::errors`]; the call
/// fails only when no entry at all could be parsed.
pub fn parse_pronouncing_dict<R: BufRead>(
    reader: R,
    inventory: &PhonemeInventory,
) -> Result<ParsedDictionary, PhoneticsError> {
    let mut parsed = ParsedDictionary::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;;") {
            continue;
        }
        match parse_entry_line(trimmed, inventory) {
            Ok(p) => parsed.entries.push(p),
            Err(reason) => parsed.errors.push(LineError {
                line: idx + 1,
                reason,
            }),
        }
    }
    if parsed.entries.is_empty() {
        return Err(PhoneticsError::NoEntries {
            errors: parsed.errors.len(),
        });
    }
    Ok(parsed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Exact,
    ArMetric,
}

impl PairSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PairSource::Exact => "exact",
            PairSource::ArMetric => "ar_metric",
        }
    }
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two differently spelled words that sound the same. `word_a < word_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PunPair {
    pub word_a: String,
    pub word_b: String,
    pub source: PairSource,
    pub distance: f64,
}

/// A deduplicated set of pun pairs and the symmetric counterpart map they induce.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PunLexicon {
    pairs: BTreeMap<(String, String), PunPair>,
    counterparts: BTreeMap<String, BTreeSet<String>>,
}

impl PunLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pair in canonical order. Returns false for same-spelling
    /// pairs and for pairs already present (the first insertion wins).
    pub fn insert(&mut self, a: &str, b: &str, source: PairSource, distance: f64) -> bool {
        if a == b {
            return false;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let key = (a.to_string(), b.to_string());
        if self.pairs.contains_key(&key) {
            return false;
        }
        self.counterparts
            .entry(key.0.clone())
            .or_default()
            .insert(key.1.clone());
        self.counterparts
            .entry(key.1.clone())
            .or_default()
            .insert(key.0.clone());
        self.pairs.insert(
            key.clone(),
            PunPair {
                word_a: key.0,
                word_b: key.1,
                source,
                distance,
            },
        );
        true
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in canonical (sorted) order.
    pub fn pairs(&self) -> impl Iterator<Item = &PunPair> {
        self.pairs.values()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&PunPair> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pairs.get(&(a.to_string(), b.to_string()))
    }

    pub fn counterparts(&self, word: &str) -> Option<&BTreeSet<String>> {
        self.counterparts.get(word)
    }

    pub fn counterpart_map(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.counterparts
    }

    /// Number of distinct words appearing in any pair.
    pub fn word_count(&self) -> usize {
        self.counterparts.len()
    }

    pub fn count_by_source(&self, source: PairSource) -> usize {
        self.pairs.values().filter(|p| p.source == source).count()
    }

    /// Serializes as `word_a<TAB>word_b<TAB>source<TAB>distance` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for p in self.pairs.values() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.word_a, p.word_b, p.source, p.distance
            ));
        }
        out
    }

    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, PhoneticsError> {
        let mut lexicon = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: &str| PhoneticsError::PunList {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err("expected 4 tab-separated fields"));
            }
            let source = match fields[2] {
                "exact" => PairSource::Exact,
                "ar_metric" => PairSource::ArMetric,
                _ => return Err(err("source must be `exact` or `ar_metric`")),
            };
            let distance: f64 = fields[3].parse().map_err(|_| err("bad distance"))?;
            if distance.is_nan() || distance < 0.0 {
                return Err(err("distance must be non-negative"));
            }
            if !lexicon.insert(fields[0], fields[1], source, distance) {
                return Err(err("duplicate or same-spelling pair"));
            }
        }
        Ok(lexicon)
    }
}

/// Reads an external word-pair list: two tab-separated words per line.
pub fn parse_word_pairs<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, PhoneticsError> {
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t').map(str::trim);
        match (fields.next(), fields.next()) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
                pairs.push((a.to_lowercase(), b.to_lowercase()))
            }
            _ => {
                return Err(PhoneticsError::PunList {
                    line: idx + 1,
                    reason: "expected two tab-separated words".into(),
                })
            }
        }
    }
    Ok(pairs)
}

/// Outcome of mining: the lexicon plus external pairs that were dropped.
#[derive(Debug, Clone, Default)]
pub struct MiningReport {
    pub lexicon: PunLexicon,
    pub warnings: Vec<String>,
}

/// Mines heterographic homophones from a pronunciation list.
///
/// Words sharing a symbol-identical pronunciation variant become `exact`
/// pairs. Words whose pronunciations only collide once phonemes are reduced
/// to their feature vectors become `ar_metric` pairs. External pairs whose
/// words both occur in `entries` are added as `exact` with their measured
/// minimum distance.
pub fn mine_pun_pairs(
    entries: &[Pronunciation],
    external_pairs: &[(String, String)],
    inventory: &PhonemeInventory,
) -> Result<MiningReport, PhoneticsError> {
    let mut by_symbols: BTreeMap<&[String], BTreeSet<&str>> = BTreeMap::new();
    let mut by_features: BTreeMap<Vec<usize>, BTreeSet<&str>> = BTreeMap::new();
    let mut by_word: BTreeMap<&str, Vec<&Pronunciation>> = BTreeMap::new();
    for p in entries {
        by_symbols
            .entry(p.phonemes.as_slice())
            .or_default()
            .insert(p.word.as_str());
        by_features
            .entry(inventory.feature_key(p)?)
            .or_default()
            .insert(p.word.as_str());
        by_word.entry(p.word.as_str()).or_default().push(p);
    }

    let mut exact: BTreeSet<(&str, &str)> = BTreeSet::new();
    for words in by_symbols.values() {
        for_each_pair(words, |a, b| {
            exact.insert((a, b));
        });
    }
    let mut ar: BTreeSet<(&str, &str)> = BTreeSet::new();
    for words in by_features.values() {
        for_each_pair(words, |a, b| {
            if !exact.contains(&(a, b)) {
                ar.insert((a, b));
            }
        });
    }

    let mut report = MiningReport::default();
    for (a, b) in exact {
        report.lexicon.insert(a, b, PairSource::Exact, 0.0);
    }
    for (a, b) in ar {
        report.lexicon.insert(a, b, PairSource::ArMetric, 0.0);
    }

    for (a, b) in external_pairs {
        let (Some(pa), Some(pb)) = (by_word.get(a.as_str()), by_word.get(b.as_str())) else {
            let warning = format!("external pair ({a}, {b}) references an unknown word; dropped");
            log::warn!("{warning}");
            report.warnings.push(warning);
            continue;
        };
        if a == b || report.lexicon.get(a, b).is_some() {
            continue;
        }
        let mut best = f64::INFINITY;
        for x in pa {
            for y in pb {
                best = best.min(inventory.pronunciation_distance(x, y)?);
            }
        }
        report.lexicon.insert(a, b, PairSource::Exact, best);
    }
    Ok(report)
}

fn for_each_pair<'a>(words: &BTreeSet<&'a str>, mut f: impl FnMut(&'a str, &'a str)) {
    let words: Vec<&str> = words.iter().copied().collect();
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            f(words[i], words[j]);
        }
    }
}
