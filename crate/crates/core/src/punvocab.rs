//! Context tags and per-context pun vocabularies.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phonetics::PunLexicon;

/// Bundled English stopword list.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Number of supplied labels used when the caller does not say otherwise.
pub const DEFAULT_MAX_SUPPLIED: usize = 5;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("no context provided")]
    NoContext,
    #[error("tags file line {line}: {reason}")]
    TagsFile { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercases, splits on whitespace and trims non-alphanumeric characters
/// from both ends of every token. Interior punctuation such as the
/// apostrophe in `knight's` survives.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// One lowercase word per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSource {
    Supplied,
    Caption,
}

/// Cleaned context tags with the source each one came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    tags: BTreeMap<String, TagSource>,
}

impl TagSet {
    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains_key(tag)
    }

    pub fn provenance(&self, tag: &str) -> Option<TagSource> {
        self.tags.get(tag).copied()
    }

    /// Tags in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, TagSource)> {
        self.tags.iter().map(|(t, s)| (t.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Number of distinct tags appearing in `tokens`.
    pub fn coverage(&self, tokens: &[String]) -> usize {
        tokens
            .iter()
            .filter(|t| self.tags.contains_key(t.as_str()))
            .collect::<BTreeSet<_>>()
            .len()
    }
}

impl FromIterator<(String, TagSource)> for TagSet {
    /// Takes already-cleaned tags as given; the first provenance seen wins.
    fn from_iter<I: IntoIterator<Item = (String, TagSource)>>(iter: I) -> Self {
        let mut set = TagSet::default();
        for (tag, source) in iter {
            set.tags.entry(tag).or_insert(source);
        }
        set
    }
}

/// Merges the first `max_supplied` supplied labels with the caption's words,
/// dropping stopwords. Multiword labels contribute each of their tokens.
pub fn build_tag_set(
    supplied_tags: &[String],
    caption: Option<&str>,
    max_supplied: usize,
    stopwords: &Stopwords,
) -> Result<TagSet, VocabError> {
    let caption = caption.filter(|c| !c.trim().is_empty());
    if supplied_tags.iter().all(|t| t.trim().is_empty()) && caption.is_none() {
        return Err(VocabError::NoContext);
    }
    let mut set = TagSet::default();
    let supplied = supplied_tags
        .iter()
        .take(max_supplied)
        .flat_map(|label| tokenize(label))
        .map(|t| (t, TagSource::Supplied));
    let from_caption = caption
        .into_iter()
        .flat_map(tokenize)
        .map(|t| (t, TagSource::Caption));
    for (token, source) in supplied.chain(from_caption) {
        if !stopwords.contains(&token) {
            set.tags.entry(token).or_insert(source);
        }
    }
    Ok(set)
}

/// Per-context map from a tag (the pun) to its counterparts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunVocabulary {
    pub context_id: String,
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl PunVocabulary {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (pun, counterpart) pairs in sorted order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .flat_map(|(pun, cps)| cps.iter().map(move |c| (pun.as_str(), c.as_str())))
    }

    /// All counterparts, each with the lexicographically first pun it serves.
    pub fn counterpart_index(&self) -> BTreeMap<&str, &str> {
        let mut index = BTreeMap::new();
        for (pun, cp) in self.pairs() {
            index.entry(cp).or_insert(pun);
        }
        index
    }
}

/// Looks up every tag in the lexicon; tags are matched on the pun side only.
pub fn build_pun_vocabulary(tags: &TagSet, lexicon: &PunLexicon, context_id: &str) -> PunVocabulary {
    let entries = tags
        .iter()
        .filter_map(|tag| {
            lexicon
                .counterparts(tag)
                .filter(|c| !c.is_empty())
                .map(|c| (tag.to_string(), c.clone()))
        })
        .collect();
    PunVocabulary {
        context_id: context_id.to_string(),
        entries,
    }
}

/// One line of a tags file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub context_id: String,
    pub tags: Vec<String>,
    pub caption: Option<String>,
}

/// Parses `context_id<TAB>tag[,tag...][<TAB>caption]` lines.
pub fn parse_tags_file<R: BufRead>(reader: R) -> Result<Vec<ContextSpec>, VocabError> {
    let mut contexts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let context_id = fields.next().unwrap_or_default().trim().to_string();
        if context_id.is_empty() {
            return Err(VocabError::TagsFile {
                line: idx + 1,
                reason: "missing context id".into(),
            });
        }
        let tags = fields
            .next()
            .unwrap_or_default()
            .split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        let caption = fields
            .next()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty());
        contexts.push(ContextSpec {
            context_id,
            tags,
            caption,
        });
    }
    Ok(contexts)
}
