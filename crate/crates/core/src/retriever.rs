//! Sentence corpus ingestion, inverted index and pun-sentence retrieval.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::candidate::{Candidate, Method};
use crate::lm::{LmError, NGramModel};
use crate::punvocab::{tokenize, PunVocabulary, TagSet};

const MAGIC: &[u8; 8] = b"PUNIDX\0\0";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrieverError {
    #[error("no sentences retained from the corpus")]
    EmptyCorpus,
    #[error("refusing to save an empty index")]
    EmptyIndex,
    #[error("invalid retriever config: {0}")]
    InvalidConfig(String),
    #[error("index checksum mismatch")]
    Checksum,
    #[error("index version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrieverConfig {
    /// Exclusive upper bound on sentence length in tokens.
    pub max_words: usize,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self { max_words: 15 }
    }
}

impl RetrieverConfig {
    pub fn validate(&self) -> Result<(), RetrieverError> {
        if self.max_words < 2 {
            return Err(RetrieverError::InvalidConfig("max_words must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Each input line is one sentence.
    Lines,
    /// Running text split by [`SentenceSplitter`].
    Raw,
}

/// Rule-based sentence splitter for running text.
///
/// A sentence ends at a run of `.`, `?` or `!` (optionally followed by
/// closing quotes or brackets) when the next non-space character is an
/// uppercase letter, and at every blank line. Text is fed line by line and
/// complete sentences are returned as soon as their boundary is seen.
#[derive(Debug, Default)]
pub struct SentenceSplitter {
    pending: String,
}

impl SentenceSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one line of input and returns the sentences it completed.
    pub fn push_line(&mut self, line: &str) -> Vec<String> {
        if line.trim().is_empty() {
            return self.finish().into_iter().collect();
        }
        if !self.pending.is_empty() {
            self.pending.push(' ');
        }
        self.pending.push_str(line.trim());
        let mut out = Vec::new();
        while let Some(end) = Self::boundary(&self.pending) {
            let rest = self.pending.split_off(end);
            let sentence = std::mem::replace(&mut self.pending, rest.trim_start().to_string());
            out.push(sentence.trim().to_string());
        }
        out
    }

    /// Flushes whatever is left as a final sentence.
    pub fn finish(&mut self) -> Option<String> {
        let s = std::mem::take(&mut self.pending);
        let s = s.trim();
        (!s.is_empty()).then(|| s.to_string())
    }

    /// Byte offset just past the first sentence terminator whose lookahead
    /// is whitespace then an uppercase letter.
    fn boundary(text: &str) -> Option<usize> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            if !matches!(chars[i].1, '.' | '?' | '!') {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '?' | '!' | '"' | '\'' | ')' | ']' | '”' | '’') {
                j += 1;
            }
            let end = chars.get(j + 1).map_or(text.len(), |&(b, _)| b);
            let mut k = j + 1;
            let mut saw_space = false;
            while k < chars.len() && chars[k].1.is_whitespace() {
                saw_space = true;
                k += 1;
            }
            if saw_space && k < chars.len() {
                let next = chars[k].1;
                let opens_upper = matches!(next, '"' | '\'' | '“' | '‘' | '(')
                    && chars.get(k + 1).is_some_and(|&(_, c)| c.is_uppercase());
                if next.is_uppercase() || opens_upper {
                    return Some(end);
                }
            }
            i = j + 1;
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSentence {
    pub surface: String,
    pub tokens: Vec<String>,
}

/// Inverted index over short sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusIndex {
    max_words: usize,
    sentences: Vec<StoredSentence>,
    postings: BTreeMap<String, Vec<u32>>,
    token_count: u64,
}

impl CorpusIndex {
    fn new(max_words: usize) -> Self {
        Self {
            max_words,
            ..Default::default()
        }
    }

    /// Adds a sentence if it has between 1 and `max_words - 1` tokens.
    fn add(&mut self, surface: &str) -> bool {
        let tokens = tokenize(surface);
        if tokens.is_empty() || tokens.len() >= self.max_words {
            return false;
        }
        let id = self.sentences.len() as u32;
        for t in tokens.iter().collect::<BTreeSet<_>>() {
            self.postings.entry(t.clone()).or_default().push(id);
        }
        self.token_count += tokens.len() as u64;
        self.sentences.push(StoredSentence {
            surface: surface.to_string(),
            tokens,
        });
        true
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn token_count(&self) -> u64 {
        self.token_count
    }

    pub fn sentence(&self, id: u32) -> Option<&StoredSentence> {
        self.sentences.get(id as usize)
    }

    pub fn sentences(&self) -> &[StoredSentence] {
        &self.sentences
    }

    pub fn postings(&self, token: &str) -> &[u32] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    fn union(&self, tokens: impl IntoIterator<Item = impl AsRef<str>>) -> BTreeSet<u32> {
        tokens
            .into_iter()
            .flat_map(|t| self.postings(t.as_ref()).iter().copied())
            .collect()
    }

    pub fn save<W: Write>(&self, mut writer: W) -> Result<(), RetrieverError> {
        if self.sentences.is_empty() {
            return Err(RetrieverError::EmptyIndex);
        }
        let mut payload = Vec::new();
        payload.write_u32::<LittleEndian>(self.max_words as u32)?;
        payload.write_u64::<LittleEndian>(self.token_count)?;
        payload.write_u32::<LittleEndian>(self.sentences.len() as u32)?;
        for s in &self.sentences {
            write_str(&mut payload, &s.surface)?;
            payload.write_u32::<LittleEndian>(s.tokens.len() as u32)?;
            for t in &s.tokens {
                write_str(&mut payload, t)?;
            }
        }
        payload.write_u32::<LittleEndian>(self.postings.len() as u32)?;
        for (token, ids) in &self.postings {
            write_str(&mut payload, token)?;
            payload.write_u32::<LittleEndian>(ids.len() as u32)?;
            for &id in ids {
                payload.write_u32::<LittleEndian>(id)?;
            }
        }
        writer.write_all(MAGIC)?;
        writer.write_u32::<LittleEndian>(INDEX_VERSION)?;
        writer.write_u64::<LittleEndian>(payload.len() as u64)?;
        writer.write_all(&payload)?;
        writer.write_all(&Sha256::digest(&payload))?;
        Ok(())
    }

    pub fn load<R: Read>(mut reader: R) -> Result<Self, RetrieverError> {
        let mut magic = [0u8; 8];
        read_exact(&mut reader, &mut magic)?;
        if &magic != MAGIC {
            return Err(RetrieverError::Corrupt("bad magic".into()));
        }
        let version = reader.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != INDEX_VERSION {
            return Err(RetrieverError::VersionMismatch {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let len = reader.read_u64::<LittleEndian>().map_err(truncated)?;
        let mut payload = Vec::new();
        (&mut reader).take(len).read_to_end(&mut payload)?;
        if payload.len() as u64 != len {
            return Err(RetrieverError::Corrupt("truncated payload".into()));
        }
        let mut digest = [0u8; 32];
        read_exact(&mut reader, &mut digest)?;
        if Sha256::digest(&payload).as_slice() != digest {
            return Err(RetrieverError::Checksum);
        }
        Self::decode(&payload)
    }

    fn decode(mut p: &[u8]) -> Result<Self, RetrieverError> {
        let r = &mut p;
        let max_words = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let token_count = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let n = r.read_u32::<LittleEndian>().map_err(truncated)?;
        let mut sentences = Vec::new();
        for _ in 0..n {
            let surface = read_str(r)?;
            let k = r.read_u32::<LittleEndian>().map_err(truncated)?;
            let tokens = (0..k).map(|_| read_str(r)).collect::<Result<Vec<_>, _>>()?;
            sentences.push(StoredSentence { surface, tokens });
        }
        let m = r.read_u32::<LittleEndian>().map_err(truncated)?;
        let mut postings = BTreeMap::new();
        for _ in 0..m {
            let token = read_str(r)?;
            let k = r.read_u32::<LittleEndian>().map_err(truncated)?;
            let ids = (0..k)
                .map(|_| r.read_u32::<LittleEndian>().map_err(truncated))
                .collect::<Result<Vec<_>, _>>()?;
            if ids.windows(2).any(|w| w[0] >= w[1]) || ids.iter().any(|&id| id >= n) {
                return Err(RetrieverError::Corrupt(format!("bad posting list for `{token}`")));
            }
            postings.insert(token, ids);
        }
        if !r.is_empty() {
            return Err(RetrieverError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            max_words,
            sentences,
            postings,
            token_count,
        })
    }
}

fn truncated(_: std::io::Error) -> RetrieverError {
    RetrieverError::Corrupt("unexpected end of data".into())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), RetrieverError> {
    r.read_exact(buf).map_err(truncated)
}

fn write_str(out: &mut Vec<u8>, s: &str) -> std::io::Result<()> {
    out.write_u32::<LittleEndian>(s.len() as u32)?;
    out.write_all(s.as_bytes())
}

fn read_str(r: &mut &[u8]) -> Result<String, RetrieverError> {
    let len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    if r.len() < len {
        return Err(truncated(std::io::ErrorKind::UnexpectedEof.into()));
    }
    let (head, tail) = r.split_at(len);
    *r = tail;
    String::from_utf8(head.to_vec()).map_err(|_| RetrieverError::Corrupt("invalid UTF-8".into()))
}

/// Streams a corpus into an index, keeping only sentences shorter than
/// `max_words` tokens.
pub fn ingest<R: BufRead>(
    reader: R,
    cfg: &RetrieverConfig,
    mode: SplitMode,
) -> Result<CorpusIndex, RetrieverError> {
    cfg.validate()?;
    let mut index = CorpusIndex::new(cfg.max_words);
    let mut splitter = SentenceSplitter::new();
    for line in reader.lines() {
        let line = line?;
        match mode {
            SplitMode::Lines => {
                index.add(line.trim());
            }
            SplitMode::Raw => {
                for s in splitter.push_line(&line) {
                    index.add(&s);
                }
            }
        }
    }
    if let Some(s) = splitter.finish() {
        index.add(&s);
    }
    if index.sentences.is_empty() {
        return Err(RetrieverError::EmptyCorpus);
    }
    Ok(index)
}

/// Finds sentences that contain a counterpart from `vocab` and a tag from
/// `tags`. Identical token lists are returned once; candidates come out in
/// sentence-id order, scored by `fwd`.
pub fn retrieve(
    index: &CorpusIndex,
    vocab: &PunVocabulary,
    tags: &TagSet,
    fwd: &NGramModel,
) -> Result<Vec<Candidate>, RetrieverError> {
    let counterparts = vocab.counterpart_index();
    let with_cp = index.union(counterparts.keys());
    let with_tag = index.union(tags.iter());
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in with_cp.intersection(&with_tag) {
        let s = &index.sentences[*id as usize];
        if !seen.insert(&s.tokens) {
            continue;
        }
        let (pos, cp, pun) = s
            .tokens
            .iter()
            .enumerate()
            .find_map(|(i, t)| counterparts.get(t.as_str()).map(|pun| (i, t, *pun)))
            .expect("posting lists agree with stored tokens");
        let lm_log_prob = fwd.score(&s.tokens)?.log_prob;
        out.push(Candidate {
            tokens: s.tokens.clone(),
            method: Method::Retrieved,
            pun_word: pun.to_string(),
            counterpart: cp.clone(),
            forced_position: pos + 1,
            lm_log_prob,
            tag_coverage: 0,
            total_score: lm_log_prob,
        });
    }
    Ok(out)
}
