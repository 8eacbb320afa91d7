//! End-to-end orchestration: tags -> pun vocabulary -> generated and
//! retrieved pools -> ranked report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::Candidate;
use crate::generator::{ambiguous_baseline, generate_pool, GeneratorConfig, GeneratorError};
use crate::lm::{Direction, LmError, NGramModel};
use crate::phonetics::{PhoneticsError, PunLexicon};
use crate::punvocab::{
    build_pun_vocabulary, build_tag_set, tokenize, ContextSpec, PunVocabulary, Stopwords, TagSet,
    TagSource, VocabError, DEFAULT_MAX_SUPPLIED,
};
use crate::ranker::{
    load_embeddings, rank_pools, score_candidates, EmbeddingTable, RankerConfig, RankerError,
};
use crate::retriever::{retrieve, CorpusIndex, RetrieverConfig, RetrieverError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const POOL_SCHEMA_VERSION: u32 = 1;

/// JSON schema for [`Report`].
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: cannot open {path}: {source}")]
    Open {
        stage: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing required path for {0}")]
    MissingPath(&'static str),
    #[error("pun lexicon: {0}")]
    Lexicon(#[from] PhoneticsError),
    #[error("language model: {0}")]
    Lm(#[from] LmError),
    #[error("corpus index: {0}")]
    Index(#[from] RetrieverError),
    #[error("embeddings: {0}")]
    Embeddings(#[from] RankerError),
    #[error("tags: {0}")]
    Tags(#[from] VocabError),
    #[error("generation: {0}")]
    Generation(#[from] GeneratorError),
    #[error("language model {path} has direction {found}, expected {expected}")]
    Direction {
        path: PathBuf,
        found: Direction,
        expected: Direction,
    },
}

/// Locations of every resource the pipeline reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourcePaths {
    pub lexicon: Option<PathBuf>,
    pub lm_forward: Option<PathBuf>,
    pub lm_reverse: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Bundled English list when unset.
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: ResourcePaths,
    pub max_supplied_tags: usize,
    pub generator: GeneratorConfig,
    pub retriever: RetrieverConfig,
    pub ranker: RankerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: ResourcePaths::default(),
            max_supplied_tags: DEFAULT_MAX_SUPPLIED,
            generator: GeneratorConfig::default(),
            retriever: RetrieverConfig::default(),
            ranker: RankerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.generator.validate()?;
        self.retriever.validate()?;
        self.ranker.validate()?;
        Ok(())
    }
}

fn open(stage: &'static str, path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| PipelineError::Open {
            stage,
            path: path.to_path_buf(),
            source,
        })
}

fn required<'a>(path: &'a Option<PathBuf>, what: &'static str) -> Result<&'a Path, PipelineError> {
    path.as_deref().ok_or(PipelineError::MissingPath(what))
}

pub fn load_lexicon(path: &Path) -> Result<PunLexicon, PipelineError> {
    Ok(PunLexicon::from_tsv(open("pun lexicon", path)?)?)
}

pub fn load_model(path: &Path, expected: Direction) -> Result<NGramModel, PipelineError> {
    let model = NGramModel::load(open("language model", path)?)?;
    if model.direction() != expected {
        return Err(PipelineError::Direction {
            path: path.to_path_buf(),
            found: model.direction(),
            expected,
        });
    }
    Ok(model)
}

pub fn load_index(path: &Path) -> Result<CorpusIndex, PipelineError> {
    Ok(CorpusIndex::load(open("corpus index", path)?)?)
}

pub fn load_embedding_file(path: &Path) -> Result<EmbeddingTable, PipelineError> {
    let (table, errors) = load_embeddings(open("embeddings", path)?)?;
    for e in &errors {
        log::warn!("{}:{}: {}", path.display(), e.line, e.reason);
    }
    Ok(table)
}

pub fn load_stopwords(path: Option<&Path>) -> Result<Stopwords, PipelineError> {
    match path {
        None => Ok(Stopwords::english()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| PipelineError::Open {
                stage: "stopwords",
                path: p.to_path_buf(),
                source,
            })?;
            Ok(Stopwords::parse(&text))
        }
    }
}

/// Everything loaded up front. Optional parts are only needed by some stages.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: PunLexicon,
    pub stopwords: Stopwords,
    pub fwd: NGramModel,
    pub rev: Option<NGramModel>,
    pub index: Option<CorpusIndex>,
    pub embeddings: EmbeddingTable,
}

/// Which resources a stage needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    pub reverse_model: bool,
    pub index: bool,
    pub embeddings: bool,
}

impl Needs {
    pub const ALL: Needs = Needs {
        reverse_model: true,
        index: true,
        embeddings: true,
    };
}

impl Resources {
    /// Loads and parses every needed resource, failing on the first problem.
    pub fn load(paths: &ResourcePaths, needs: Needs) -> Result<Self, PipelineError> {
        let lexicon = load_lexicon(required(&paths.lexicon, "pun lexicon")?)?;
        let stopwords = load_stopwords(paths.stopwords.as_deref())?;
        let fwd = load_model(required(&paths.lm_forward, "forward language model")?, Direction::Forward)?;
        let rev = if needs.reverse_model {
            Some(load_model(
                required(&paths.lm_reverse, "reverse language model")?,
                Direction::Reverse,
            )?)
        } else {
            None
        };
        let index = if needs.index {
            Some(load_index(required(&paths.index, "corpus index")?)?)
        } else {
            None
        };
        let embeddings = match (&paths.embeddings, needs.embeddings) {
            (Some(p), true) => load_embedding_file(p)?,
            (None, true) => {
                log::warn!("no embeddings given; similarity falls back to token-count cosine");
                EmbeddingTable::empty()
            }
            (_, false) => EmbeddingTable::empty(),
        };
        Ok(Self {
            lexicon,
            stopwords,
            fwd,
            rev,
            index,
            embeddings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagEntry {
    pub tag: String,
    pub source: TagSource,
}

fn tag_entries(tags: &TagSet) -> Vec<TagEntry> {
    tags.entries()
        .map(|(tag, source)| TagEntry {
            tag: tag.to_string(),
            source,
        })
        .collect()
}

fn tag_set_from_entries(entries: &[TagEntry]) -> TagSet {
    entries.iter().map(|e| (e.tag.clone(), e.source)).collect()
}

/// A candidate as it appears in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub rank: usize,
    pub text: String,
    pub annotated: String,
    #[serde(flatten)]
    pub candidate: Candidate,
}

fn ranked(list: Vec<Candidate>) -> Vec<RankedCandidate> {
    list.into_iter()
        .enumerate()
        .map(|(i, c)| RankedCandidate {
            rank: i + 1,
            text: c.text(),
            annotated: c.annotated(),
            candidate: c,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextStatus {
    Ok,
    NoPuns,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub generated: usize,
    pub retrieved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextReport {
    pub context_id: String,
    pub status: ContextStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tags: Vec<TagEntry>,
    pub pun_vocabulary: BTreeMap<String, BTreeSet<String>>,
    pub pool_sizes: PoolSizes,
    pub generated: Vec<RankedCandidate>,
    pub retrieved: Vec<RankedCandidate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub merged: Vec<RankedCandidate>,
    pub ambiguous: Vec<RankedCandidate>,
    pub warnings: Vec<String>,
}

impl ContextReport {
    fn empty(context_id: &str, status: ContextStatus) -> Self {
        Self {
            context_id: context_id.to_string(),
            status,
            error: None,
            tags: Vec::new(),
            pun_vocabulary: BTreeMap::new(),
            pool_sizes: PoolSizes::default(),
            generated: Vec::new(),
            retrieved: Vec::new(),
            merged: Vec::new(),
            ambiguous: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub contexts: Vec<ContextReport>,
}

/// Cleaned tags and pun vocabulary for one context.
pub fn prepare_context(
    context: &ContextSpec,
    res: &Resources,
    cfg: &PipelineConfig,
) -> Result<(TagSet, PunVocabulary), PipelineError> {
    let tags = build_tag_set(&context.tags, context.caption.as_deref(), cfg.max_supplied_tags, &res.stopwords)?;
    let vocab = build_pun_vocabulary(&tags, &res.lexicon, &context.context_id);
    Ok((tags, vocab))
}

fn run_context_inner(
    context: &ContextSpec,
    res: &Resources,
    cfg: &PipelineConfig,
) -> Result<ContextReport, PipelineError> {
    let (tags, vocab) = prepare_context(context, res, cfg)?;
    let mut report = ContextReport::empty(&context.context_id, ContextStatus::Ok);
    report.tags = tag_entries(&tags);
    if vocab.is_empty() {
        report.status = ContextStatus::NoPuns;
        return Ok(report);
    }
    report.pun_vocabulary = vocab.entries.clone();

    let rev = res.rev.as_ref().ok_or(PipelineError::MissingPath("reverse language model"))?;
    let index = res.index.as_ref().ok_or(PipelineError::MissingPath("corpus index"))?;
    let generated = generate_pool(&res.fwd, rev, &vocab, &cfg.generator)?;
    report.warnings.extend(generated.warnings);
    if generated.candidates.is_empty() {
        report.warnings.push("no generation possible".into());
    }
    let retrieved = retrieve(index, &vocab, &tags, &res.fwd)?;
    report.pool_sizes = PoolSizes {
        generated: generated.candidates.len(),
        retrieved: retrieved.len(),
    };

    let mut pool = generated.candidates;
    pool.extend(retrieved);
    let ranked_pools = rank_pools(&pool, &tags, &res.embeddings, &cfg.ranker);
    report.generated = ranked(ranked_pools.generated);
    report.retrieved = ranked(ranked_pools.retrieved);
    report.merged = ranked(ranked_pools.merged);

    if let Some(caption) = context.caption.as_deref() {
        let mut baseline = ambiguous_baseline(&tokenize(caption), &vocab, &res.fwd)?;
        score_candidates(&mut baseline, &tags, cfg.ranker.tag_weight);
        baseline.sort_by(Candidate::rank_cmp);
        report.ambiguous = ranked(baseline);
    }
    Ok(report)
}

/// Runs one context. Failures are reported inline with status `error`.
pub fn run_context(context: &ContextSpec, res: &Resources, cfg: &PipelineConfig) -> ContextReport {
    run_context_inner(context, res, cfg).unwrap_or_else(|e| {
        let mut r = ContextReport::empty(&context.context_id, ContextStatus::Error);
        r.error = Some(e.to_string());
        r
    })
}

pub fn run_pipeline(contexts: &[ContextSpec], res: &Resources, cfg: &PipelineConfig) -> Report {
    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        contexts: contexts.iter().map(|c| run_context(c, res, cfg)).collect(),
    }
}

/// Candidate pools handed from `generate`/`retrieve` to `rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolFile {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub contexts: Vec<ContextPool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPool {
    pub context_id: String,
    pub status: ContextStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub tags: Vec<TagEntry>,
    pub pun_vocabulary: BTreeMap<String, BTreeSet<String>>,
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Generated,
    Retrieved,
}

fn pool_context(
    context: &ContextSpec,
    res: &Resources,
    cfg: &PipelineConfig,
    kind: PoolKind,
) -> Result<ContextPool, PipelineError> {
    let (tags, vocab) = prepare_context(context, res, cfg)?;
    let mut out = ContextPool {
        context_id: context.context_id.clone(),
        status: ContextStatus::Ok,
        error: None,
        tags: tag_entries(&tags),
        pun_vocabulary: vocab.entries.clone(),
        candidates: Vec::new(),
        warnings: Vec::new(),
    };
    if vocab.is_empty() {
        out.status = ContextStatus::NoPuns;
        return Ok(out);
    }
    match kind {
        PoolKind::Generated => {
            let rev = res.rev.as_ref().ok_or(PipelineError::MissingPath("reverse language model"))?;
            let pool = generate_pool(&res.fwd, rev, &vocab, &cfg.generator)?;
            out.candidates = pool.candidates;
            out.warnings = pool.warnings;
        }
        PoolKind::Retrieved => {
            let index = res.index.as_ref().ok_or(PipelineError::MissingPath("corpus index"))?;
            out.candidates = retrieve(index, &vocab, &tags, &res.fwd)?;
        }
    }
    Ok(out)
}

/// Builds candidate pools for every context without ranking them.
pub fn build_pools(
    contexts: &[ContextSpec],
    res: &Resources,
    cfg: &PipelineConfig,
    kind: PoolKind,
) -> PoolFile {
    PoolFile {
        schema_version: POOL_SCHEMA_VERSION,
        config: cfg.clone(),
        contexts: contexts
            .iter()
            .map(|context| {
                pool_context(context, res, cfg, kind).unwrap_or_else(|e| ContextPool {
                    context_id: context.context_id.clone(),
                    status: ContextStatus::Error,
                    error: Some(e.to_string()),
                    tags: Vec::new(),
                    pun_vocabulary: BTreeMap::new(),
                    candidates: Vec::new(),
                    warnings: Vec::new(),
                })
            })
            .collect(),
    }
}

/// Ranks previously built pools using the tags recorded in them.
pub fn rank_pool_file(pools: &PoolFile, emb: &EmbeddingTable, cfg: &PipelineConfig) -> Report {
    let contexts = pools
        .contexts
        .iter()
        .map(|p| {
            let mut report = ContextReport::empty(&p.context_id, p.status);
            report.error = p.error.clone();
            report.tags = p.tags.clone();
            report.pun_vocabulary = p.pun_vocabulary.clone();
            report.warnings = p.warnings.clone();
            report.pool_sizes = PoolSizes {
                generated: p.candidates.iter().filter(|c| c.method.is_generated()).count(),
                retrieved: p
                    .candidates
                    .iter()
                    .filter(|c| c.method == crate::candidate::Method::Retrieved)
                    .count(),
            };
            let tags = tag_set_from_entries(&p.tags);
            let ranked_pools = rank_pools(&p.candidates, &tags, emb, &cfg.ranker);
            report.generated = ranked(ranked_pools.generated);
            report.retrieved = ranked(ranked_pools.retrieved);
            report.merged = ranked(ranked_pools.merged);
            report
        })
        .collect();
    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        contexts,
    }
}
