//! Effective configuration: command-line flags over config file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

use punster::pipeline::PipelineConfig;

#[derive(Args, Debug, Default, Clone)]
pub struct ConfigFlags {
    /// Pun list TSV written by `mine-puns`
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub lm_forward: Option<PathBuf>,
    #[arg(long)]
    pub lm_reverse: Option<PathBuf>,
    /// Corpus index written by `index-corpus`
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Word vectors in word2vec text format
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Stopword list, one word per line (bundled English list by default)
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    /// Number of supplied tags kept per context
    #[arg(long)]
    pub max_supplied_tags: Option<usize>,
    /// Counterpart is forced at positions 1..=T from each end
    #[arg(long = "max-position", short = 'T')]
    pub max_position: Option<usize>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Keep only the best beam per forced slot
    #[arg(long)]
    pub best_beam_only: bool,
    /// Rank beam hypotheses by per-token log-probability
    #[arg(long)]
    pub length_normalize: bool,

    /// Sentences with this many tokens or more are not indexed
    #[arg(long)]
    pub max_words: Option<usize>,

    #[arg(long)]
    pub nms_threshold: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Weight of the tag-coverage bonus
    #[arg(long)]
    pub tag_weight: Option<f64>,
    /// Rank generated and retrieved candidates in one pool
    #[arg(long)]
    pub merged: bool,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

/// Reads a TOML config file. Relative paths inside it are taken relative to
/// the file's directory.
pub fn load_config_file(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut cfg: PipelineConfig =
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let p = &mut cfg.paths;
    for field in [
        &mut p.lexicon,
        &mut p.lm_forward,
        &mut p.lm_reverse,
        &mut p.index,
        &mut p.embeddings,
        &mut p.stopwords,
    ] {
        resolve(base, field);
    }
    Ok(cfg)
}

pub fn effective_config(file: Option<&Path>, flags: &ConfigFlags) -> Result<PipelineConfig> {
    let mut cfg = match file {
        Some(p) => load_config_file(p)?,
        None => PipelineConfig::default(),
    };
    apply_flags(&mut cfg, flags);
    cfg.validate()?;
    Ok(cfg)
}

fn apply_flags(cfg: &mut PipelineConfig, f: &ConfigFlags) {
    fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
        if let Some(v) = src {
            *dst = v.clone();
        }
    }
    fn set_path(dst: &mut Option<PathBuf>, src: &Option<PathBuf>) {
        if src.is_some() {
            dst.clone_from(src);
        }
    }
    let p = &mut cfg.paths;
    set_path(&mut p.lexicon, &f.lexicon);
    set_path(&mut p.lm_forward, &f.lm_forward);
    set_path(&mut p.lm_reverse, &f.lm_reverse);
    set_path(&mut p.index, &f.index);
    set_path(&mut p.embeddings, &f.embeddings);
    set_path(&mut p.stopwords, &f.stopwords);

    set(&mut cfg.max_supplied_tags, &f.max_supplied_tags);
    let g = &mut cfg.generator;
    set(&mut g.max_position, &f.max_position);
    set(&mut g.beam_size, &f.beam_size);
    set(&mut g.max_len, &f.max_len);
    set(&mut g.min_len, &f.min_len);
    if f.best_beam_only {
        g.keep_all_beams = false;
    }
    if f.length_normalize {
        g.length_normalize = true;
    }
    set(&mut cfg.retriever.max_words, &f.max_words);
    let r = &mut cfg.ranker;
    set(&mut r.nms_threshold, &f.nms_threshold);
    set(&mut r.top_k, &f.top_k);
    set(&mut r.tag_weight, &f.tag_weight);
    if f.merged {
        r.merged = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("punster.toml");
        std::fs::write(
            &path,
            "[paths]\nlexicon = \"puns.tsv\"\n[generator]\nbeam_size = 4\nmax_len = 12\n[ranker]\ntop_k = 5\n",
        )
        .unwrap();
        let flags = ConfigFlags {
            top_k: Some(2),
            ..Default::default()
        };
        let cfg = effective_config(Some(&path), &flags).unwrap();
        assert_eq!(cfg.paths.lexicon.as_deref(), Some(dir.path().join("puns.tsv").as_path()));
        assert_eq!(cfg.generator.beam_size, 4);
        assert_eq!(cfg.generator.max_len, 12);
        assert_eq!(cfg.generator.max_position, 5);
        assert_eq!(cfg.ranker.top_k, 2);
        assert_eq!(cfg.ranker.nms_threshold, 0.8);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let flags = ConfigFlags {
            nms_threshold: Some(0.0),
            ..Default::default()
        };
        assert!(effective_config(None, &flags).is_err());
    }
}
