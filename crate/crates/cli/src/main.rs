mod config;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use punster::evalkit::{comparison_table, read_votes};
use punster::lm::{read_corpus, Direction, NGramModel, DEFAULT_MIN_COUNT, DEFAULT_ORDER};
use punster::phonetics::{mine_pun_pairs, parse_pronouncing_dict, parse_word_pairs, PairSource, PhonemeInventory};
use punster::pipeline::{self, build_pools, rank_pool_file, run_pipeline, Needs, PoolFile, PoolKind, Resources};
use punster::punvocab::parse_tags_file;
use punster::ranker::EmbeddingTable;
use punster::retriever::{ingest, RetrieverConfig, SplitMode};

use config::{effective_config, ConfigFlags};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "punster", version, about = "Generate and retrieve pun-bearing sentences for tagged contexts")]
struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mine heterographic homophones from a CMU-format dictionary
    MinePuns {
        #[arg(long)]
        dict: PathBuf,
        /// Extra word pairs, two tab-separated words per line
        #[arg(long)]
        external_pairs: Option<PathBuf>,
        /// Phoneme feature table replacing the bundled ARPAbet one
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a forward or reverse n-gram model on a one-sentence-per-line corpus
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
        direction: DirectionArg,
        #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
        min_count: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build the sentence index used for retrieval
    IndexCorpus {
        #[arg(long)]
        corpus: PathBuf,
        /// Treat every line as one sentence instead of splitting running text
        #[arg(long)]
        line_mode: bool,
        #[arg(long)]
        max_words: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build the generated candidate pool for each context
    Generate(StageArgs),
    /// Build the retrieved candidate pool for each context
    Retrieve(StageArgs),
    /// Rank candidate pools written by `generate` or `retrieve`
    Rank {
        #[arg(long, required = true, num_args = 1..)]
        pool: Vec<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every stage and write one report per context
    Pipeline(StageArgs),
    /// Recall@K tables from a votes CSV
    Eval {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct StageArgs {
    /// `context_id<TAB>tag,tag[<TAB>caption]` per line
    #[arg(long)]
    tags: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    Forward,
    Reverse,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Reverse => Direction::Reverse,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Text,
    Json,
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitClass<T> {
    fn data(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitClass<T> for Result<T, E> {
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_DATA,
            error: e.into(),
        })
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_INTERNAL,
            error: e.into(),
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn write_output(output: Option<&Path>, content: &[u8]) -> Result<()> {
    match output {
        Some(p) => {
            let mut w = BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            );
            w.write_all(content)?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(content)?,
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(output: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).internal()?;
    text.push('\n');
    write_output(output, text.as_bytes()).data()
}

fn mine_puns(
    dict: &Path,
    external: Option<&Path>,
    features: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let inventory = match features {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .data()?;
            PhonemeInventory::parse(&text).context("feature table").data()?
        }
        None => PhonemeInventory::arpabet(),
    };
    let parsed = parse_pronouncing_dict(open(dict).data()?, &inventory)
        .context("mine-puns: dictionary")
        .data()?;
    for e in parsed.errors.iter().take(20) {
        warn!("{}:{}: {}", dict.display(), e.line, e.reason);
    }
    let external = match external {
        Some(p) => parse_word_pairs(open(p).data()?).context("mine-puns: external pairs").data()?,
        None => Vec::new(),
    };
    let report = mine_pun_pairs(&parsed.entries, &external, &inventory)
        .context("mine-puns")
        .data()?;
    let lex = &report.lexicon;
    eprintln!(
        "entries={} malformed_lines={} pairs={} exact={} ar_metric={} words={} dropped_external={}",
        parsed.entries.len(),
        parsed.errors.len(),
        lex.len(),
        lex.count_by_source(PairSource::Exact),
        lex.count_by_source(PairSource::ArMetric),
        lex.word_count(),
        report.warnings.len()
    );
    write_output(output, lex.to_tsv().as_bytes()).data()
}

fn train_lm(corpus: &Path, order: usize, direction: Direction, min_count: usize, output: &Path) -> Result<(), Failure> {
    let sentences = read_corpus(open(corpus).data()?).context("train-lm: corpus").data()?;
    let model = NGramModel::train(&sentences, order, direction, min_count)
        .context("train-lm")
        .data()?;
    info!(
        "trained {direction} order-{order} model: {} sentences, vocab {}, {} contexts",
        sentences.len(),
        model.vocab().len(),
        model.context_count()
    );
    let file = File::create(output)
        .with_context(|| format!("cannot create {}", output.display()))
        .data()?;
    let mut w = BufWriter::new(file);
    model.save(&mut w).context("train-lm: save").data()?;
    w.flush().data()
}

fn index_corpus(corpus: &Path, line_mode: bool, cfg: &RetrieverConfig, output: &Path) -> Result<(), Failure> {
    let mode = if line_mode { SplitMode::Lines } else { SplitMode::Raw };
    let index = ingest(open(corpus).data()?, cfg, mode)
        .context("index-corpus")
        .data()?;
    info!(
        "indexed {} sentences, {} tokens, {} types",
        index.sentence_count(),
        index.token_count(),
        index.vocabulary_size()
    );
    let file = File::create(output)
        .with_context(|| format!("cannot create {}", output.display()))
        .data()?;
    let mut w = BufWriter::new(file);
    index.save(&mut w).context("index-corpus: save").data()?;
    w.flush().data()
}

fn stage(args: &StageArgs, global: Option<&Path>, kind: Option<PoolKind>) -> Result<(), Failure> {
    let cfg = effective_config(global, &args.flags).data()?;
    let contexts = parse_tags_file(open(&args.tags).data()?)
        .context("tags file")
        .data()?;
    let needs = match kind {
        Some(PoolKind::Generated) => Needs {
            reverse_model: true,
            index: false,
            embeddings: false,
        },
        Some(PoolKind::Retrieved) => Needs {
            reverse_model: false,
            index: true,
            embeddings: false,
        },
        None => Needs::ALL,
    };
    let res = Resources::load(&cfg.paths, needs).data()?;
    let output = args.output.as_deref();
    match kind {
        Some(kind) => write_json(output, &build_pools(&contexts, &res, &cfg, kind)),
        None => write_json(output, &run_pipeline(&contexts, &res, &cfg)),
    }
}

fn rank(pools: &[PathBuf], flags: &ConfigFlags, global: Option<&Path>, output: Option<&Path>) -> Result<(), Failure> {
    let cfg = effective_config(global, flags).data()?;
    let embeddings = match &cfg.paths.embeddings {
        Some(p) => pipeline::load_embedding_file(p).data()?,
        None => {
            warn!("no embeddings given; similarity falls back to token-count cosine");
            EmbeddingTable::empty()
        }
    };
    // several pool files (e.g. generated + retrieved) are merged per context
    let mut merged: Option<PoolFile> = None;
    for path in pools {
        let file: PoolFile = serde_json::from_reader(open(path).data()?)
            .with_context(|| format!("rank: cannot parse pool {}", path.display()))
            .data()?;
        match merged.as_mut() {
            None => merged = Some(file),
            Some(acc) => {
                for ctx in file.contexts {
                    match acc.contexts.iter_mut().find(|c| c.context_id == ctx.context_id) {
                        Some(existing) => {
                            existing.candidates.extend(ctx.candidates);
                            existing.warnings.extend(ctx.warnings);
                        }
                        None => acc.contexts.push(ctx),
                    }
                }
            }
        }
    }
    let pools = merged.expect("clap requires at least one pool");
    write_json(output, &rank_pool_file(&pools, &embeddings, &cfg))
}

fn eval(votes: &Path, k: u32, format: Format, output: Option<&Path>) -> Result<(), Failure> {
    let records = read_votes(open(votes).data()?).context("eval").data()?;
    let table = comparison_table(&records, k).context("eval").data()?;
    for w in &table.warnings {
        warn!("{w}");
    }
    match format {
        Format::Json => write_json(output, &table),
        Format::Text => write_output(output, table.to_text().as_bytes()).data(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let global = cli.config.as_deref();
    match cli.command {
        Command::MinePuns {
            dict,
            external_pairs,
            features,
            output,
        } => mine_puns(&dict, external_pairs.as_deref(), features.as_deref(), output.as_deref()),
        Command::TrainLm {
            corpus,
            order,
            direction,
            min_count,
            output,
        } => train_lm(&corpus, order, direction.into(), min_count, &output),
        Command::IndexCorpus {
            corpus,
            line_mode,
            max_words,
            output,
        } => {
            let mut cfg = effective_config(global, &ConfigFlags::default()).data()?.retriever;
            if let Some(m) = max_words {
                cfg.max_words = m;
            }
            index_corpus(&corpus, line_mode, &cfg, &output)
        }
        Command::Generate(args) => stage(&args, global, Some(PoolKind::Generated)),
        Command::Retrieve(args) => stage(&args, global, Some(PoolKind::Retrieved)),
        Command::Pipeline(args) => stage(&args, global, None),
        Command::Rank { pool, flags, output } => rank(&pool, &flags, global, output.as_deref()),
        Command::Eval {
            votes,
            k,
            format,
            output,
        } => eval(&votes, k, format, output.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
