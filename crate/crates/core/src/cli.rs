//! The `polylda` command line: synth, train, infer, topics, perplexity,
//! sweep, similarity, and cohorts subcommands over the library pipeline.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    code_topic_vectors, cohort_report, export_cohorts, export_groups, export_loadings,
    export_similarity, export_topics, group_codes, infer_loadings, similarity_matrix, topic_report,
    CodeVectorMode,
};
use crate::corpus::{load_cohorts, MultiCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::evaluation::{held_out_perplexity, topic_sweep, write_perplexity_tsv, write_sweep_tsv};
use crate::inference::{EStepOptions, GammaAverage, ModelState};
use crate::synth::{
    generate_corpus, generate_model, plant_cohorts, plant_synonyms, save_bundle, DocLength,
};
use crate::trainer::{load_checkpoint, save_checkpoint, train_online, TrainConfig};

pub const VERSION_STRING: &str = concat!(env!("CARGO_PKG_VERSION"), " (checkpoint format 1)");

#[derive(Parser, Debug)]
#[command(name = "polylda", version = VERSION_STRING)]
#[command(about = "Online multi-category topic modeling for coded event data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// RNG seed for anything stochastic
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: one per core)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Reproducibility mode; implies --threads 1 unless --threads is given
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Suppress progress output on stderr
    #[arg(long, global = true)]
    pub quiet: bool,
    /// TOML config file; command-line flags win over its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus with a persisted ground-truth bundle
    Synth(SynthArgs),
    /// Train a model with online minibatch updates
    Train(TrainArgs),
    /// Infer per-document topic loadings from a checkpoint
    Infer(InferArgs),
    /// Report the top codes per topic per category
    Topics(TopicsArgs),
    /// Held-out perplexity by document completion
    Perplexity(PerplexityArgs),
    /// Train and evaluate across several topic counts
    Sweep(SweepArgs),
    /// Code-similarity matrix and threshold grouping for one category
    Similarity(SimilarityArgs),
    /// Per-cohort topic loading distributions
    Cohorts(CohortsArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of topics
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of data categories
    #[arg(long)]
    pub cats: Option<usize>,
    /// Category names, comma separated (default c0,c1,...)
    #[arg(long, value_delimiter = ',')]
    pub cat_names: Option<Vec<String>>,
    /// Vocabulary size per category, comma separated
    #[arg(long, value_delimiter = ',')]
    pub vocab: Option<Vec<usize>>,
    /// Document count
    #[arg(long)]
    pub docs: Option<usize>,
    /// Tokens per category per document (one value, or one per category)
    #[arg(long, value_delimiter = ',')]
    pub len: Option<Vec<u32>>,
    /// Draw document lengths from Poisson distributions with --len as means
    #[arg(long)]
    pub poisson_len: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Word prior per category (one value, or one per category)
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    /// Plant this many synonym code pairs
    #[arg(long)]
    pub synonym_pairs: Option<usize>,
    /// Category name receiving the planted pairs (default: first category)
    #[arg(long)]
    pub synonym_category: Option<String>,
    /// Multiplicative noise bound for planted pairs
    #[arg(long)]
    pub synonym_eps: Option<f64>,
    /// Planted cohort as name:topic; repeatable
    #[arg(long = "cohort")]
    pub cohorts: Vec<String>,
    /// Documents per planted cohort
    #[arg(long)]
    pub cohort_docs: Option<usize>,
    /// Mixture weight pinned to each cohort's topic
    #[arg(long)]
    pub cohort_boost: Option<f64>,
    /// Output directory for the corpus and ground-truth bundle
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Word prior per category (one value, or one per category)
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub passes: Option<usize>,
    /// E-step convergence tolerance (mean |Δγ| per topic)
    #[arg(long)]
    pub tol: Option<f64>,
    /// E-step iteration cap per document
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// How the γ update divides category sums: literal (all categories) or
    /// per-present (nonempty only)
    #[arg(long, value_parser = parse_gamma_avg)]
    pub gamma_avg: Option<GammaAverage>,
    /// Independent seeded training runs; the best by validation perplexity
    /// (or final-pass ELBO) wins
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus JSONL path
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory holding vocab_<category>.tsv files
    #[arg(long)]
    pub vocab_dir: PathBuf,
    /// Category order (default: alphabetical by name)
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<String>>,
    /// Validate the whole corpus before training
    #[arg(long)]
    pub validate: bool,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Save a checkpoint every this many steps
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Hold out this fraction of tokens for per-pass validation perplexity
    #[arg(long)]
    pub eval_fraction: Option<f64>,
    /// Write the per-step report TSV here instead of stdout
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Checkpoint output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Checkpoint directory
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus JSONL path
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Loadings TSV output path (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TopicsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory holding vocab_<category>.tsv files
    #[arg(long)]
    pub vocab_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Topics TSV output path (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PerplexityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Fraction of token occurrences held out
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Perplexity TSV output path (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<String>>,
    /// Topic counts to sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    pub ks: Vec<usize>,
    /// Fraction of token occurrences held out for validation
    #[arg(long, default_value_t = 0.2)]
    pub ratio: f64,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Sweep TSV output path (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory holding vocab_<category>.tsv files
    #[arg(long)]
    pub vocab_dir: PathBuf,
    /// Category to analyze, by name
    #[arg(long)]
    pub category: String,
    /// Single-linkage grouping threshold on cosine similarity
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    /// Code-vector construction: uniform or weighted topic prior
    #[arg(long, value_parser = parse_code_vector, default_value = "uniform")]
    pub code_vector: CodeVectorMode,
    /// Similarity CSV output path
    #[arg(long)]
    pub out: PathBuf,
    /// Groups TSV output path
    #[arg(long)]
    pub groups_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CohortsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Cohort TSV path (doc_id<TAB>cohort_name)
    #[arg(long)]
    pub cohorts: PathBuf,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Cohort report TSV output path (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_gamma_avg(s: &str) -> std::result::Result<GammaAverage, String> {
    match s {
        "literal" => Ok(GammaAverage::AllCategories),
        "per-present" => Ok(GammaAverage::PresentCategories),
        other => Err(format!("expected 'literal' or 'per-present', got {other:?}")),
    }
}

fn parse_code_vector(s: &str) -> std::result::Result<CodeVectorMode, String> {
    match s {
        "uniform" => Ok(CodeVectorMode::Uniform),
        "weighted" => Ok(CodeVectorMode::Weighted),
        other => Err(format!("expected 'uniform' or 'weighted', got {other:?}")),
    }
}

/// Values from `--config`, consulted for flags the command line left unset.
struct FileConfig(toml::Table);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                raw.parse::<toml::Table>().map_err(|e| Error::Parse {
                    path: p.into(),
                    line: 0,
                    message: e.to_string(),
                })?
            }
        };
        Ok(FileConfig(table))
    }

    fn value(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.0
            .get(section)
            .and_then(|v| v.as_table())
            .and_then(|t| t.get(key))
            .or_else(|| self.0.get(key))
    }

    fn f64(&self, section: &str, key: &str) -> Option<f64> {
        self.value(section, key).and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
    }

    fn usize(&self, section: &str, key: &str) -> Option<usize> {
        self.value(section, key).and_then(|v| v.as_integer()).map(|i| i as usize)
    }

    fn u64(&self, section: &str, key: &str) -> Option<u64> {
        self.value(section, key).and_then(|v| v.as_integer()).map(|i| i as u64)
    }

    fn f64_list(&self, section: &str, key: &str) -> Option<Vec<f64>> {
        self.value(section, key).and_then(|v| v.as_array()).map(|a| {
            a.iter()
                .filter_map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
                .collect()
        })
    }
}

/// Parse argv and run; returns the process exit code (0 ok, 1 validation or
/// usage, 2 I/O).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: {message}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let threads = cli
        .global
        .threads
        .or(if cli.global.deterministic { Some(1) } else { None });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    let config = FileConfig::load(cli.global.config.as_deref())?;
    let seed = cli.global.seed.or_else(|| config.u64("global", "seed")).unwrap_or(42);
    let quiet = cli.global.quiet;
    match cli.command {
        Command::Synth(args) => cmd_synth(args, seed, quiet, &config),
        Command::Train(args) => cmd_train(args, seed, quiet, &config),
        Command::Infer(args) => cmd_infer(args, &config),
        Command::Topics(args) => cmd_topics(args),
        Command::Perplexity(args) => cmd_perplexity(args, seed, &config),
        Command::Sweep(args) => cmd_sweep(args, seed, quiet, &config),
        Command::Similarity(args) => cmd_similarity(args),
        Command::Cohorts(args) => cmd_cohorts(args, &config),
    }
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
            }
            let file = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w).map_err(|e| Error::io(p, e))?;
            w.flush().map_err(|e| Error::io(p, e))
        }
    }
}

/// Load `vocab_*.tsv` files from a directory; `order` pins the category
/// sequence, otherwise names sort alphabetically.
pub fn load_vocab_dir(dir: &Path, order: Option<&[String]>) -> Result<Vec<Vocabulary>> {
    let mut found: Vec<(String, PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_prefix("vocab_").and_then(|s| s.strip_suffix(".tsv")) {
            found.push((stem.to_string(), entry.path()));
        }
    }
    if found.is_empty() {
        return Err(Error::invalid(format!(
            "no vocab_<category>.tsv files found in {}",
            dir.display()
        )));
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    let picked: Vec<(String, PathBuf)> = match order {
        None => found,
        Some(names) => names
            .iter()
            .map(|n| {
                found
                    .iter()
                    .find(|(name, _)| name == n)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("no vocab_{n}.tsv in {}", dir.display())))
            })
            .collect::<Result<_>>()?,
    };
    picked
        .into_iter()
        .map(|(name, path)| Vocabulary::load(path, name))
        .collect()
}

/// Vocabularies matching a checkpoint's categories when the real code lists
/// are not needed (loadings, perplexity, cohorts): codes are the token ids.
fn placeholder_vocabs(model: &ModelState) -> Vec<Vocabulary> {
    model
        .category_names
        .iter()
        .zip(model.vocab_sizes())
        .map(|(name, v)| {
            let entries = (0..v).map(|i| (i.to_string(), String::new())).collect();
            Vocabulary::new(name.clone(), entries).expect("ids are unique")
        })
        .collect()
}

/// Real vocabularies for a checkpoint, reordered to the checkpoint's
/// category order and shape-checked.
fn vocabs_for_model(model: &ModelState, dir: &Path) -> Result<Vec<Vocabulary>> {
    let vocabs = load_vocab_dir(dir, Some(&model.category_names))?;
    for (vocab, v) in vocabs.iter().zip(model.vocab_sizes()) {
        if vocab.len() != v {
            return Err(Error::ShapeMismatch(format!(
                "vocabulary {:?} has {} codes but the checkpoint expects {v}",
                vocab.category(),
                vocab.len()
            )));
        }
    }
    Ok(vocabs)
}

fn estep_options(tol: Option<f64>, max_iters: Option<usize>, config: &FileConfig, section: &str) -> EStepOptions {
    let defaults = EStepOptions::default();
    EStepOptions {
        tol: tol.or_else(|| config.f64(section, "tol")).unwrap_or(defaults.tol),
        max_iters: max_iters
            .or_else(|| config.usize(section, "max_iters"))
            .unwrap_or(defaults.max_iters),
        gamma_avg: defaults.gamma_avg,
    }
}

fn expand_per_category<T: Copy>(values: Vec<T>, t: usize, what: &str) -> Result<Vec<T>> {
    if values.len() == 1 {
        Ok(vec![values[0]; t])
    } else if values.len() == t {
        Ok(values)
    } else {
        Err(Error::invalid(format!(
            "{what}: expected 1 or {t} values, got {}",
            values.len()
        )))
    }
}

fn cmd_synth(args: SynthArgs, seed: u64, quiet: bool, config: &FileConfig) -> Result<()> {
    let k = args
        .k
        .or_else(|| config.usize("synth", "k"))
        .ok_or_else(|| Error::invalid("synth requires --k"))?;
    let vocab_sizes = args
        .vocab
        .ok_or_else(|| Error::invalid("synth requires --vocab sizes"))?;
    let cats = args.cats.unwrap_or(vocab_sizes.len());
    if cats != vocab_sizes.len() {
        return Err(Error::invalid(format!(
            "--cats {cats} does not match {} vocabulary sizes",
            vocab_sizes.len()
        )));
    }
    let names = match args.cat_names {
        Some(names) => {
            if names.len() != cats {
                return Err(Error::invalid(format!(
                    "--cat-names lists {} names for {cats} categories",
                    names.len()
                )));
            }
            names
        }
        None => (0..cats).map(|i| format!("c{i}")).collect(),
    };
    let docs = args
        .docs
        .or_else(|| config.usize("synth", "docs"))
        .ok_or_else(|| Error::invalid("synth requires --docs"))?;
    let alpha = args.alpha.or_else(|| config.f64("synth", "alpha")).unwrap_or(0.1);
    let eta = expand_per_category(
        args.eta.or_else(|| config.f64_list("synth", "eta")).unwrap_or(vec![0.05]),
        cats,
        "--eta",
    )?;
    let lens = expand_per_category(
        args.len.ok_or_else(|| Error::invalid("synth requires --len"))?,
        cats,
        "--len",
    )?;
    let doc_lengths: Vec<DocLength> = lens
        .iter()
        .map(|&n| {
            if args.poisson_len {
                DocLength::Poisson(n as f64)
            } else {
                DocLength::Fixed(n)
            }
        })
        .collect();

    let mut gt = generate_model(k, &vocab_sizes, alpha, &eta, names.clone(), seed)?;
    if let Some(pairs) = args.synonym_pairs {
        let cat_name = args.synonym_category.unwrap_or_else(|| names[0].clone());
        let cat = names
            .iter()
            .position(|n| *n == cat_name)
            .ok_or_else(|| Error::invalid(format!("unknown synonym category {cat_name:?}")))?;
        let eps = args.synonym_eps.unwrap_or(0.05);
        plant_synonyms(&mut gt, cat, pairs, eps, seed.wrapping_add(2))?;
    }
    let mut corpus = generate_corpus(&mut gt, docs, &doc_lengths, seed.wrapping_add(1))?;
    if !args.cohorts.is_empty() {
        let cohort_topics: Vec<(String, usize)> = args
            .cohorts
            .iter()
            .map(|spec| {
                let (name, topic) = spec.split_once(':').ok_or_else(|| {
                    Error::invalid(format!("cohort spec {spec:?} must be name:topic"))
                })?;
                let topic: usize = topic
                    .parse()
                    .map_err(|_| Error::invalid(format!("cohort spec {spec:?}: bad topic index")))?;
                Ok((name.to_string(), topic))
            })
            .collect::<Result<_>>()?;
        let per = args.cohort_docs.unwrap_or(100);
        let boost = args.cohort_boost.unwrap_or(0.8);
        corpus = plant_cohorts(&mut gt, &corpus, &cohort_topics, per, boost, seed.wrapping_add(3))?;
    }
    save_bundle(&gt, &corpus, &args.out)?;
    if !quiet {
        eprintln!(
            "synth: wrote {} documents over {} categories to {}",
            docs,
            cats,
            args.out.display()
        );
    }
    Ok(())
}

fn train_config_from(flags: &TrainFlags, t: usize, seed: u64, config: &FileConfig) -> Result<TrainConfig> {
    let k = flags
        .k
        .or_else(|| config.usize("train", "k"))
        .ok_or_else(|| Error::invalid("training requires --k"))?;
    let mut cfg = TrainConfig::new(k);
    cfg.seed = seed;
    cfg.alpha = flags.alpha.or_else(|| config.f64("train", "alpha"));
    cfg.eta = match flags.eta.clone().or_else(|| config.f64_list("train", "eta")) {
        Some(values) => Some(expand_per_category(values, t, "--eta")?),
        None => None,
    };
    if let Some(v) = flags.tau0.or_else(|| config.f64("train", "tau0")) {
        cfg.tau0 = v;
    }
    if let Some(v) = flags.kappa.or_else(|| config.f64("train", "kappa")) {
        cfg.kappa = v;
    }
    if let Some(v) = flags.batch_size.or_else(|| config.usize("train", "batch_size")) {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.passes.or_else(|| config.usize("train", "passes")) {
        cfg.passes = v;
    }
    if let Some(v) = flags.tol.or_else(|| config.f64("train", "tol")) {
        cfg.tol = v;
    }
    if let Some(v) = flags.max_iters.or_else(|| config.usize("train", "max_iters")) {
        cfg.max_iters = v;
    }
    if let Some(v) = flags.gamma_avg {
        cfg.gamma_avg = v;
    }
    if let Some(v) = flags.restarts.or_else(|| config.usize("train", "restarts")) {
        cfg.restarts = v;
    }
    Ok(cfg)
}

fn cmd_train(args: TrainArgs, seed: u64, quiet: bool, config: &FileConfig) -> Result<()> {
    let vocabs = load_vocab_dir(&args.vocab_dir, args.categories.as_deref())?;
    let corpus = MultiCorpus::open(&args.corpus, vocabs, args.validate)?;
    let mut cfg = train_config_from(&args.train, corpus.num_categories(), seed, config)?;
    if let Some(v) = args.checkpoint_every.or_else(|| config.usize("train", "checkpoint_every")) {
        cfg.checkpoint_every = v;
    }
    if let Some(v) = args.eval_fraction.or_else(|| config.f64("train", "eval_fraction")) {
        cfg.eval_fraction = v;
    }
    cfg.checkpoint_dir = Some(args.out.clone());
    let (model, report) = train_online(&corpus, &cfg)?;
    save_checkpoint(&model, &args.out)?;
    write_output(args.report.as_deref(), |w| report.write_tsv(w))?;
    if !quiet {
        for pass in &report.passes {
            match pass.validation_perplexity {
                Some(p) => eprintln!("pass {}: validation perplexity {p:.4}", pass.pass),
                None => eprintln!("pass {} complete", pass.pass),
            }
        }
        eprintln!(
            "train: {} steps, checkpoint in {}",
            model.step,
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_infer(args: InferArgs, config: &FileConfig) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let corpus = MultiCorpus::open(&args.corpus, placeholder_vocabs(&model), false)?;
    let opts = estep_options(args.tol, args.max_iters, config, "infer");
    let loadings = infer_loadings(&model, &corpus, &opts)?;
    write_output(args.out.as_deref(), |w| export_loadings(&loadings, w))
}

fn cmd_topics(args: TopicsArgs) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let vocabs = vocabs_for_model(&model, &args.vocab_dir)?;
    let report = topic_report(&model, &vocabs, args.top_n)?;
    write_output(args.out.as_deref(), |w| export_topics(&report, w))
}

fn cmd_perplexity(args: PerplexityArgs, seed: u64, config: &FileConfig) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let corpus = MultiCorpus::open(&args.corpus, placeholder_vocabs(&model), false)?;
    let in_memory = corpus.into_memory()?;
    let (observed, held) = crate::corpus::split_holdout(&in_memory, args.ratio, seed)?;
    let opts = estep_options(args.tol, args.max_iters, config, "perplexity");
    let result = held_out_perplexity(&model, &observed, &held, &opts)?;
    write_output(args.out.as_deref(), |w| write_perplexity_tsv(&result, w))
}

fn cmd_sweep(args: SweepArgs, seed: u64, quiet: bool, config: &FileConfig) -> Result<()> {
    if args.ks.is_empty() {
        return Err(Error::invalid("sweep requires --ks"));
    }
    let vocabs = load_vocab_dir(&args.vocab_dir, args.categories.as_deref())?;
    let corpus = MultiCorpus::open(&args.corpus, vocabs, false)?;
    let mut flags = args.train.clone();
    if flags.k.is_none() {
        flags.k = Some(args.ks[0]);
    }
    let template = train_config_from(&flags, corpus.num_categories(), seed, config)?;
    let sweep = topic_sweep(&corpus, &args.ks, &template, args.ratio, seed)?;
    write_output(args.out.as_deref(), |w| write_sweep_tsv(&sweep, w))?;
    if !quiet {
        eprintln!("sweep: best K = {}", sweep.best_k);
    }
    Ok(())
}

fn cmd_similarity(args: SimilarityArgs) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let vocabs = vocabs_for_model(&model, &args.vocab_dir)?;
    let category = model
        .category_names
        .iter()
        .position(|n| *n == args.category)
        .ok_or_else(|| Error::invalid(format!("model has no category named {:?}", args.category)))?;
    let vectors = code_topic_vectors(&model, category, &vocabs[category], args.code_vector)?;
    let mut sim = similarity_matrix(&vectors, args.category.clone())?;
    group_codes(&mut sim, args.threshold)?;
    write_output(Some(&args.out), |w| export_similarity(&sim, w))?;
    if let Some(groups_out) = &args.groups_out {
        write_output(Some(groups_out), |w| export_groups(&sim, &vocabs[category], w))?;
    }
    Ok(())
}

fn cmd_cohorts(args: CohortsArgs, config: &FileConfig) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let corpus = MultiCorpus::open(&args.corpus, placeholder_vocabs(&model), false)?;
    let assignments = load_cohorts(&args.cohorts)?;
    let opts = estep_options(args.tol, args.max_iters, config, "cohorts");
    let loadings = infer_loadings(&model, &corpus, &opts)?;
    let report = cohort_report(&loadings, &assignments)?;
    write_output(args.out.as_deref(), |w| export_cohorts(&report, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::CHECKPOINT_FORMAT_VERSION;
    use clap::CommandFactory;

    #[test]
    fn version_string_names_checkpoint_format() {
        assert!(VERSION_STRING.contains(&format!("checkpoint format {CHECKPOINT_FORMAT_VERSION}")));
        assert!(VERSION_STRING.contains(env!("CARGO_PKG_VERSION")));
    }

    #[test]
    fn cli_parses_the_documented_invocations() {
        Cli::try_parse_from([
            "polylda", "synth", "--k", "5", "--cats", "3", "--vocab", "50,30,40", "--docs", "2000",
            "--len", "50", "--seed", "7", "--out", "data/",
        ])
        .unwrap();
        Cli::try_parse_from([
            "polylda", "train", "--corpus", "data/corpus.jsonl", "--vocab-dir", "data/", "--k",
            "110", "--out", "ckpt/",
        ])
        .unwrap();
        Cli::try_parse_from([
            "polylda",
            "similarity",
            "--model",
            "ckpt/",
            "--vocab-dir",
            "data/",
            "--category",
            "lab",
            "--threshold",
            "0.8",
            "--out",
            "sim.csv",
            "--groups-out",
            "groups.tsv",
        ])
        .unwrap();
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["polylda", "train", "--nonsense", "x"]).is_err());
        Cli::command().debug_assert();
    }
}
