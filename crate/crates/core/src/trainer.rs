//! Online minibatch training: learning-rate schedule, stochastic M-step
//! blending, multi-pass orchestration, progress reporting, and checkpoints.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_holdout, Document, MultiCorpus};
use crate::error::{Error, Result};
use crate::inference::{
    elbo_minibatch, e_step_cached, EStepCache, EStepOptions, GammaAverage, ModelState, SuffStats,
};
use crate::matrix_io;

/// Version stamped into checkpoint metadata.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Training configuration. `alpha`/`eta` left unset resolve to 1/K and 0.01
/// per category.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub k: usize,
    pub alpha: Option<f64>,
    pub eta: Option<Vec<f64>>,
    pub tau0: f64,
    pub kappa: f64,
    pub batch_size: usize,
    pub passes: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    /// Save a checkpoint every this many steps (0 = only on demand).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// When positive, this fraction of token occurrences is held out for
    /// per-pass validation perplexity; training runs on the remainder.
    pub eval_fraction: f64,
    pub gamma_avg: GammaAverage,
    /// Independent training runs with derived seeds; the best run wins by
    /// validation perplexity (with an eval split) or final-pass ELBO.
    /// Online VI is init-sensitive: with few topics a run can merge two true
    /// topics and starve one, and restarts recover that reliably.
    pub restarts: usize,
}

impl TrainConfig {
    pub fn new(k: usize) -> Self {
        TrainConfig {
            k,
            alpha: None,
            eta: None,
            tau0: 256.0,
            kappa: 0.7,
            batch_size: 1024,
            passes: 1,
            seed: 42,
            tol: 1e-3,
            max_iters: 100,
            checkpoint_every: 0,
            checkpoint_dir: None,
            eval_fraction: 0.0,
            gamma_avg: GammaAverage::AllCategories,
            restarts: 1,
        }
    }

    pub fn validate(&self, num_categories: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return Err(Error::invalid(format!(
                "kappa must lie in (0.5, 1], got {}",
                self.kappa
            )));
        }
        if !(self.tau0 >= 0.0) {
            return Err(Error::invalid("tau0 must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.passes == 0 {
            return Err(Error::invalid("passes must be at least 1"));
        }
        if !(self.eval_fraction >= 0.0 && self.eval_fraction < 1.0) {
            return Err(Error::invalid("eval_fraction must lie in [0, 1)"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if let Some(eta) = &self.eta {
            if eta.len() != num_categories {
                return Err(Error::ShapeMismatch(format!(
                    "{} eta values for {} categories",
                    eta.len(),
                    num_categories
                )));
            }
            if eta.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::invalid("eta entries must be positive"));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::invalid("alpha must be positive"));
            }
        }
        Ok(())
    }

    fn resolved_alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.k as f64)
    }

    fn resolved_eta(&self, num_categories: usize) -> Vec<f64> {
        self.eta.clone().unwrap_or_else(|| vec![0.01; num_categories])
    }
}

/// One row of the per-step progress report.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: u64,
    pub rho: f64,
    pub elbo: f64,
    pub docs_per_sec: f64,
}

/// Per-pass summary; validation perplexity is present when `eval_fraction`
/// was positive.
#[derive(Debug, Clone)]
pub struct PassRecord {
    pub pass: usize,
    pub validation_perplexity: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub passes: Vec<PassRecord>,
    pub skipped_documents: usize,
}

impl TrainReport {
    /// `step<TAB>rho<TAB>elbo<TAB>docs_per_sec` rows.
    pub fn write_tsv(&self, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
        for s in &self.steps {
            writeln!(w, "{}\t{:.6e}\t{:.6e}\t{:.1}", s.step, s.rho, s.elbo, s.docs_per_sec)?;
        }
        Ok(())
    }
}

/// ρ_t = (τ0 + step)^(−κ). Requires τ0 + step ≥ 1 so that ρ ≤ 1.
pub fn learning_rate(step: u64, tau0: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.5 && kappa <= 1.0) {
        return Err(Error::invalid(format!("kappa must lie in (0.5, 1], got {kappa}")));
    }
    let base = tau0 + step as f64;
    if base < 1.0 {
        return Err(Error::invalid(format!(
            "tau0 + step must be at least 1 (tau0={tau0}, step={step})"
        )));
    }
    Ok(base.powf(-kappa))
}

/// Dense per-category accumulator for minibatch sufficient statistics.
#[derive(Debug, Clone)]
pub struct BatchStats {
    cats: Vec<Array2<f64>>,
    pub docs: usize,
}

impl BatchStats {
    pub fn zeros_like(model: &ModelState) -> Self {
        BatchStats {
            cats: model.lambda.iter().map(|l| Array2::zeros(l.dim())).collect(),
            docs: 0,
        }
    }

    /// Merge one document's statistics; callers add documents in batch order
    /// so the reduction order is fixed.
    pub fn add(&mut self, stats: &SuffStats) {
        for (acc, (tokens, values)) in self.cats.iter_mut().zip(&stats.cats) {
            for (i, &w) in tokens.iter().enumerate() {
                for k in 0..values.ncols() {
                    acc[[k, w as usize]] += values[[i, k]];
                }
            }
        }
        self.docs += 1;
    }

    pub fn category(&self, t: usize) -> &Array2<f64> {
        &self.cats[t]
    }
}

/// Stochastic M-step: λ ← (1−ρ)·λ + ρ·(η + (D/|batch|)·s), then advance the
/// step counter. Every λ entry stays positive (convex blend of positives).
pub fn m_step(model: &mut ModelState, stats: &BatchStats, batch_size: usize, rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if stats.cats.len() != model.lambda.len() {
        return Err(Error::ShapeMismatch(format!(
            "stats cover {} categories, model has {}",
            stats.cats.len(),
            model.lambda.len()
        )));
    }
    let scale = model.d_total as f64 / batch_size as f64;
    for ((lambda, stat), &eta) in model.lambda.iter_mut().zip(&stats.cats).zip(&model.eta) {
        if lambda.dim() != stat.dim() {
            return Err(Error::ShapeMismatch(format!(
                "stats shape {:?} does not match lambda shape {:?}",
                stat.dim(),
                lambda.dim()
            )));
        }
        ndarray::Zip::from(lambda).and(stat).for_each(|l, &s| {
            *l = (1.0 - rho) * *l + rho * (eta + scale * s);
        });
    }
    model.step += 1;
    Ok(())
}

/// Seeded λ initialization: elementwise Gamma(100, 0.01) noise (mean 1) plus
/// the category's η. Symmetric init would make all topics identical; the
/// noise breaks the tie reproducibly.
pub fn init_model(corpus: &MultiCorpus, cfg: &TrainConfig, d_total: u64) -> Result<ModelState> {
    cfg.validate(corpus.num_categories())?;
    let eta = cfg.resolved_eta(corpus.num_categories());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let gamma = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
    let mut lambda = Vec::with_capacity(corpus.num_categories());
    for (vocab, &e) in corpus.vocabularies().iter().zip(&eta) {
        let mut l = Array2::zeros((cfg.k, vocab.len()));
        for v in l.iter_mut() {
            *v = gamma.sample(&mut rng) + e;
        }
        lambda.push(l);
    }
    Ok(ModelState {
        k: cfg.k,
        alpha: cfg.resolved_alpha(),
        eta,
        tau0: cfg.tau0,
        kappa: cfg.kappa,
        step: 0,
        d_total,
        seed: cfg.seed,
        category_names: corpus.vocabularies().iter().map(|v| v.category().to_string()).collect(),
        lambda,
    })
}

/// Run online variational training over the corpus.
///
/// Each pass shuffles document order under the seed, consumes minibatches,
/// runs E-steps concurrently against an immutable snapshot, and blends the
/// M-step with ρ_t. Documents with no tokens are skipped and counted.
/// Results are bitwise reproducible for a fixed seed regardless of thread
/// count: per-document statistics are reduced in batch order.
///
/// With `restarts > 1`, the run repeats under seeds `seed`, `seed+1`, ... and
/// the candidate with the best score (validation perplexity when
/// `eval_fraction > 0`, otherwise mean final-pass ELBO) is returned.
pub fn train_online(corpus: &MultiCorpus, cfg: &TrainConfig) -> Result<(ModelState, TrainReport)> {
    cfg.validate(corpus.num_categories())?;
    if cfg.restarts <= 1 {
        return train_once(corpus, cfg);
    }
    let mut best: Option<(f64, u64, ModelState, TrainReport)> = None;
    for r in 0..cfg.restarts {
        let mut candidate_cfg = cfg.clone();
        candidate_cfg.seed = cfg.seed.wrapping_add(r as u64);
        candidate_cfg.checkpoint_dir = None;
        let (model, report) = train_once(corpus, &candidate_cfg)?;
        let score = restart_score(&report);
        eprintln!(
            "trainer: restart {r} (seed {}) score {score:.6}",
            candidate_cfg.seed
        );
        if best.as_ref().map_or(true, |(s, ..)| score < *s) {
            best = Some((score, candidate_cfg.seed, model, report));
        }
    }
    let (_, seed, model, report) = best.expect("restarts >= 1");
    if cfg.checkpoint_every > 0 && cfg.checkpoint_dir.is_some() {
        // replay the winner so mid-training checkpoints land on disk
        let mut winner_cfg = cfg.clone();
        winner_cfg.seed = seed;
        winner_cfg.restarts = 1;
        return train_once(corpus, &winner_cfg);
    }
    Ok((model, report))
}

/// Lower-is-better selection score for a finished run.
fn restart_score(report: &TrainReport) -> f64 {
    if let Some(p) = report.passes.last().and_then(|p| p.validation_perplexity) {
        return p;
    }
    let passes = report.passes.len().max(1);
    let per_pass = (report.steps.len() / passes).max(1);
    let tail = &report.steps[report.steps.len().saturating_sub(per_pass)..];
    -(tail.iter().map(|s| s.elbo).sum::<f64>() / tail.len() as f64)
}

fn train_once(corpus: &MultiCorpus, cfg: &TrainConfig) -> Result<(ModelState, TrainReport)> {
    let mut report = TrainReport::default();

    let (train_corpus, eval_pair) = if cfg.eval_fraction > 0.0 {
        let in_memory = corpus.into_memory()?;
        let (observed, held) = split_holdout(&in_memory, cfg.eval_fraction, eval_split_seed(cfg.seed))?;
        (observed.clone(), Some((observed, held)))
    } else {
        (corpus.clone(), None)
    };

    let all_docs = train_corpus.collect()?;
    let total_docs = all_docs.len();
    let docs: Vec<Document> = all_docs.into_iter().filter(|d| !d.is_empty()).collect();
    report.skipped_documents = total_docs - docs.len();
    if report.skipped_documents > 0 {
        eprintln!(
            "trainer: skipping {} documents with no tokens",
            report.skipped_documents
        );
    }
    if docs.is_empty() {
        return Err(Error::invalid("corpus has no non-empty documents to train on"));
    }
    let d_total = docs.len() as u64;

    let mut model = init_model(&train_corpus, cfg, d_total)?;
    let opts = EStepOptions {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        gamma_avg: cfg.gamma_avg,
    };

    for pass in 0..cfg.passes {
        let mut order: Vec<usize> = (0..docs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1 + pass as u64);
        order.shuffle(&mut rng);

        for chunk in order.chunks(cfg.batch_size) {
            let started = Instant::now();
            let cache = EStepCache::new(&model)?;
            let outputs: Vec<_> = chunk
                .par_iter()
                .map(|&i| e_step_cached(&docs[i], &model, &cache, &opts))
                .collect::<Result<_>>()?;

            let mut stats = BatchStats::zeros_like(&model);
            for out in &outputs {
                stats.add(&out.stats);
            }
            let batch: Vec<_> = chunk
                .iter()
                .zip(&outputs)
                .map(|(&i, out)| (&docs[i], &out.posterior, &out.phi))
                .collect();
            let elbo = elbo_minibatch(&batch, &model)?;

            let rho = learning_rate(model.step, cfg.tau0, cfg.kappa)?;
            m_step(&mut model, &stats, chunk.len(), rho)?;

            let elapsed = started.elapsed().as_secs_f64();
            report.steps.push(StepRecord {
                step: model.step,
                rho,
                elbo,
                docs_per_sec: chunk.len() as f64 / elapsed.max(1e-9),
            });
            if cfg.checkpoint_every > 0 && model.step % cfg.checkpoint_every as u64 == 0 {
                if let Some(dir) = &cfg.checkpoint_dir {
                    save_checkpoint(&model, dir)?;
                }
            }
        }

        let validation_perplexity = match &eval_pair {
            Some((observed, held)) => {
                let result = crate::evaluation::held_out_perplexity(&model, observed, held, &opts)?;
                Some(result.combined)
            }
            None => None,
        };
        report.passes.push(PassRecord {
            pass,
            validation_perplexity,
        });
    }

    Ok((model, report))
}

fn eval_split_seed(seed: u64) -> u64 {
    // Fixed offset keeps the validation split independent of the shuffle and
    // init streams.
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    format_version: u32,
    k: usize,
    t: usize,
    category_names: Vec<String>,
    vocab_sizes: Vec<usize>,
    alpha: f64,
    eta: Vec<f64>,
    tau0: f64,
    kappa: f64,
    step: u64,
    d_total: u64,
    seed: u64,
}

/// Write `meta.json` plus one `lambda_<category>.bin` matrix per category.
pub fn save_checkpoint(model: &ModelState, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_FORMAT_VERSION,
        k: model.k,
        t: model.lambda.len(),
        category_names: model.category_names.clone(),
        vocab_sizes: model.vocab_sizes(),
        alpha: model.alpha,
        eta: model.eta.clone(),
        tau0: model.tau0,
        kappa: model.kappa,
        step: model.step,
        d_total: model.d_total,
        seed: model.seed,
    };
    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;
    for (name, lambda) in model.category_names.iter().zip(&model.lambda) {
        matrix_io::write_matrix(dir.join(format!("lambda_{name}.bin")), lambda)?;
    }
    Ok(())
}

/// Load a checkpoint written by [`save_checkpoint`], verifying shapes.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<ModelState> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let raw = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&raw).map_err(|e| Error::Checkpoint {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    if meta.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Checkpoint {
            path: meta_path.clone(),
            message: format!(
                "format version {} not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                meta.format_version
            ),
        });
    }
    if meta.category_names.len() != meta.t || meta.vocab_sizes.len() != meta.t || meta.eta.len() != meta.t {
        return Err(Error::Checkpoint {
            path: meta_path,
            message: "inconsistent category metadata".into(),
        });
    }
    let mut lambda = Vec::with_capacity(meta.t);
    for (name, &v) in meta.category_names.iter().zip(&meta.vocab_sizes) {
        let path = dir.join(format!("lambda_{name}.bin"));
        let m = matrix_io::read_matrix(&path)?;
        if m.dim() != (meta.k, v) {
            return Err(Error::Checkpoint {
                path,
                message: format!("matrix is {:?}, metadata says ({}, {v})", m.dim(), meta.k),
            });
        }
        lambda.push(m);
    }
    let model = ModelState {
        k: meta.k,
        alpha: meta.alpha,
        eta: meta.eta,
        tau0: meta.tau0,
        kappa: meta.kappa,
        step: meta.step,
        d_total: meta.d_total,
        seed: meta.seed,
        category_names: meta.category_names,
        lambda,
    };
    model.validate()?;
    Ok(model)
}
