//! Python extension module `_polylda`: the training, evaluation, and
//! analysis surface of the core crate over plain Python types.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use polylda::analysis::{
    code_topic_vectors, cohort_report, group_codes, infer_loadings, similarity_matrix,
    topic_report, CodeVectorMode,
};
use polylda::corpus::{load_cohorts, split_holdout, MultiCorpus, Vocabulary};
use polylda::evaluation::held_out_perplexity;
use polylda::inference::{EStepOptions, GammaAverage, ModelState};
use polylda::synth::{
    generate_corpus, generate_model, plant_cohorts, plant_synonyms, save_bundle, DocLength,
};
use polylda::trainer::{load_checkpoint, save_checkpoint, train_online, TrainConfig};

fn to_py_err(e: polylda::Error) -> PyErr {
    match e.exit_code() {
        2 => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_gamma_avg(name: &str) -> PyResult<GammaAverage> {
    match name {
        "literal" => Ok(GammaAverage::AllCategories),
        "per-present" => Ok(GammaAverage::PresentCategories),
        other => Err(PyValueError::new_err(format!(
            "gamma_avg must be 'literal' or 'per-present', got {other:?}"
        ))),
    }
}

fn load_vocab_dir(dir: &std::path::Path, order: Option<&[String]>) -> PyResult<Vec<Vocabulary>> {
    polylda::cli::load_vocab_dir(dir, order).map_err(to_py_err)
}

fn open_with_model(model: &ModelState, corpus: PathBuf) -> PyResult<MultiCorpus> {
    let vocabs = model
        .category_names
        .iter()
        .zip(model.vocab_sizes())
        .map(|(name, v)| {
            let entries = (0..v).map(|i| (i.to_string(), String::new())).collect();
            Vocabulary::new(name.clone(), entries).expect("ids are unique")
        })
        .collect();
    MultiCorpus::open(corpus, vocabs, false).map_err(to_py_err)
}

/// A trained multi-category topic model.
#[pyclass(name = "Model", module = "_polylda")]
struct PyModel {
    inner: ModelState,
}

#[pymethods]
impl PyModel {
    /// Load a checkpoint directory written by `train` or the CLI.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: load_checkpoint(path).map_err(to_py_err)?,
        })
    }

    /// Train online over a corpus JSONL file with vocab_<cat>.tsv files in
    /// `vocab_dir`.
    #[staticmethod]
    #[pyo3(signature = (
        corpus, vocab_dir, k, *, alpha=None, eta=None, tau0=None, kappa=None,
        batch_size=None, passes=None, seed=None, tol=None, max_iters=None,
        eval_fraction=None, restarts=None, gamma_avg=None, categories=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        corpus: PathBuf,
        vocab_dir: PathBuf,
        k: usize,
        alpha: Option<f64>,
        eta: Option<Vec<f64>>,
        tau0: Option<f64>,
        kappa: Option<f64>,
        batch_size: Option<usize>,
        passes: Option<usize>,
        seed: Option<u64>,
        tol: Option<f64>,
        max_iters: Option<usize>,
        eval_fraction: Option<f64>,
        restarts: Option<usize>,
        gamma_avg: Option<String>,
        categories: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let vocabs = load_vocab_dir(&vocab_dir, categories.as_deref())?;
        let corpus = MultiCorpus::open(corpus, vocabs, false).map_err(to_py_err)?;
        let mut cfg = TrainConfig::new(k);
        cfg.alpha = alpha;
        cfg.eta = eta;
        if let Some(v) = tau0 {
            cfg.tau0 = v;
        }
        if let Some(v) = kappa {
            cfg.kappa = v;
        }
        if let Some(v) = batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = passes {
            cfg.passes = v;
        }
        if let Some(v) = seed {
            cfg.seed = v;
        }
        if let Some(v) = tol {
            cfg.tol = v;
        }
        if let Some(v) = max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = eval_fraction {
            cfg.eval_fraction = v;
        }
        if let Some(v) = restarts {
            cfg.restarts = v;
        }
        if let Some(name) = gamma_avg {
            cfg.gamma_avg = parse_gamma_avg(&name)?;
        }
        let (model, _) = train_online(&corpus, &cfg).map_err(to_py_err)?;
        Ok(PyModel { inner: model })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, path).map_err(to_py_err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn step(&self) -> u64 {
        self.inner.step
    }

    #[getter]
    fn category_names(&self) -> Vec<String> {
        self.inner.category_names.clone()
    }

    #[getter]
    fn vocab_sizes(&self) -> Vec<usize> {
        self.inner.vocab_sizes()
    }

    /// Expected topic-word probabilities for one category as a K×V nested
    /// list (rows on the simplex).
    fn expected_topics(&self, category: usize) -> PyResult<Vec<Vec<f64>>> {
        if category >= self.inner.num_categories() {
            return Err(PyValueError::new_err(format!(
                "category index {category} out of range"
            )));
        }
        let beta = self.inner.expected_topics(category);
        Ok(beta.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Per-document topic loadings: list of (doc_id, [K floats]).
    #[pyo3(signature = (corpus, *, tol=None, max_iters=None))]
    fn infer_loadings(
        &self,
        corpus: PathBuf,
        tol: Option<f64>,
        max_iters: Option<usize>,
    ) -> PyResult<Vec<(String, Vec<f64>)>> {
        let corpus = open_with_model(&self.inner, corpus)?;
        let mut opts = EStepOptions::default();
        if let Some(v) = tol {
            opts.tol = v;
        }
        if let Some(v) = max_iters {
            opts.max_iters = v;
        }
        infer_loadings(&self.inner, &corpus, &opts).map_err(to_py_err)
    }

    /// Document-completion perplexity over a corpus: returns
    /// (combined, [(category, held_tokens, perplexity)]).
    #[pyo3(signature = (corpus, *, ratio=0.5, seed=42))]
    fn perplexity(
        &self,
        corpus: PathBuf,
        ratio: f64,
        seed: u64,
    ) -> PyResult<(f64, Vec<(String, u64, f64)>)> {
        let corpus = open_with_model(&self.inner, corpus)?;
        let in_memory = corpus.into_memory().map_err(to_py_err)?;
        let (observed, held) = split_holdout(&in_memory, ratio, seed).map_err(to_py_err)?;
        let result = held_out_perplexity(&self.inner, &observed, &held, &EStepOptions::default())
            .map_err(to_py_err)?;
        Ok((result.combined, result.per_category))
    }

    /// Top codes per topic per category:
    /// [topic][category] -> [(code, description, probability)].
    #[pyo3(signature = (vocab_dir, *, top_n=10))]
    fn top_codes(
        &self,
        vocab_dir: PathBuf,
        top_n: usize,
    ) -> PyResult<Vec<Vec<Vec<(String, String, f64)>>>> {
        let vocabs = load_vocab_dir(&vocab_dir, Some(&self.inner.category_names))?;
        let report = topic_report(&self.inner, &vocabs, top_n).map_err(to_py_err)?;
        Ok(report
            .topics
            .into_iter()
            .map(|per_cat| {
                per_cat
                    .into_iter()
                    .map(|entries| {
                        entries
                            .into_iter()
                            .map(|e| (e.code, e.description, e.probability))
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    /// Cosine code similarity with single-linkage grouping for one category:
    /// returns (codes, matrix, group_labels, block_order).
    #[pyo3(signature = (vocab_dir, category, *, threshold=0.8, weighted=false))]
    fn code_similarity(
        &self,
        vocab_dir: PathBuf,
        category: String,
        threshold: f64,
        weighted: bool,
    ) -> PyResult<(Vec<String>, Vec<Vec<f64>>, Vec<usize>, Vec<usize>)> {
        let vocabs = load_vocab_dir(&vocab_dir, Some(&self.inner.category_names))?;
        let t = self
            .inner
            .category_names
            .iter()
            .position(|n| *n == category)
            .ok_or_else(|| PyValueError::new_err(format!("no category named {category:?}")))?;
        let mode = if weighted {
            CodeVectorMode::Weighted
        } else {
            CodeVectorMode::Uniform
        };
        let vectors = code_topic_vectors(&self.inner, t, &vocabs[t], mode).map_err(to_py_err)?;
        let mut sim = similarity_matrix(&vectors, category).map_err(to_py_err)?;
        group_codes(&mut sim, threshold).map_err(to_py_err)?;
        let matrix = sim.s.rows().into_iter().map(|r| r.to_vec()).collect();
        Ok((sim.codes, matrix, sim.group_labels, sim.block_order))
    }

    /// Per-cohort loading summaries:
    /// [(cohort, size, dominant_topic, [(min, q1, median, q3, max, mean)])].
    #[pyo3(signature = (corpus, cohorts, *, tol=None, max_iters=None))]
    #[allow(clippy::type_complexity)]
    fn cohort_summaries(
        &self,
        corpus: PathBuf,
        cohorts: PathBuf,
        tol: Option<f64>,
        max_iters: Option<usize>,
    ) -> PyResult<Vec<(String, usize, usize, Vec<(f64, f64, f64, f64, f64, f64)>)>> {
        let corpus = open_with_model(&self.inner, corpus)?;
        let assignments = load_cohorts(cohorts).map_err(to_py_err)?;
        let mut opts = EStepOptions::default();
        if let Some(v) = tol {
            opts.tol = v;
        }
        if let Some(v) = max_iters {
            opts.max_iters = v;
        }
        let loadings = infer_loadings(&self.inner, &corpus, &opts).map_err(to_py_err)?;
        let report = cohort_report(&loadings, &assignments).map_err(to_py_err)?;
        Ok(report
            .cohorts
            .into_iter()
            .map(|c| {
                let rows = c
                    .topics
                    .iter()
                    .map(|s| (s.min, s.q1, s.median, s.q3, s.max, s.mean))
                    .collect();
                (c.name, c.size, c.dominant_topic, rows)
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(k={}, categories={:?}, step={})",
            self.inner.k, self.inner.category_names, self.inner.step
        )
    }
}

/// Generate a synthetic corpus bundle (corpus.jsonl, vocab TSVs, ground
/// truth) under `out_dir`, optionally with planted synonym pairs and
/// cohorts. Returns the output directory.
#[pyfunction]
#[pyo3(signature = (
    out_dir, k, vocab_sizes, docs, doc_len, *, alpha=0.1, eta=None, seed=42,
    category_names=None, synonym_pairs=0, synonym_category=0, synonym_eps=0.05,
    cohorts=None, cohort_docs=100, cohort_boost=0.8
))]
#[allow(clippy::too_many_arguments)]
fn synth_bundle(
    out_dir: PathBuf,
    k: usize,
    vocab_sizes: Vec<usize>,
    docs: usize,
    doc_len: Vec<u32>,
    alpha: f64,
    eta: Option<Vec<f64>>,
    seed: u64,
    category_names: Option<Vec<String>>,
    synonym_pairs: usize,
    synonym_category: usize,
    synonym_eps: f64,
    cohorts: Option<Vec<(String, usize)>>,
    cohort_docs: usize,
    cohort_boost: f64,
) -> PyResult<PathBuf> {
    let t = vocab_sizes.len();
    let names = category_names.unwrap_or_else(|| (0..t).map(|i| format!("c{i}")).collect());
    let eta = eta.unwrap_or_else(|| vec![0.05; t]);
    let lengths: Vec<DocLength> = if doc_len.len() == 1 {
        vec![DocLength::Fixed(doc_len[0]); t]
    } else {
        doc_len.iter().map(|&n| DocLength::Fixed(n)).collect()
    };
    let mut gt = generate_model(k, &vocab_sizes, alpha, &eta, names, seed).map_err(to_py_err)?;
    if synonym_pairs > 0 {
        plant_synonyms(&mut gt, synonym_category, synonym_pairs, synonym_eps, seed.wrapping_add(2))
            .map_err(to_py_err)?;
    }
    let mut corpus = generate_corpus(&mut gt, docs, &lengths, seed.wrapping_add(1)).map_err(to_py_err)?;
    if let Some(cohorts) = cohorts {
        corpus = plant_cohorts(&mut gt, &corpus, &cohorts, cohort_docs, cohort_boost, seed.wrapping_add(3))
            .map_err(to_py_err)?;
    }
    save_bundle(&gt, &corpus, &out_dir).map_err(to_py_err)?;
    Ok(out_dir)
}

/// Digamma function ψ(x) for x > 0.
#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    polylda::inference::digamma(x).map_err(to_py_err)
}

#[pymodule]
fn _polylda(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth_bundle, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
