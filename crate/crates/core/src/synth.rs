//! Synthetic corpora drawn from the model's own generative process, with the
//! ground truth kept around: true topics, true mixtures, planted synonym
//! code pairs, and planted cohorts.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{save_cohorts, CohortAssignment, Document, MultiCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix_io;

/// Per-category document length: fixed, or Poisson with the given mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DocLength {
    Fixed(u32),
    Poisson(f64),
}

/// Everything needed to regenerate a synthetic corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub k: usize,
    pub category_names: Vec<String>,
    pub vocab_sizes: Vec<usize>,
    pub alpha: f64,
    pub eta: Vec<f64>,
    pub doc_count: usize,
    pub doc_lengths: Vec<DocLength>,
    pub seed: u64,
}

/// Ground truth of a synthetic corpus: the true β per category, the true θ
/// per document once a corpus has been generated, and any planted structure.
#[derive(Debug, Clone)]
pub struct SynthGroundTruth {
    pub config: SynthConfig,
    /// K×V_t per category; rows on the simplex.
    pub betas: Vec<Array2<f64>>,
    /// D×K; rows on the simplex. Present after corpus generation.
    pub theta: Option<Array2<f64>>,
    /// (category index, token a, token b) per planted pair.
    pub synonym_pairs: Vec<(usize, u32, u32)>,
    /// doc_id → cohort name for planted cohorts.
    pub cohort_labels: Vec<CohortAssignment>,
}

fn sample_simplex(rng: &mut ChaCha8Rng, dim: usize, concentration: f64) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
    let mut draws: Vec<f64> = (0..dim)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            // Guard against underflow at tiny concentrations; keeps every
            // probability strictly positive.
            g.max(1e-300)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    for d in draws.iter_mut() {
        *d /= total;
    }
    draws
}

fn sample_categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draw the true topics: K rows per category, each row Dirichlet(η^t).
pub fn generate_model(
    k: usize,
    vocab_sizes: &[usize],
    alpha: f64,
    eta: &[f64],
    category_names: Vec<String>,
    seed: u64,
) -> Result<SynthGroundTruth> {
    if k < 2 {
        return Err(Error::invalid("synthetic models need K >= 2 topics"));
    }
    if vocab_sizes.is_empty() || vocab_sizes.len() != eta.len() || vocab_sizes.len() != category_names.len() {
        return Err(Error::ShapeMismatch(format!(
            "got {} vocab sizes, {} eta values, {} category names",
            vocab_sizes.len(),
            eta.len(),
            category_names.len()
        )));
    }
    if !(alpha > 0.0) || eta.iter().any(|&e| !(e > 0.0)) || vocab_sizes.iter().any(|&v| v == 0) {
        return Err(Error::invalid("alpha, eta, and vocabulary sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut betas = Vec::with_capacity(vocab_sizes.len());
    for (&v, &e) in vocab_sizes.iter().zip(eta) {
        let mut beta = Array2::zeros((k, v));
        for mut row in beta.rows_mut() {
            let draw = sample_simplex(&mut rng, v, e);
            row.assign(&Array1::from_vec(draw));
        }
        betas.push(beta);
    }
    Ok(SynthGroundTruth {
        config: SynthConfig {
            k,
            category_names,
            vocab_sizes: vocab_sizes.to_vec(),
            alpha,
            eta: eta.to_vec(),
            doc_count: 0,
            doc_lengths: Vec::new(),
            seed,
        },
        betas,
        theta: None,
        synonym_pairs: Vec::new(),
        cohort_labels: Vec::new(),
    })
}

/// Auto-named vocabularies for a synthetic ground truth (`DX_00042` style).
pub fn synthetic_vocabularies(gt: &SynthGroundTruth) -> Vec<Vocabulary> {
    gt.config
        .category_names
        .iter()
        .zip(&gt.config.vocab_sizes)
        .map(|(name, &v)| {
            let upper = name.to_uppercase();
            let entries = (0..v)
                .map(|i| (format!("{upper}_{i:05}"), format!("synthetic {name} code {i}")))
                .collect();
            Vocabulary::new(name.clone(), entries).expect("generated codes are unique")
        })
        .collect()
}

fn doc_len(rng: &mut ChaCha8Rng, spec: DocLength) -> u32 {
    match spec {
        DocLength::Fixed(n) => n,
        DocLength::Poisson(mean) => {
            let p = Poisson::new(mean).expect("positive mean");
            p.sample(rng) as u32
        }
    }
}

/// Draw `d` documents: θ_d ~ Dirichlet(α); per category, each token slot
/// draws z ~ Mult(θ_d) then w ~ Mult(β^t_z). Counts are aggregated per
/// (category, token); the true θ is recorded in the ground truth.
pub fn generate_corpus(
    gt: &mut SynthGroundTruth,
    d: usize,
    doc_lengths: &[DocLength],
    seed: u64,
) -> Result<MultiCorpus> {
    if d == 0 {
        return Err(Error::invalid("corpus must contain at least one document"));
    }
    if doc_lengths.len() != gt.betas.len() {
        return Err(Error::ShapeMismatch(format!(
            "got {} doc lengths for {} categories",
            doc_lengths.len(),
            gt.betas.len()
        )));
    }
    let k = gt.config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabs = synthetic_vocabularies(gt);
    let mut theta = Array2::zeros((d, k));
    let mut docs = Vec::with_capacity(d);
    let mut empty_docs = 0usize;
    let beta_rows: Vec<Vec<Vec<f64>>> = gt
        .betas
        .iter()
        .map(|b| b.rows().into_iter().map(|r| r.to_vec()).collect())
        .collect();
    for i in 0..d {
        let th = sample_simplex(&mut rng, k, gt.config.alpha);
        theta.row_mut(i).assign(&Array1::from_vec(th.clone()));
        let counts = draw_doc_counts(&mut rng, &th, &beta_rows, doc_lengths);
        let doc = Document::new(format!("d{i:06}"), counts, &vocabs)?;
        if doc.is_empty() {
            empty_docs += 1;
        }
        docs.push(doc);
    }
    if empty_docs > 0 {
        eprintln!("synth: {empty_docs} of {d} generated documents are empty");
    }
    gt.theta = Some(theta);
    gt.config.doc_count = d;
    gt.config.doc_lengths = doc_lengths.to_vec();
    Ok(MultiCorpus::from_documents(vocabs, docs))
}

fn draw_doc_counts(
    rng: &mut ChaCha8Rng,
    theta: &[f64],
    beta_rows: &[Vec<Vec<f64>>],
    doc_lengths: &[DocLength],
) -> Vec<Vec<(u32, u32)>> {
    let mut counts = Vec::with_capacity(beta_rows.len());
    for (t, rows) in beta_rows.iter().enumerate() {
        let n = doc_len(rng, doc_lengths[t]);
        let mut bag: std::collections::BTreeMap<u32, u32> = std::collections::BTreeMap::new();
        for _ in 0..n {
            let z = sample_categorical(rng, theta);
            let w = sample_categorical(rng, &rows[z]) as u32;
            *bag.entry(w).or_insert(0) += 1;
        }
        counts.push(bag.into_iter().collect());
    }
    counts
}

/// Plant `n_pairs` synonym code pairs in one category: for each pair, token
/// b's column across topics becomes token a's column times (1 + u), u uniform
/// in [−ε, ε] per topic, then every row is renormalized. The 2·n_pairs tokens
/// are drawn distinct, uniformly under `seed`.
pub fn plant_synonyms(
    gt: &mut SynthGroundTruth,
    category: usize,
    n_pairs: usize,
    epsilon: f64,
    seed: u64,
) -> Result<()> {
    if n_pairs == 0 {
        return Ok(());
    }
    if category >= gt.betas.len() {
        return Err(Error::invalid(format!("category index {category} out of range")));
    }
    let v = gt.betas[category].ncols();
    if v < 2 * n_pairs {
        return Err(Error::invalid(format!(
            "cannot plant {n_pairs} pairs in a vocabulary of {v} codes"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("epsilon must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tokens: Vec<u32> = (0..v as u32).collect();
    tokens.shuffle(&mut rng);
    let beta = &mut gt.betas[category];
    for p in 0..n_pairs {
        let a = tokens[2 * p];
        let b = tokens[2 * p + 1];
        for k in 0..beta.nrows() {
            let noise = if epsilon > 0.0 {
                rng.random_range(-epsilon..=epsilon)
            } else {
                0.0
            };
            beta[[k, b as usize]] = beta[[k, a as usize]] * (1.0 + noise);
        }
        gt.synonym_pairs.push((category, a, b));
    }
    for mut row in beta.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    Ok(())
}

/// Plant cohorts: for each (cohort name, topic), pick `docs_per_cohort`
/// unlabeled documents under `seed`, re-draw their mixture as
/// boost·e_topic + (1−boost)·Dirichlet(α), and regenerate their tokens with
/// the original per-category lengths. Returns the updated corpus; labels are
/// recorded in the ground truth.
pub fn plant_cohorts(
    gt: &mut SynthGroundTruth,
    corpus: &MultiCorpus,
    cohort_topics: &[(String, usize)],
    docs_per_cohort: usize,
    boost: f64,
    seed: u64,
) -> Result<MultiCorpus> {
    if !(boost > 0.0 && boost < 1.0) {
        return Err(Error::invalid(format!("boost must lie in (0, 1), got {boost}")));
    }
    let k = gt.config.k;
    for (name, topic) in cohort_topics {
        if *topic >= k {
            return Err(Error::invalid(format!(
                "cohort {name:?}: topic index {topic} out of range for K={k}"
            )));
        }
    }
    let theta = gt
        .theta
        .as_mut()
        .ok_or_else(|| Error::invalid("plant_cohorts requires a generated corpus"))?;
    let mut docs = corpus.collect()?;
    let needed = cohort_topics.len() * docs_per_cohort;
    if needed > docs.len() {
        return Err(Error::invalid(format!(
            "need {needed} documents for cohorts but corpus has {}",
            docs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..docs.len()).collect();
    pool.shuffle(&mut rng);
    let vocabs = corpus.vocabularies().to_vec();
    let beta_rows: Vec<Vec<Vec<f64>>> = gt
        .betas
        .iter()
        .map(|b| b.rows().into_iter().map(|r| r.to_vec()).collect())
        .collect();
    let mut chosen = pool.into_iter();
    for (name, topic) in cohort_topics {
        for _ in 0..docs_per_cohort {
            let idx = chosen.next().expect("pool size checked above");
            let base = sample_simplex(&mut rng, k, gt.config.alpha);
            let mut th: Vec<f64> = base.iter().map(|&x| (1.0 - boost) * x).collect();
            th[*topic] += boost;
            theta.row_mut(idx).assign(&Array1::from_vec(th.clone()));
            let lengths: Vec<DocLength> = (0..docs[idx].num_categories())
                .map(|t| DocLength::Fixed(docs[idx].category_tokens(t) as u32))
                .collect();
            let counts = draw_doc_counts(&mut rng, &th, &beta_rows, &lengths);
            let id = docs[idx].id.clone();
            docs[idx] = Document::new(id.clone(), counts, &vocabs)?;
            gt.cohort_labels.push(CohortAssignment {
                doc_id: id,
                cohort_name: name.clone(),
            });
        }
    }
    Ok(MultiCorpus::from_documents(vocabs, docs))
}

/// Write the ground-truth bundle next to the corpus: `config.json`,
/// `theta.bin`, `beta_<cat>.bin`, `synonyms.tsv`, `cohorts.tsv`,
/// `corpus.jsonl`, and one `vocab_<cat>.tsv` per category.
pub fn save_bundle(gt: &SynthGroundTruth, corpus: &MultiCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.json");
    let json = serde_json::to_string_pretty(&gt.config).expect("config serializes");
    std::fs::write(&config_path, json + "\n").map_err(|e| Error::io(&config_path, e))?;
    if let Some(theta) = &gt.theta {
        matrix_io::write_matrix(dir.join("theta.bin"), theta)?;
    }
    for (name, beta) in gt.config.category_names.iter().zip(&gt.betas) {
        matrix_io::write_matrix(dir.join(format!("beta_{name}.bin")), beta)?;
    }
    let vocabs = corpus.vocabularies();
    let syn_path = dir.join("synonyms.tsv");
    let mut syn = String::new();
    for &(cat, a, b) in &gt.synonym_pairs {
        syn.push_str(&format!(
            "{}\t{a}\t{b}\t{}\t{}\n",
            gt.config.category_names[cat],
            vocabs[cat].code(a),
            vocabs[cat].code(b)
        ));
    }
    std::fs::write(&syn_path, syn).map_err(|e| Error::io(&syn_path, e))?;
    save_cohorts(&gt.cohort_labels, dir.join("cohorts.tsv"))?;
    corpus.save(dir.join("corpus.jsonl"))?;
    for vocab in vocabs {
        vocab.save(dir.join(format!("vocab_{}.tsv", vocab.category())))?;
    }
    Ok(())
}

/// Read back the parts of a bundle needed by tests and tooling.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<(SynthGroundTruth, MultiCorpus)> {
    let dir = dir.as_ref();
    let config_path = dir.join("config.json");
    let raw = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let config: SynthConfig = serde_json::from_str(&raw).map_err(|e| Error::Parse {
        path: config_path.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut betas = Vec::new();
    for name in &config.category_names {
        betas.push(matrix_io::read_matrix(dir.join(format!("beta_{name}.bin")))?);
    }
    let theta_path = dir.join("theta.bin");
    let theta = if theta_path.is_file() {
        Some(matrix_io::read_matrix(&theta_path)?)
    } else {
        None
    };
    let mut synonym_pairs = Vec::new();
    let syn_path = dir.join("synonyms.tsv");
    if syn_path.is_file() {
        let raw = std::fs::read_to_string(&syn_path).map_err(|e| Error::io(&syn_path, e))?;
        for (i, line) in raw.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(Error::Parse {
                    path: syn_path.clone(),
                    line: i + 1,
                    message: "expected category<TAB>token_a<TAB>token_b".into(),
                });
            }
            let cat = config
                .category_names
                .iter()
                .position(|n| n == fields[0])
                .ok_or_else(|| Error::Parse {
                    path: syn_path.clone(),
                    line: i + 1,
                    message: format!("unknown category {:?}", fields[0]),
                })?;
            let parse = |s: &str| -> Result<u32> {
                s.parse().map_err(|_| Error::Parse {
                    path: syn_path.clone(),
                    line: i + 1,
                    message: format!("invalid token id {s:?}"),
                })
            };
            synonym_pairs.push((cat, parse(fields[1])?, parse(fields[2])?));
        }
    }
    let cohort_path = dir.join("cohorts.tsv");
    let cohort_labels = if cohort_path.is_file() {
        crate::corpus::load_cohorts(&cohort_path)?
    } else {
        Vec::new()
    };
    let mut vocabs = Vec::new();
    for name in &config.category_names {
        vocabs.push(Vocabulary::load(dir.join(format!("vocab_{name}.tsv")), name.clone())?);
    }
    let corpus = MultiCorpus::open(dir.join("corpus.jsonl"), vocabs, false)?;
    Ok((
        SynthGroundTruth {
            config,
            betas,
            theta,
            synonym_pairs,
            cohort_labels,
        },
        corpus,
    ))
}
