//! Downstream analysis of a trained model: top-code topic reports,
//! per-document loadings, cohort summaries, and code-similarity grouping.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::corpus::{CohortAssignment, MultiCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::inference::{e_step_cached, EStepCache, EStepOptions, ModelState};

/// One ranked entry of a topic report.
#[derive(Debug, Clone)]
pub struct TopicEntry {
    pub token_id: u32,
    pub code: String,
    pub description: String,
    pub probability: f64,
}

/// Per topic, per category: the top codes by expected probability.
#[derive(Debug, Clone)]
pub struct TopicReport {
    /// Indexed `[topic][category][rank]`.
    pub topics: Vec<Vec<Vec<TopicEntry>>>,
    pub category_names: Vec<String>,
}

/// Top-n codes per (topic, category) under β̂ = row-normalized λ. Ties break
/// toward the lower token id; `top_n` larger than the vocabulary truncates.
pub fn topic_report(model: &ModelState, vocabs: &[Vocabulary], top_n: usize) -> Result<TopicReport> {
    model.validate()?;
    if vocabs.len() != model.num_categories() {
        return Err(Error::ShapeMismatch(format!(
            "{} vocabularies for {} model categories",
            vocabs.len(),
            model.num_categories()
        )));
    }
    for (vocab, l) in vocabs.iter().zip(&model.lambda) {
        if vocab.len() != l.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "vocabulary {:?} has {} codes, lambda has {} columns",
                vocab.category(),
                vocab.len(),
                l.ncols()
            )));
        }
    }
    let mut topics = Vec::with_capacity(model.k);
    for k in 0..model.k {
        let mut per_cat = Vec::with_capacity(model.num_categories());
        for (t, vocab) in vocabs.iter().enumerate() {
            let beta = model.expected_topics(t);
            let mut ranked: Vec<(u32, f64)> = beta
                .row(k)
                .iter()
                .enumerate()
                .map(|(w, &p)| (w as u32, p))
                .collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            ranked.truncate(top_n.min(vocab.len()));
            per_cat.push(
                ranked
                    .into_iter()
                    .map(|(w, p)| TopicEntry {
                        token_id: w,
                        code: vocab.code(w).to_string(),
                        description: vocab.description(w).to_string(),
                        probability: p,
                    })
                    .collect(),
            );
        }
        topics.push(per_cat);
    }
    Ok(TopicReport {
        topics,
        category_names: model.category_names.clone(),
    })
}

/// Fresh per-document loadings (normalized γ) for every document in corpus
/// order. Documents with no tokens get uniform loadings.
pub fn infer_loadings(
    model: &ModelState,
    corpus: &MultiCorpus,
    opts: &EStepOptions,
) -> Result<Vec<(String, Vec<f64>)>> {
    model.validate()?;
    let cache = EStepCache::new(model)?;
    let docs = corpus.collect()?;
    docs.par_iter()
        .map(|doc| {
            let loadings = if doc.is_empty() {
                vec![1.0 / model.k as f64; model.k]
            } else {
                e_step_cached(doc, model, &cache, opts)?.posterior.loadings
            };
            Ok((doc.id.clone(), loadings))
        })
        .collect()
}

/// Five-number summary plus mean of one topic's loadings within a cohort.
#[derive(Debug, Clone, Copy)]
pub struct LoadingSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Per-cohort loading distributions and the dominant topic (argmax of the
/// median loading).
#[derive(Debug, Clone)]
pub struct CohortSummary {
    pub name: String,
    pub size: usize,
    pub topics: Vec<LoadingSummary>,
    pub dominant_topic: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CohortReport {
    pub cohorts: Vec<CohortSummary>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // Linear interpolation between order statistics.
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summarize loadings per cohort. Cohorts appear in first-mention order;
/// every assignment's doc_id must be present in the loadings table.
pub fn cohort_report(
    loadings: &[(String, Vec<f64>)],
    cohorts: &[CohortAssignment],
) -> Result<CohortReport> {
    let by_id: std::collections::HashMap<&str, &Vec<f64>> =
        loadings.iter().map(|(id, l)| (id.as_str(), l)).collect();
    let mut order: Vec<&str> = Vec::new();
    let mut members: std::collections::HashMap<&str, Vec<&Vec<f64>>> = std::collections::HashMap::new();
    for a in cohorts {
        let l = *by_id.get(a.doc_id.as_str()).ok_or_else(|| {
            Error::invalid(format!(
                "cohort {:?}: doc_id {:?} not found in loadings",
                a.cohort_name, a.doc_id
            ))
        })?;
        if !members.contains_key(a.cohort_name.as_str()) {
            order.push(a.cohort_name.as_str());
        }
        members.entry(a.cohort_name.as_str()).or_default().push(l);
    }
    let mut out = CohortReport::default();
    for name in order {
        let rows = &members[name];
        let k = rows[0].len();
        let mut topics = Vec::with_capacity(k);
        for topic in 0..k {
            let mut values: Vec<f64> = rows.iter().map(|r| r[topic]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            topics.push(LoadingSummary {
                min: values[0],
                q1: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q3: quantile(&values, 0.75),
                max: values[values.len() - 1],
                mean,
            });
        }
        let dominant_topic = topics
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.median.partial_cmp(&b.1.median).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        out.cohorts.push(CohortSummary {
            name: name.to_string(),
            size: rows.len(),
            topics,
            dominant_topic,
        });
    }
    Ok(out)
}

/// How a code's topic vector weights the topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodeVectorMode {
    /// Column-normalized expected topics: p(topic | code) under a uniform
    /// topic prior.
    #[default]
    Uniform,
    /// Topics weighted by training-time mass Σ_w (λ − η) before normalizing.
    Weighted,
}

/// One code's distribution over topics.
#[derive(Debug, Clone)]
pub struct CodeTopicVector {
    pub category: usize,
    pub token_id: u32,
    pub code: String,
    /// Length-K simplex vector.
    pub p_hat: Vec<f64>,
}

/// Topic distribution per code: p̂_i(k) ∝ β̂^t_{k,i}, optionally weighted by
/// per-topic training mass.
pub fn code_topic_vectors(
    model: &ModelState,
    category: usize,
    vocab: &Vocabulary,
    mode: CodeVectorMode,
) -> Result<Vec<CodeTopicVector>> {
    model.validate()?;
    if category >= model.num_categories() {
        return Err(Error::invalid(format!("category index {category} out of range")));
    }
    if vocab.len() != model.lambda[category].ncols() {
        return Err(Error::ShapeMismatch(format!(
            "vocabulary {:?} has {} codes, lambda has {} columns",
            vocab.category(),
            vocab.len(),
            model.lambda[category].ncols()
        )));
    }
    let beta = model.expected_topics(category);
    let weights: Vec<f64> = match mode {
        CodeVectorMode::Uniform => vec![1.0; model.k],
        CodeVectorMode::Weighted => {
            let eta = model.eta[category];
            model.lambda[category]
                .rows()
                .into_iter()
                .map(|row| row.iter().map(|&v| (v - eta).max(0.0)).sum::<f64>() + f64::MIN_POSITIVE)
                .collect()
        }
    };
    let mut out = Vec::with_capacity(vocab.len());
    for w in 0..vocab.len() {
        let mut p_hat: Vec<f64> = (0..model.k).map(|k| weights[k] * beta[[k, w]]).collect();
        let total: f64 = p_hat.iter().sum();
        // lambda > 0 guarantees a positive column.
        debug_assert!(total > 0.0);
        for p in p_hat.iter_mut() {
            *p /= total;
        }
        out.push(CodeTopicVector {
            category,
            token_id: w as u32,
            code: vocab.code(w as u32).to_string(),
            p_hat,
        });
    }
    Ok(out)
}

/// Symmetric cosine-similarity matrix over one category's codes, with group
/// labels and a block ordering once [`group_codes`] has run.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub category: String,
    pub codes: Vec<String>,
    pub token_ids: Vec<u32>,
    /// codes × codes, entries in [0, 1], unit diagonal.
    pub s: Array2<f64>,
    /// Group id per code, in `codes` order; empty until grouped.
    pub group_labels: Vec<usize>,
    /// Permutation of code indices ordering groups by descending size, codes
    /// within a group by token id; empty until grouped.
    pub block_order: Vec<usize>,
}

/// S_ij = p̂_i·p̂_j / (‖p̂_i‖‖p̂_j‖) over the given code vectors.
pub fn similarity_matrix(vectors: &[CodeTopicVector], category_name: impl Into<String>) -> Result<SimilarityMatrix> {
    if vectors.len() < 2 {
        return Err(Error::invalid("similarity needs at least two code vectors"));
    }
    let k = vectors[0].p_hat.len();
    if vectors.iter().any(|v| v.p_hat.len() != k) {
        return Err(Error::ShapeMismatch("code vectors must share one topic count".into()));
    }
    let n = vectors.len();
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.p_hat.iter().map(|&x| x * x).sum::<f64>().sqrt())
        .collect();
    if norms.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("zero-norm code vector"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let dot: f64 = vectors[i]
                            .p_hat
                            .iter()
                            .zip(&vectors[j].p_hat)
                            .map(|(&a, &b)| a * b)
                            .sum();
                        dot / (norms[i] * norms[j])
                    }
                })
                .collect()
        })
        .collect();
    let mut s = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            s[[i, j]] = v;
        }
    }
    // enforce exact symmetry against floating-point drift in the dot products
    for i in 0..n {
        for j in (i + 1)..n {
            let v = s[[i, j]];
            s[[j, i]] = v;
        }
    }
    Ok(SimilarityMatrix {
        category: category_name.into(),
        codes: vectors.iter().map(|v| v.code.clone()).collect(),
        token_ids: vectors.iter().map(|v| v.token_id).collect(),
        s,
        group_labels: Vec::new(),
        block_order: Vec::new(),
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Single-linkage grouping: connected components of the graph with an edge
/// wherever S_ij ≥ threshold. Fills `group_labels` (ids ordered by
/// descending group size, ties by smallest token id) and `block_order`.
pub fn group_codes(sim: &mut SimilarityMatrix, threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "grouping threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let n = sim.codes.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if sim.s[[i, j]] >= threshold {
                uf.union(i, j);
            }
        }
    }
    let mut by_root: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for i in 0..n {
        let root = uf.find(i);
        by_root.entry(root).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
    for g in groups.iter_mut() {
        g.sort_by_key(|&i| sim.token_ids[i]);
    }
    groups.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then(sim.token_ids[a[0]].cmp(&sim.token_ids[b[0]]))
    });
    let mut labels = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for (gid, group) in groups.iter().enumerate() {
        for &i in group {
            labels[i] = gid;
            order.push(i);
        }
    }
    sim.group_labels = labels;
    sim.block_order = order;
    Ok(())
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the similarity CSV: a header of codes in block order, then one row
/// per code; values carry 17 significant digits.
pub fn export_similarity(sim: &SimilarityMatrix, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    let order: Vec<usize> = if sim.block_order.is_empty() {
        (0..sim.codes.len()).collect()
    } else {
        sim.block_order.clone()
    };
    let header: Vec<&str> = order.iter().map(|&i| sim.codes[i].as_str()).collect();
    writeln!(w, "code,{}", header.join(","))?;
    for &i in &order {
        let row: Vec<String> = order.iter().map(|&j| fmt17(sim.s[[i, j]])).collect();
        writeln!(w, "{},{}", sim.codes[i], row.join(","))?;
    }
    Ok(())
}

/// `group_id<TAB>code<TAB>description` in block order.
pub fn export_groups(sim: &SimilarityMatrix, vocab: &Vocabulary, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    for &i in &sim.block_order {
        writeln!(
            w,
            "{}\t{}\t{}",
            sim.group_labels[i],
            sim.codes[i],
            vocab.description(sim.token_ids[i])
        )?;
    }
    Ok(())
}

/// `topic<TAB>category<TAB>rank<TAB>code<TAB>description<TAB>probability`.
pub fn export_topics(report: &TopicReport, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    for (k, per_cat) in report.topics.iter().enumerate() {
        for (t, entries) in per_cat.iter().enumerate() {
            for (rank, e) in entries.iter().enumerate() {
                writeln!(
                    w,
                    "{k}\t{}\t{}\t{}\t{}\t{}",
                    report.category_names[t],
                    rank,
                    e.code,
                    e.description,
                    fmt17(e.probability)
                )?;
            }
        }
    }
    Ok(())
}

/// `doc_id<TAB>k0<TAB>k1<TAB>…` header, then one row per document.
pub fn export_loadings(loadings: &[(String, Vec<f64>)], w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    let k = loadings.first().map_or(0, |(_, l)| l.len());
    let header: Vec<String> = (0..k).map(|i| format!("k{i}")).collect();
    writeln!(w, "doc_id\t{}", header.join("\t"))?;
    for (id, row) in loadings {
        let values: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        writeln!(w, "{id}\t{}", values.join("\t"))?;
    }
    Ok(())
}

/// `cohort<TAB>topic<TAB>min<TAB>q1<TAB>median<TAB>q3<TAB>max<TAB>mean`.
pub fn export_cohorts(report: &CohortReport, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    for c in &report.cohorts {
        for (topic, s) in c.topics.iter().enumerate() {
            writeln!(
                w,
                "{}\t{topic}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.name,
                fmt17(s.min),
                fmt17(s.q1),
                fmt17(s.median),
                fmt17(s.q3),
                fmt17(s.max),
                fmt17(s.mean)
            )?;
        }
    }
    Ok(())
}
