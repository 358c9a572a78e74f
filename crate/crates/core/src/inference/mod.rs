//! The variational core: model state, the per-document E-step with the
//! category-averaged γ update, and the evidence lower bound.

mod special;

pub use special::{digamma, dirichlet_log_expectation, ln_gamma};
pub(crate) use special::{digamma_unchecked, ln_gamma_unchecked};

use ndarray::Array2;

use crate::corpus::Document;
use crate::error::{Error, Result};

/// How the γ update divides the per-category sums.
///
/// The printed update divides by the total number of declared categories,
/// including ones empty for the current document. `PresentCategories` divides
/// by the number of nonempty categories instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaAverage {
    #[default]
    AllCategories,
    PresentCategories,
}

/// Variational word-topic state shared by training, evaluation, and analysis.
///
/// `lambda[t]` is the K×V_t matrix of Dirichlet parameters over category
/// `t`'s vocabulary; every entry stays strictly positive.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub k: usize,
    pub alpha: f64,
    pub eta: Vec<f64>,
    pub tau0: f64,
    pub kappa: f64,
    pub step: u64,
    pub d_total: u64,
    pub seed: u64,
    pub category_names: Vec<String>,
    pub lambda: Vec<Array2<f64>>,
}

impl ModelState {
    pub fn num_categories(&self) -> usize {
        self.lambda.len()
    }

    pub fn vocab_sizes(&self) -> Vec<usize> {
        self.lambda.iter().map(|l| l.ncols()).collect()
    }

    /// Check internal shape and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("model must have at least one topic"));
        }
        if self.lambda.len() != self.eta.len() || self.lambda.len() != self.category_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "model has {} lambda matrices, {} eta values, {} category names",
                self.lambda.len(),
                self.eta.len(),
                self.category_names.len()
            )));
        }
        for (t, l) in self.lambda.iter().enumerate() {
            if l.nrows() != self.k {
                return Err(Error::ShapeMismatch(format!(
                    "lambda[{t}] has {} rows, expected K={}",
                    l.nrows(),
                    self.k
                )));
            }
            if l.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::invalid(format!(
                    "lambda[{t}] contains a non-positive entry"
                )));
            }
        }
        Ok(())
    }

    pub fn validate_doc(&self, doc: &Document) -> Result<()> {
        if doc.num_categories() != self.lambda.len() {
            return Err(Error::ShapeMismatch(format!(
                "document {:?} has {} categories, model has {}",
                doc.id,
                doc.num_categories(),
                self.lambda.len()
            )));
        }
        for (t, l) in self.lambda.iter().enumerate() {
            for &(w, _) in doc.category(t) {
                if (w as usize) >= l.ncols() {
                    return Err(Error::TokenOutOfRange {
                        doc_id: doc.id.clone(),
                        category: self.category_names[t].clone(),
                        token_id: w,
                        vocab_size: l.ncols(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Expected topics E[β^t] = λ^t rows normalized to the simplex.
    pub fn expected_topics(&self, t: usize) -> Array2<f64> {
        let l = &self.lambda[t];
        let mut out = l.clone();
        for mut row in out.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        out
    }
}

/// Per-document variational posterior over topics.
#[derive(Debug, Clone)]
pub struct DocPosterior {
    /// Dirichlet parameter γ, one entry per topic; each entry ≥ α.
    pub gamma: Vec<f64>,
    /// γ normalized to the simplex.
    pub loadings: Vec<f64>,
    pub n_iters: usize,
    pub converged: bool,
}

/// Per-token responsibilities for one category of one document.
#[derive(Debug, Clone)]
pub struct TokenTopics {
    pub tokens: Vec<u32>,
    pub counts: Vec<u32>,
    /// tokens.len() × K; rows on the simplex.
    pub weights: Array2<f64>,
}

/// Responsibilities φ over each distinct token of one document.
#[derive(Debug, Clone)]
pub struct PhiSlice {
    pub cats: Vec<TokenTopics>,
}

/// Per-document sufficient statistics s^t_{kw} = n^t_{dw}·φ^t_{dwk}, laid out
/// like [`PhiSlice`] (tokens × K per category).
#[derive(Debug, Clone)]
pub struct SuffStats {
    pub cats: Vec<(Vec<u32>, Array2<f64>)>,
}

/// Everything the E-step produces for one document.
#[derive(Debug, Clone)]
pub struct EStepOutput {
    pub posterior: DocPosterior,
    pub phi: PhiSlice,
    pub stats: SuffStats,
}

/// E-step knobs; `tol` bounds the mean absolute γ change per topic.
#[derive(Debug, Clone, Copy)]
pub struct EStepOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub gamma_avg: GammaAverage,
}

impl Default for EStepOptions {
    fn default() -> Self {
        EStepOptions {
            tol: 1e-3,
            max_iters: 100,
            gamma_avg: GammaAverage::AllCategories,
        }
    }
}

/// Snapshot of E[log β^t] for every category, computed once per model state
/// and shared read-only by many concurrent E-steps.
#[derive(Debug, Clone)]
pub struct EStepCache {
    elog_beta: Vec<Array2<f64>>,
}

impl EStepCache {
    pub fn new(model: &ModelState) -> Result<EStepCache> {
        model.validate()?;
        let mut elog_beta = Vec::with_capacity(model.lambda.len());
        for l in &model.lambda {
            let mut m = Array2::zeros(l.dim());
            for (lr, mut mr) in l.rows().into_iter().zip(m.rows_mut()) {
                let psi_row = digamma_unchecked(lr.sum());
                for (lv, mv) in lr.iter().zip(mr.iter_mut()) {
                    *mv = digamma_unchecked(*lv) - psi_row;
                }
            }
            elog_beta.push(m);
        }
        Ok(EStepCache { elog_beta })
    }

    pub fn elog_beta(&self, t: usize) -> &Array2<f64> {
        &self.elog_beta[t]
    }

    /// E[log β] restricted to one document's tokens: per category a
    /// tokens × K matrix.
    fn doc_slices(&self, doc: &Document) -> Vec<Array2<f64>> {
        let k = self.elog_beta.first().map_or(0, |m| m.nrows());
        doc_slices_with(doc, k, |t, w, topic| self.elog_beta[t][[topic, w as usize]])
    }
}

fn doc_slices_with(doc: &Document, k: usize, get: impl Fn(usize, u32, usize) -> f64) -> Vec<Array2<f64>> {
    (0..doc.num_categories())
        .map(|t| {
            let entries = doc.category(t);
            let mut m = Array2::zeros((entries.len(), k));
            for (i, &(w, _)) in entries.iter().enumerate() {
                for topic in 0..k {
                    m[[i, topic]] = get(t, w, topic);
                }
            }
            m
        })
        .collect()
}

/// Coordinate ascent on (φ, γ) for a single document against a fixed model.
///
/// φ^t_{dwk} ∝ exp(E[log θ_k] + E[log β^t_{kw}]) normalized over topics, then
/// γ_k = α + (1/T) Σ_t Σ_w n^t_{dw} φ^t_{dwk}, iterated until the mean
/// absolute γ change drops below `tol` or `max_iters` is reached.
pub fn e_step_document(doc: &Document, model: &ModelState, opts: &EStepOptions) -> Result<EStepOutput> {
    model.validate_doc(doc)?;
    // E[log beta] for just this document's tokens, computed straight from
    // lambda; batch callers go through EStepCache instead.
    let mut psi_rows: Vec<Vec<f64>> = Vec::with_capacity(model.lambda.len());
    for l in &model.lambda {
        psi_rows.push(l.rows().into_iter().map(|r| digamma_unchecked(r.sum())).collect());
    }
    let slices = doc_slices_with(doc, model.k, |t, w, topic| {
        digamma_unchecked(model.lambda[t][[topic, w as usize]]) - psi_rows[t][topic]
    });
    e_step_with_slices(doc, model.k, model.alpha, &slices, opts)
}

/// E-step against a precomputed [`EStepCache`]; bitwise-identical to
/// [`e_step_document`] for the same inputs.
pub fn e_step_cached(
    doc: &Document,
    model: &ModelState,
    cache: &EStepCache,
    opts: &EStepOptions,
) -> Result<EStepOutput> {
    model.validate_doc(doc)?;
    let slices = cache.doc_slices(doc);
    e_step_with_slices(doc, model.k, model.alpha, &slices, opts)
}

fn e_step_with_slices(
    doc: &Document,
    k: usize,
    alpha: f64,
    elog_beta: &[Array2<f64>],
    opts: &EStepOptions,
) -> Result<EStepOutput> {
    let t_total = doc.num_categories();
    let nonempty = (0..t_total).filter(|&t| !doc.category(t).is_empty()).count();
    if nonempty == 0 {
        return Err(Error::EmptyDocument { doc_id: doc.id.clone() });
    }
    let divisor = match opts.gamma_avg {
        GammaAverage::AllCategories => t_total as f64,
        GammaAverage::PresentCategories => nonempty as f64,
    };
    let n_total = doc.total_tokens() as f64;

    let mut gamma = vec![alpha + n_total / (t_total as f64 * k as f64); k];
    let mut phi: Vec<Array2<f64>> = (0..t_total)
        .map(|t| Array2::zeros((doc.category(t).len(), k)))
        .collect();
    let mut logits = vec![0.0; k];
    let mut n_iters = 0;
    let mut converged = false;

    while n_iters < opts.max_iters {
        let elog_theta = dirichlet_log_expectation(&gamma)?;
        let mut acc = vec![0.0; k];
        for t in 0..t_total {
            let eb = &elog_beta[t];
            for (i, &(_, n)) in doc.category(t).iter().enumerate() {
                let mut max = f64::NEG_INFINITY;
                for topic in 0..k {
                    let v = elog_theta[topic] + eb[[i, topic]];
                    logits[topic] = v;
                    if v > max {
                        max = v;
                    }
                }
                let mut sum = 0.0;
                for topic in 0..k {
                    let e = (logits[topic] - max).exp();
                    logits[topic] = e;
                    sum += e;
                }
                let row = &mut phi[t];
                for topic in 0..k {
                    let p = logits[topic] / sum;
                    row[[i, topic]] = p;
                    acc[topic] += n as f64 * p;
                }
            }
        }
        let mut delta = 0.0;
        for topic in 0..k {
            let new = alpha + acc[topic] / divisor;
            delta += (new - gamma[topic]).abs();
            gamma[topic] = new;
        }
        n_iters += 1;
        if delta / (k as f64) < opts.tol {
            converged = true;
            break;
        }
    }

    let gamma_sum: f64 = gamma.iter().sum();
    let loadings: Vec<f64> = gamma.iter().map(|&g| g / gamma_sum).collect();
    debug_assert!(gamma.iter().all(|&g| g >= alpha - 1e-12));

    let mut phi_cats = Vec::with_capacity(t_total);
    let mut stat_cats = Vec::with_capacity(t_total);
    for (t, weights) in phi.into_iter().enumerate() {
        let entries = doc.category(t);
        let tokens: Vec<u32> = entries.iter().map(|&(w, _)| w).collect();
        let counts: Vec<u32> = entries.iter().map(|&(_, n)| n).collect();
        let mut stats = weights.clone();
        for (i, &n) in counts.iter().enumerate() {
            for topic in 0..k {
                stats[[i, topic]] *= n as f64;
            }
        }
        stat_cats.push((tokens.clone(), stats));
        phi_cats.push(TokenTopics { tokens, counts, weights });
    }

    Ok(EStepOutput {
        posterior: DocPosterior {
            gamma,
            loadings,
            n_iters,
            converged,
        },
        phi: PhiSlice { cats: phi_cats },
        stats: SuffStats { cats: stat_cats },
    })
}

/// The evidence bound terms, separated for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct ElboBreakdown {
    /// Σ n φ (E[log θ] + E[log β] − log φ), summed over the batch (unscaled).
    pub token: f64,
    /// θ prior and entropy terms, summed over the batch (unscaled).
    pub theta: f64,
    /// β prior and entropy terms, counted once.
    pub beta: f64,
    /// Documents in the batch.
    pub batch_len: usize,
}

impl ElboBreakdown {
    /// Corpus-scaled bound: (D/|batch|)·(token + theta) + beta.
    pub fn total(&self, d_total: u64) -> f64 {
        let scale = d_total as f64 / self.batch_len as f64;
        scale * (self.token + self.theta) + self.beta
    }
}

/// Evidence lower bound estimated from a minibatch whose posteriors were
/// computed against `model`. Per-document terms are scaled by
/// D_total/|batch|; the β prior/entropy terms are counted once.
pub fn elbo_minibatch(batch: &[(&Document, &DocPosterior, &PhiSlice)], model: &ModelState) -> Result<f64> {
    let breakdown = elbo_terms(batch, model)?;
    Ok(breakdown.total(model.d_total))
}

/// Like [`elbo_minibatch`] but returns the individual terms.
pub fn elbo_terms(
    batch: &[(&Document, &DocPosterior, &PhiSlice)],
    model: &ModelState,
) -> Result<ElboBreakdown> {
    if batch.is_empty() {
        return Err(Error::invalid("elbo requires a nonempty batch"));
    }
    let cache = EStepCache::new(model)?;
    let k = model.k;
    let alpha = model.alpha;

    let mut token_term = 0.0;
    let mut theta_term = 0.0;
    for (doc, posterior, phi) in batch {
        model.validate_doc(doc)?;
        let elog_theta = dirichlet_log_expectation(&posterior.gamma)?;
        for (t, tt) in phi.cats.iter().enumerate() {
            let eb = cache.elog_beta(t);
            for (i, (&w, &n)) in tt.tokens.iter().zip(&tt.counts).enumerate() {
                for topic in 0..k {
                    let p = tt.weights[[i, topic]];
                    if p > 0.0 {
                        token_term += n as f64
                            * p
                            * (elog_theta[topic] + eb[[topic, w as usize]] - p.ln());
                    }
                }
            }
        }
        let gamma = &posterior.gamma;
        let gamma_sum: f64 = gamma.iter().sum();
        theta_term += ln_gamma_unchecked(k as f64 * alpha) - k as f64 * ln_gamma_unchecked(alpha)
            - ln_gamma_unchecked(gamma_sum);
        for topic in 0..k {
            theta_term += (alpha - gamma[topic]) * elog_theta[topic] + ln_gamma_unchecked(gamma[topic]);
        }
    }

    let mut beta_term = 0.0;
    for (t, l) in model.lambda.iter().enumerate() {
        let eta = model.eta[t];
        let v = l.ncols() as f64;
        let eb = cache.elog_beta(t);
        for (row, eb_row) in l.rows().into_iter().zip(eb.rows()) {
            beta_term += ln_gamma_unchecked(v * eta) - v * ln_gamma_unchecked(eta)
                - ln_gamma_unchecked(row.sum());
            for (&lv, &ev) in row.iter().zip(eb_row.iter()) {
                beta_term += (eta - lv) * ev + ln_gamma_unchecked(lv);
            }
        }
    }

    for (value, term) in [
        (token_term, "token_likelihood"),
        (theta_term, "theta_prior"),
        (beta_term, "beta_prior"),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFiniteTerm { term });
        }
    }

    Ok(ElboBreakdown {
        token: token_term,
        theta: theta_term,
        beta: beta_term,
        batch_len: batch.len(),
    })
}
