//! Held-out perplexity via document completion, and the topic-count sweep.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::corpus::{split_holdout, Document, MultiCorpus};
use crate::error::{Error, Result};
use crate::inference::{e_step_cached, EStepCache, EStepOptions, ModelState};
use crate::trainer::{train_online, TrainConfig};

/// Held-out perplexity, per category and pooled across categories by held
/// token count.
#[derive(Debug, Clone)]
pub struct PerplexityResult {
    /// (category name, held tokens, perplexity).
    pub per_category: Vec<(String, u64, f64)>,
    pub combined: f64,
    pub docs_evaluated: usize,
}

/// One sweep row per requested K.
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// (K, validation perplexity, train seconds).
    pub rows: Vec<(usize, f64, f64)>,
    pub best_k: usize,
}

/// Document-completion perplexity: fit loadings on each document's observed
/// half, then score its held half under p(w|d,t) = Σ_k θ̂_dk·β̂^t_kw.
///
/// Per-category perplexity is exp(−Σ log p / Σ n) over held tokens; the
/// combined value pools numerator and denominator across categories.
pub fn held_out_perplexity(
    model: &ModelState,
    observed: &MultiCorpus,
    held: &MultiCorpus,
    opts: &EStepOptions,
) -> Result<PerplexityResult> {
    model.validate()?;
    let t_total = model.num_categories();
    let cache = EStepCache::new(model)?;
    let betas: Vec<Array2<f64>> = (0..t_total).map(|t| model.expected_topics(t)).collect();

    let obs_docs = observed.collect()?;
    let held_docs = held.collect()?;
    if obs_docs.len() != held_docs.len() {
        return Err(Error::ShapeMismatch(format!(
            "observed half has {} documents, held half has {}",
            obs_docs.len(),
            held_docs.len()
        )));
    }

    let pairs: Vec<(&Document, &Document)> = obs_docs
        .iter()
        .zip(&held_docs)
        .map(|(o, h)| {
            if o.id != h.id {
                Err(Error::invalid(format!(
                    "misaligned holdout split: observed doc {:?} vs held doc {:?}",
                    o.id, h.id
                )))
            } else {
                Ok((o, h))
            }
        })
        .collect::<Result<_>>()?;

    // (sum of -log p, token count) per category, reduced in document order.
    let per_doc: Vec<Vec<(f64, u64)>> = pairs
        .par_iter()
        .map(|(obs, held)| score_document(model, &cache, &betas, obs, held, opts))
        .collect::<Result<_>>()?;

    let mut nll = vec![0.0f64; t_total];
    let mut tokens = vec![0u64; t_total];
    for doc_scores in &per_doc {
        for (t, &(n, c)) in doc_scores.iter().enumerate() {
            nll[t] += n;
            tokens[t] += c;
        }
    }

    let per_category: Vec<(String, u64, f64)> = model
        .category_names
        .iter()
        .enumerate()
        .map(|(t, name)| {
            let ppl = if tokens[t] == 0 {
                f64::NAN
            } else {
                (nll[t] / tokens[t] as f64).exp()
            };
            (name.clone(), tokens[t], ppl)
        })
        .collect();
    let total_tokens: u64 = tokens.iter().sum();
    if total_tokens == 0 {
        return Err(Error::invalid("held-out half contains no tokens"));
    }
    let combined = (nll.iter().sum::<f64>() / total_tokens as f64).exp();
    Ok(PerplexityResult {
        per_category,
        combined,
        docs_evaluated: pairs.len(),
    })
}

fn score_document(
    model: &ModelState,
    cache: &EStepCache,
    betas: &[Array2<f64>],
    observed: &Document,
    held: &Document,
    opts: &EStepOptions,
) -> Result<Vec<(f64, u64)>> {
    let k = model.k;
    // A document whose observed half is empty carries no evidence; its
    // posterior is the symmetric prior, i.e. uniform loadings.
    let loadings = if observed.is_empty() {
        vec![1.0 / k as f64; k]
    } else {
        e_step_cached(observed, model, cache, opts)?.posterior.loadings
    };
    let mut out = Vec::with_capacity(model.num_categories());
    for (t, beta) in betas.iter().enumerate() {
        let mut nll = 0.0;
        let mut count = 0u64;
        for &(w, n) in held.category(t) {
            let mut p = 0.0;
            for topic in 0..k {
                p += loadings[topic] * beta[[topic, w as usize]];
            }
            nll -= n as f64 * p.ln();
            count += n as u64;
        }
        out.push((nll, count));
    }
    Ok(out)
}

/// Write the perplexity table: `category<TAB>held_tokens<TAB>perplexity`
/// with a final `COMBINED` row.
pub fn write_perplexity_tsv(result: &PerplexityResult, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    let mut total = 0u64;
    for (name, tokens, ppl) in &result.per_category {
        writeln!(w, "{name}\t{tokens}\t{ppl:.6}")?;
        total += tokens;
    }
    writeln!(w, "COMBINED\t{total}\t{:.6}", result.combined)
}

/// Train one model per requested K on the observed split and evaluate each on
/// the held split. The best K minimizes validation perplexity.
pub fn topic_sweep(
    corpus: &MultiCorpus,
    ks: &[usize],
    template: &TrainConfig,
    ratio: f64,
    seed: u64,
) -> Result<SweepResult> {
    if ks.is_empty() {
        return Err(Error::invalid("sweep requires at least one K"));
    }
    let in_memory = corpus.into_memory()?;
    let (observed, held) = split_holdout(&in_memory, ratio, seed)?;
    let opts = EStepOptions {
        tol: template.tol,
        max_iters: template.max_iters,
        gamma_avg: template.gamma_avg,
    };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut cfg = template.clone();
        cfg.k = k;
        let started = Instant::now();
        let (model, _) = train_online(&observed, &cfg)?;
        let seconds = started.elapsed().as_secs_f64();
        let ppl = held_out_perplexity(&model, &observed, &held, &opts)?;
        rows.push((k, ppl.combined, seconds));
    }
    let best_k = rows
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite perplexities"))
        .expect("nonempty rows")
        .0;
    Ok(SweepResult { rows, best_k })
}

/// Write the sweep table: `K<TAB>perplexity<TAB>train_seconds`.
pub fn write_sweep_tsv(result: &SweepResult, w: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    for (k, ppl, seconds) in &result.rows {
        writeln!(w, "{k}\t{ppl:.6}\t{seconds:.3}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::inference::GammaAverage;
    use crate::synth::{generate_corpus, generate_model, DocLength};
    use approx::assert_abs_diff_eq;

    fn uniform_model(k: usize, sizes: &[usize], alpha: f64) -> ModelState {
        ModelState {
            k,
            alpha,
            eta: vec![0.01; sizes.len()],
            tau0: 1.0,
            kappa: 0.7,
            step: 0,
            d_total: 1,
            seed: 0,
            category_names: (0..sizes.len()).map(|i| format!("c{i}")).collect(),
            lambda: sizes.iter().map(|&v| Array2::from_elem((k, v), 1.0)).collect(),
        }
    }

    fn small_split() -> (MultiCorpus, MultiCorpus, MultiCorpus) {
        let mut gt = generate_model(
            3,
            &[15, 10],
            0.2,
            &[0.1, 0.1],
            vec!["c0".into(), "c1".into()],
            71,
        )
        .unwrap();
        let corpus = generate_corpus(&mut gt, 60, &[DocLength::Fixed(12), DocLength::Fixed(9)], 72).unwrap();
        let (obs, held) = split_holdout(&corpus, 0.5, 73).unwrap();
        (corpus, obs, held)
    }

    #[test]
    fn uniform_model_scores_vocabulary_size() {
        // Constant lambda rows give p(w) = 1/V_t exactly, so per-category
        // perplexity equals V_t.
        let (_, obs, held) = small_split();
        let model = uniform_model(4, &[15, 10], 0.25);
        let res = held_out_perplexity(&model, &obs, &held, &EStepOptions::default()).unwrap();
        assert_abs_diff_eq!(res.per_category[0].2, 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.per_category[1].2, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn certain_model_scores_one() {
        // V_t = 1 everywhere: every held token gets probability 1.
        let vocabs = vec![Vocabulary::new("c0", vec![("A".into(), String::new())]).unwrap()];
        let docs = vec![Document::new("d0", vec![vec![(0, 8)]], &vocabs).unwrap()];
        let corpus = MultiCorpus::from_documents(vocabs, docs);
        let (obs, held) = split_holdout(&corpus, 0.5, 7).unwrap();
        let model = uniform_model(3, &[1], 0.25);
        let res = held_out_perplexity(&model, &obs, &held, &EStepOptions::default()).unwrap();
        assert_abs_diff_eq!(res.combined, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn combined_is_token_weighted_log_average() {
        let (_, obs, held) = small_split();
        let model = uniform_model(4, &[15, 10], 0.25);
        let res = held_out_perplexity(&model, &obs, &held, &EStepOptions::default()).unwrap();
        let num: f64 = res
            .per_category
            .iter()
            .map(|(_, n, p)| *n as f64 * p.ln())
            .sum();
        let den: f64 = res.per_category.iter().map(|(_, n, _)| *n as f64).sum();
        assert_abs_diff_eq!(res.combined.ln(), num / den, epsilon = 1e-12);
        // a deterministic category (V=1) cannot push the pooled value above
        // the max of the others: its log term is zero.
        assert!(res.combined <= res.per_category.iter().map(|r| r.2).fold(f64::MIN, f64::max) + 1e-12);
    }

    #[test]
    fn perplexity_is_invariant_to_topic_permutation() {
        let (_, obs, held) = small_split();
        let mut gt = generate_model(
            4,
            &[15, 10],
            0.3,
            &[0.2, 0.2],
            vec!["c0".into(), "c1".into()],
            91,
        )
        .unwrap();
        // use the synthetic betas as lambda to get an asymmetric model
        let mut model = uniform_model(4, &[15, 10], 0.25);
        model.lambda = gt.betas.drain(..).map(|b| b * 50.0).collect();
        let base = held_out_perplexity(&model, &obs, &held, &EStepOptions::default()).unwrap();
        let perm = [3usize, 1, 0, 2];
        let mut permuted = model.clone();
        for t in 0..2 {
            for (new_row, &old_row) in perm.iter().enumerate() {
                permuted.lambda[t]
                    .row_mut(new_row)
                    .assign(&model.lambda[t].row(old_row));
            }
        }
        let swapped = held_out_perplexity(&permuted, &obs, &held, &EStepOptions::default()).unwrap();
        assert_abs_diff_eq!(base.combined, swapped.combined, epsilon = 1e-9);
    }

    #[test]
    fn misaligned_halves_are_rejected() {
        let (corpus, obs, _) = small_split();
        let err = held_out_perplexity(
            &uniform_model(4, &[15, 10], 0.25),
            &obs,
            &{
                // shift the held docs by one to break id alignment
                let docs = corpus.collect().unwrap();
                let rotated: Vec<Document> = docs.iter().cycle().skip(1).take(docs.len()).cloned().collect();
                MultiCorpus::from_documents(corpus.vocabularies().to_vec(), rotated)
            },
            &EStepOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("misaligned"), "{err}");
    }

    #[test]
    fn sweep_prefers_true_topic_count_over_underfit() {
        let mut gt = generate_model(
            5,
            &[30, 20],
            0.1,
            &[0.05, 0.05],
            vec!["c0".into(), "c1".into()],
            101,
        )
        .unwrap();
        let corpus = generate_corpus(&mut gt, 250, &[DocLength::Fixed(20), DocLength::Fixed(15)], 102).unwrap();
        let mut template = TrainConfig::new(5);
        template.batch_size = 64;
        template.passes = 3;
        template.tau0 = 1.0;
        template.seed = 7;
        template.alpha = Some(0.1);
        template.eta = Some(vec![0.05, 0.05]);
        template.gamma_avg = GammaAverage::AllCategories;
        let sweep = topic_sweep(&corpus, &[2, 5], &template, 0.3, 103).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        let ppl_at = |k: usize| sweep.rows.iter().find(|r| r.0 == k).unwrap().1;
        assert!(
            ppl_at(5) <= ppl_at(2),
            "K=5 should fit at least as well as K=2: {:?}",
            sweep.rows
        );
    }

    #[test]
    fn sweep_is_deterministic_and_single_k_works() {
        let mut gt = generate_model(3, &[12], 0.2, &[0.1], vec!["c0".into()], 111).unwrap();
        let corpus = generate_corpus(&mut gt, 50, &[DocLength::Fixed(10)], 112).unwrap();
        let mut template = TrainConfig::new(3);
        template.batch_size = 25;
        template.tau0 = 1.0;
        let a = topic_sweep(&corpus, &[3], &template, 0.4, 9).unwrap();
        let b = topic_sweep(&corpus, &[3], &template, 0.4, 9).unwrap();
        assert_eq!(a.rows.len(), 1);
        assert_eq!(a.best_k, 3);
        assert_eq!(a.rows[0].1, b.rows[0].1);
    }
}
