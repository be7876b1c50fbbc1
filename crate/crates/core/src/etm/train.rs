use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::estep::{update_eta, update_phi, VariationalState};
use super::objective::{
    doc_elbo, gradients_from_counts, report_from_terms, sim_loss_rho, topic_word_counts, ElboTerms,
};
use super::{log_beta, softmax_rows, EtmLossReport, MrfEtmConfig, TopicModel};
use crate::corpus::{Document, Vocabulary, WordPairSet};
use crate::error::{EccotError, Result};
use crate::matrix::Matrix;

const INIT_STD: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TopicModel,
    /// Variational state for the documents listed in `documents`, in order.
    pub state: VariationalState,
    pub documents: Vec<String>,
    /// Ids of empty documents that were left out of the fit.
    pub excluded: Vec<String>,
    /// One report per epoch, taken after the M-step.
    pub reports: Vec<EtmLossReport>,
    /// Per epoch: the ELBO before the first E-step sweep followed by the ELBO
    /// after each sweep.
    pub sweep_elbos: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Execution {
    Serial,
    #[cfg(feature = "parallel")]
    Parallel,
}

/// Fits the model single-threaded. Identical inputs give bit-identical output.
pub fn fit(
    config: &MrfEtmConfig,
    vocabulary: Vocabulary,
    docs: &[Document],
    pairs: &WordPairSet,
    init_rho: Option<Matrix>,
) -> Result<FitOutcome> {
    fit_impl(config, vocabulary, docs, pairs, init_rho, Execution::Serial)
}

/// Same as [`fit`] with per-document E-step work spread over the rayon pool.
/// Per-document results are reduced in document order, so the output matches
/// the serial path bit for bit.
#[cfg(feature = "parallel")]
pub fn fit_parallel(
    config: &MrfEtmConfig,
    vocabulary: Vocabulary,
    docs: &[Document],
    pairs: &WordPairSet,
    init_rho: Option<Matrix>,
) -> Result<FitOutcome> {
    fit_impl(config, vocabulary, docs, pairs, init_rho, Execution::Parallel)
}

fn map_docs<T: Send>(exec: Execution, n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    match exec {
        Execution::Serial => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

fn state_elbo_terms(
    exec: Execution,
    lb: &Matrix,
    alpha: f64,
    state: &VariationalState,
    docs: &[Document],
) -> Result<(f64, f64)> {
    let per_doc = map_docs(exec, docs.len(), |i| {
        doc_elbo(lb, alpha, state.eta.row(i), &state.phi[i], &docs[i].tokens)
    })?;
    let mut total = ElboTerms::default();
    for t in &per_doc {
        total.add(t);
    }
    Ok((total.likelihood, total.rest()))
}

fn fit_impl(
    config: &MrfEtmConfig,
    vocabulary: Vocabulary,
    docs: &[Document],
    pairs: &WordPairSet,
    init_rho: Option<Matrix>,
    exec: Execution,
) -> Result<FitOutcome> {
    config.validate()?;
    let (k, d, v) = (config.num_topics, config.embed_dim, vocabulary.len());
    let (train_docs, excluded): (Vec<&Document>, Vec<&Document>) = docs.iter().partition(|doc| !doc.is_empty());
    if train_docs.is_empty() {
        return Err(EccotError::Data("no non-empty documents to fit".into()));
    }
    let train_docs: Vec<Document> = train_docs.into_iter().cloned().collect();
    for doc in &train_docs {
        if let Some(&w) = doc.tokens.iter().find(|&&w| w >= v) {
            return Err(EccotError::Contract(format!(
                "document {:?} has token index {w} outside vocabulary of size {v}",
                doc.id
            )));
        }
    }
    if let Some((m, n)) = pairs.iter().find(|&(m, n)| m >= v || n >= v) {
        return Err(EccotError::Contract(format!(
            "pair ({m}, {n}) outside vocabulary of size {v}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rho = match init_rho {
        Some(r) => {
            if r.rows() != v || r.cols() != d {
                return Err(EccotError::Config(format!(
                    "init_rho is {}x{}, expected {v}x{d}",
                    r.rows(),
                    r.cols()
                )));
            }
            r
        }
        None => Matrix::gaussian(v, d, INIT_STD, &mut rng),
    };
    let topic_emb = Matrix::gaussian(k, d, INIT_STD, &mut rng);
    let mut model = TopicModel::new(rho, topic_emb, config.clone(), vocabulary)?;

    let lens: Vec<usize> = train_docs.iter().map(Document::len).collect();
    let mut state = VariationalState::initial(&lens, k, config.dirichlet_alpha);
    let alpha = config.dirichlet_alpha;
    let mut reports = Vec::with_capacity(config.epochs);
    let mut sweep_elbos = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let last_good = model.clone();
        let diverged = |reason: String| EccotError::Diverged {
            epoch,
            reason,
            last_good: Box::new(last_good.clone()),
        };

        // E-step
        let lb = log_beta(&model).map_err(|e| diverged(e.to_string()))?;
        let (l0, r0) = state_elbo_terms(exec, &lb, alpha, &state, &train_docs)?;
        let mut prev = l0 + r0;
        let mut trace = vec![prev];
        for _ in 0..config.max_e_sweeps {
            let updates = map_docs(exec, train_docs.len(), |i| {
                let phi = update_phi(&lb, state.eta.row(i), &train_docs[i].tokens)?;
                let eta = update_eta(alpha, k, &phi);
                Ok((eta, phi))
            })?;
            for (i, (eta, phi)) in updates.into_iter().enumerate() {
                state.eta.row_mut(i).copy_from_slice(&eta);
                state.phi[i] = phi;
            }
            let (l, r) = state_elbo_terms(exec, &lb, alpha, &state, &train_docs)?;
            let cur = l + r;
            if !cur.is_finite() {
                return Err(diverged(format!("ELBO became {cur} during E-step")));
            }
            trace.push(cur);
            let rel = (cur - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            prev = cur;
            if rel < config.e_step_tol {
                break;
            }
        }
        sweep_elbos.push(trace);

        // M-step
        let counts = topic_word_counts(&state, &train_docs, k, v);
        for _ in 0..config.m_steps_per_epoch {
            let g = gradients_from_counts(&model.rho, &model.topic_emb, &counts, pairs, config.lambda)
                .map_err(|e| diverged(e.to_string()))?;
            let norm = g.global_norm();
            if !norm.is_finite() {
                return Err(diverged(format!("gradient norm is {norm}")));
            }
            let scale = if norm > config.grad_clip_norm {
                config.grad_clip_norm / norm
            } else {
                1.0
            };
            model.rho.add_scaled(&g.rho, -config.m_step_lr * scale);
            model.topic_emb.add_scaled(&g.topic_emb, -config.m_step_lr * scale);
        }

        let (_, lb) = softmax_rows(&model.rho, &model.topic_emb).map_err(|e| diverged(e.to_string()))?;
        let (l, r) = state_elbo_terms(exec, &lb, alpha, &state, &train_docs)?;
        let sim = sim_loss_rho(&model.rho, pairs, config.lambda)?;
        let report = report_from_terms(l, r, sim).map_err(|e| diverged(e.to_string()))?;
        log::debug!(
            "epoch {epoch}: elbo {:.6} nll {:.6} kl {:.6} sim {:.6}",
            report.elbo,
            report.nll,
            report.kl,
            report.sim_loss
        );
        reports.push(report);
    }

    Ok(FitOutcome {
        model,
        state,
        documents: train_docs.into_iter().map(|d| d.id).collect(),
        excluded: excluded.into_iter().map(|d| d.id.clone()).collect(),
        reports,
        sweep_elbos,
    })
}

/// Posterior mean of θ for one document under a frozen model. Documents with
/// no tokens get the prior mean (uniform).
pub fn infer_theta(model: &TopicModel, doc: &Document) -> Result<Vec<f64>> {
    let lb = log_beta(model)?;
    infer_theta_with(&lb, &model.config, doc)
}

pub(crate) fn infer_theta_with(lb: &Matrix, config: &MrfEtmConfig, doc: &Document) -> Result<Vec<f64>> {
    let k = lb.rows();
    if doc.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    let alpha = config.dirichlet_alpha;
    let mut eta = vec![alpha + doc.len() as f64 / k as f64; k];
    let mut prev: Option<f64> = None;
    for _ in 0..config.max_e_sweeps.max(1) {
        let phi = update_phi(lb, &eta, &doc.tokens)?;
        eta = update_eta(alpha, k, &phi);
        let cur = doc_elbo(lb, alpha, &eta, &phi, &doc.tokens)?.elbo();
        if let Some(p) = prev {
            if (cur - p).abs() / p.abs().max(f64::MIN_POSITIVE) < config.e_step_tol {
                break;
            }
        }
        prev = Some(cur);
    }
    let total: f64 = eta.iter().sum();
    Ok(eta.into_iter().map(|e| e / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PairSource;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_terms((0..n).map(|i| format!("w{i}")).collect()).unwrap()
    }

    fn small_corpus() -> Vec<Document> {
        vec![
            Document::new("a", vec![0, 1, 0, 2]),
            Document::new("b", vec![3, 4, 3]),
            Document::new("empty", vec![]),
            Document::new("c", vec![0, 4, 1, 1, 2]),
        ]
    }

    fn cfg() -> MrfEtmConfig {
        let mut c = MrfEtmConfig::new(2, 3);
        c.epochs = 4;
        c.seed = 11;
        c
    }

    #[test]
    fn excludes_empty_docs() {
        let out = fit(
            &cfg(),
            vocab(5),
            &small_corpus(),
            &WordPairSet::new(PairSource::Mined),
            None,
        )
        .unwrap();
        assert_eq!(out.excluded, vec!["empty".to_string()]);
        assert_eq!(out.documents, vec!["a", "b", "c"]);
        assert_eq!(out.reports.len(), 4);
    }

    #[test]
    fn eta_invariants_after_fit() {
        let c = cfg();
        let docs = small_corpus();
        let out = fit(&c, vocab(5), &docs, &WordPairSet::new(PairSource::Mined), None).unwrap();
        let lens = [4.0, 3.0, 5.0];
        for (i, n) in lens.iter().enumerate() {
            let row = out.state.eta.row(i);
            assert!(row.iter().all(|&e| e >= c.dirichlet_alpha));
            let s: f64 = row.iter().sum();
            assert!((s - (2.0 * c.dirichlet_alpha + n)).abs() < 1e-9);
        }
        for phi in &out.state.phi {
            for row in phi.iter_rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn rejects_all_empty_corpus() {
        let docs = vec![Document::new("x", vec![])];
        assert!(matches!(
            fit(&cfg(), vocab(2), &docs, &WordPairSet::new(PairSource::Mined), None),
            Err(EccotError::Data(_))
        ));
    }

    #[test]
    fn init_rho_shape_checked() {
        let err = fit(
            &cfg(),
            vocab(5),
            &small_corpus(),
            &WordPairSet::new(PairSource::Mined),
            Some(Matrix::zeros(5, 2)),
        );
        assert!(matches!(err, Err(EccotError::Config(_))));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_serial() {
        let pairs = {
            let mut p = WordPairSet::new(PairSource::Mined);
            p.insert(0, 1);
            p
        };
        let a = fit(&cfg(), vocab(5), &small_corpus(), &pairs, None).unwrap();
        let b = fit_parallel(&cfg(), vocab(5), &small_corpus(), &pairs, None).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.reports, b.reports);
    }

    #[test]
    fn infer_theta_prior_for_empty_doc() {
        let out = fit(
            &cfg(),
            vocab(5),
            &small_corpus(),
            &WordPairSet::new(PairSource::Mined),
            None,
        )
        .unwrap();
        assert_eq!(
            infer_theta(&out.model, &Document::new("z", vec![])).unwrap(),
            vec![0.5, 0.5]
        );
        let theta = infer_theta(&out.model, &Document::new("z", vec![0, 1])).unwrap();
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(theta.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn infer_theta_follows_concentrated_beta() {
        // topic 1 owns words 2 and 3, topic 0 owns words 0 and 1
        let rho = Matrix::from_rows(&[vec![8.0, 0.0], vec![8.0, 0.0], vec![0.0, 8.0], vec![0.0, 8.0]]).unwrap();
        let topic_emb = Matrix::identity(2);
        let mut c = MrfEtmConfig::new(2, 2);
        c.dirichlet_alpha = 0.5;
        let model = TopicModel::new(rho, topic_emb, c, vocab(4)).unwrap();
        let theta = infer_theta(&model, &Document::new("q", vec![2, 3, 3, 2, 2])).unwrap();
        assert!(theta[1] > theta[0], "{theta:?}");
        assert!(theta[1] > 0.8);
    }
}
