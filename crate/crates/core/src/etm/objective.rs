use serde::{Deserialize, Serialize};

use super::{log_beta, TopicModel, VariationalState};
use crate::corpus::{Document, WordPairSet};
use crate::error::{EccotError, Result};
use crate::matrix::{cosine, dot, norm, Matrix};
use crate::special::ln_gamma;

use super::estep::expected_log_theta;

/// Objective breakdown. `total = nll + kl + sim_loss = −elbo + sim_loss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtmLossReport {
    pub elbo: f64,
    pub nll: f64,
    pub kl: f64,
    pub sim_loss: f64,
    pub total: f64,
}

/// Expectations making up the ELBO, summed over documents. Each field is
/// the raw expectation; `elbo()` applies the signs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ElboTerms {
    /// `Σ φ_jk ln β_{k,w_j}`
    pub likelihood: f64,
    /// `Σ_k (α − 1) E[ln θ_k]`
    pub theta_prior: f64,
    /// `ln Γ(Kα) − K ln Γ(α)`
    pub theta_prior_norm: f64,
    /// `Σ φ_jk E[ln θ_k]`, i.e. `E_q[ln p(z | θ)]`
    pub assignment: f64,
    /// `Σ_k (η_k − 1) E[ln θ_k]`
    pub q_theta: f64,
    /// `ln Γ(Σ η) − Σ ln Γ(η_k)`
    pub q_theta_norm: f64,
    /// `Σ φ_jk ln φ_jk`
    pub q_z: f64,
}

impl ElboTerms {
    pub fn elbo(&self) -> f64 {
        self.likelihood + self.rest()
    }

    /// Everything but the likelihood.
    pub fn rest(&self) -> f64 {
        self.theta_prior + self.theta_prior_norm + self.assignment - self.q_theta - self.q_theta_norm - self.q_z
    }

    pub(crate) fn add(&mut self, o: &ElboTerms) {
        self.likelihood += o.likelihood;
        self.theta_prior += o.theta_prior;
        self.theta_prior_norm += o.theta_prior_norm;
        self.assignment += o.assignment;
        self.q_theta += o.q_theta;
        self.q_theta_norm += o.q_theta_norm;
        self.q_z += o.q_z;
    }
}

pub(crate) fn doc_elbo(
    log_beta: &Matrix,
    alpha: f64,
    eta_row: &[f64],
    phi: &Matrix,
    tokens: &[usize],
) -> Result<ElboTerms> {
    let k = eta_row.len();
    let elog = expected_log_theta(eta_row)?;
    let mut t = ElboTerms::default();
    for (j, &w) in tokens.iter().enumerate() {
        for (topic, &p) in phi.row(j).iter().enumerate() {
            if p > 0.0 {
                t.likelihood += p * log_beta[(topic, w)];
                t.assignment += p * elog[topic];
                t.q_z += p * p.ln();
            }
        }
    }
    let eta_sum: f64 = eta_row.iter().sum();
    t.theta_prior = elog.iter().map(|&el| (alpha - 1.0) * el).sum();
    t.theta_prior_norm = ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha);
    t.q_theta = eta_row.iter().zip(&elog).map(|(&e, &el)| (e - 1.0) * el).sum();
    t.q_theta_norm = ln_gamma(eta_sum) - eta_row.iter().map(|&e| ln_gamma(e)).sum::<f64>();
    Ok(t)
}

pub(crate) fn check_state(state: &VariationalState, docs: &[Document], k: usize) -> Result<()> {
    if state.num_docs() != docs.len() || state.eta.rows() != docs.len() {
        return Err(EccotError::Contract(format!(
            "variational state covers {} documents, got {}",
            state.num_docs(),
            docs.len()
        )));
    }
    for (i, (doc, phi)) in docs.iter().zip(&state.phi).enumerate() {
        if phi.rows() != doc.len() || phi.cols() != k {
            return Err(EccotError::Contract(format!(
                "phi for document {i} is {}x{}, expected {}x{k}",
                phi.rows(),
                phi.cols(),
                doc.len()
            )));
        }
    }
    if state.eta.cols() != k {
        return Err(EccotError::Contract(format!(
            "eta has {} columns, expected {k}",
            state.eta.cols()
        )));
    }
    Ok(())
}

pub(crate) fn elbo_terms(
    log_beta: &Matrix,
    alpha: f64,
    state: &VariationalState,
    docs: &[Document],
) -> Result<ElboTerms> {
    let mut total = ElboTerms::default();
    for (i, doc) in docs.iter().enumerate() {
        total.add(&doc_elbo(
            log_beta,
            alpha,
            state.eta.row(i),
            &state.phi[i],
            &doc.tokens,
        )?);
    }
    Ok(total)
}

/// Per-term breakdown of the ELBO at `state`.
pub fn elbo_breakdown(model: &TopicModel, state: &VariationalState, docs: &[Document]) -> Result<ElboTerms> {
    check_state(state, docs, model.num_topics())?;
    let lb = log_beta(model)?;
    elbo_terms(&lb, model.config.dirichlet_alpha, state, docs)
}

/// Evaluates the variational objective for `model` at `state`, with the
/// similarity penalty weighted by `model.config.lambda`.
pub fn compute_elbo(
    model: &TopicModel,
    state: &VariationalState,
    docs: &[Document],
    pairs: &WordPairSet,
) -> Result<EtmLossReport> {
    check_state(state, docs, model.num_topics())?;
    let lb = log_beta(model)?;
    let terms = elbo_terms(&lb, model.config.dirichlet_alpha, state, docs)?;
    let sim = sim_loss(model, pairs, model.config.lambda)?;
    report_from_terms(terms.likelihood, terms.rest(), sim)
}

pub(crate) fn report_from_terms(likelihood: f64, rest: f64, sim: f64) -> Result<EtmLossReport> {
    let elbo = likelihood + rest;
    let nll = -likelihood;
    let kl = -rest;
    let report = EtmLossReport {
        elbo,
        nll,
        kl,
        sim_loss: sim,
        total: nll + kl + sim,
    };
    for (name, v) in [("elbo", elbo), ("nll", nll), ("kl", kl), ("sim_loss", sim)] {
        if !v.is_finite() {
            return Err(EccotError::Numeric(format!("{name} is {v}")));
        }
    }
    Ok(report)
}

/// `−λ Σ_{(m,n)} cos(ρ_m, ρ_n)`; a zero vector contributes 0.
pub fn sim_loss(model: &TopicModel, pairs: &WordPairSet, lambda: f64) -> Result<f64> {
    sim_loss_rho(&model.rho, pairs, lambda)
}

pub(crate) fn sim_loss_rho(rho: &Matrix, pairs: &WordPairSet, lambda: f64) -> Result<f64> {
    if lambda == 0.0 || pairs.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (m, n) in pairs.iter() {
        if m >= rho.rows() || n >= rho.rows() {
            return Err(EccotError::Contract(format!("pair ({m}, {n}) out of vocabulary range")));
        }
        s += cosine(rho.row(m), rho.row(n));
    }
    Ok(-lambda * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub rho: Matrix,
    pub topic_emb: Matrix,
}

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        (self.rho.frobenius_sq() + self.topic_emb.frobenius_sq()).sqrt()
    }
}

/// K×V expected topic–word counts `Σ_i Σ_{j: w_ij = v} φ_ij,k`.
pub fn topic_word_counts(state: &VariationalState, docs: &[Document], k: usize, v: usize) -> Matrix {
    let mut counts = Matrix::zeros(k, v);
    for (doc, phi) in docs.iter().zip(&state.phi) {
        for (j, &w) in doc.tokens.iter().enumerate() {
            for (topic, &p) in phi.row(j).iter().enumerate() {
                counts[(topic, w)] += p;
            }
        }
    }
    counts
}

/// Analytic gradient of `nll + sim_loss` with respect to `ρ` and the topic
/// embeddings, holding the variational state fixed.
pub fn m_step_gradients(
    model: &TopicModel,
    state: &VariationalState,
    docs: &[Document],
    pairs: &WordPairSet,
    lambda: f64,
) -> Result<Gradients> {
    check_state(state, docs, model.num_topics())?;
    let counts = topic_word_counts(state, docs, model.num_topics(), model.vocab_size());
    gradients_from_counts(&model.rho, &model.topic_emb, &counts, pairs, lambda)
}

pub(crate) fn gradients_from_counts(
    rho: &Matrix,
    topic_emb: &Matrix,
    counts: &Matrix,
    pairs: &WordPairSet,
    lambda: f64,
) -> Result<Gradients> {
    let (beta, _) = super::softmax_rows(rho, topic_emb)?;
    let (k, v, d) = (topic_emb.rows(), rho.rows(), rho.cols());
    let mut g_rho = Matrix::zeros(v, d);
    let mut g_topic = Matrix::zeros(k, d);
    for topic in 0..k {
        let total: f64 = counts.row(topic).iter().sum();
        let t = topic_emb.row(topic).to_vec();
        for w in 0..v {
            // ∂nll/∂logit_kv = C_k β_kv − c_kv
            let g = total * beta[(topic, w)] - counts[(topic, w)];
            if g == 0.0 {
                continue;
            }
            for (gr, tc) in g_rho.row_mut(w).iter_mut().zip(&t) {
                *gr += g * tc;
            }
            for (gt, rc) in g_topic.row_mut(topic).iter_mut().zip(rho.row(w)) {
                *gt += g * rc;
            }
        }
    }
    if lambda != 0.0 {
        for (m, n) in pairs.iter() {
            let (a, b) = (rho.row(m), rho.row(n));
            let (na, nb) = (norm(a), norm(b));
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            let c = dot(a, b) / (na * nb);
            // ∂cos/∂a = b/(|a||b|) − cos·a/|a|²
            let ga: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(ai, bi)| bi / (na * nb) - c * ai / (na * na))
                .collect();
            let gb: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(ai, bi)| ai / (na * nb) - c * bi / (nb * nb))
                .collect();
            for (g, x) in g_rho.row_mut(m).iter_mut().zip(&ga) {
                *g -= lambda * x;
            }
            for (g, x) in g_rho.row_mut(n).iter_mut().zip(&gb) {
                *g -= lambda * x;
            }
        }
    }
    Ok(Gradients {
        rho: g_rho,
        topic_emb: g_topic,
    })
}
