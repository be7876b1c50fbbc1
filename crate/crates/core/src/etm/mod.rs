//! Embedded topic model with a Markov-random-field similarity penalty on the
//! word embeddings.
//!
//! The topic–word matrix is `β_k = softmax_v(ρ_v · t_k)` where `ρ` are word
//! embeddings and `t` topic embeddings. Inference is mean-field variational
//! (Dirichlet `q(θ | η)`, categorical `q(z | φ)`); the embeddings are learned by
//! gradient descent on `nll + sim_loss` with the variational state frozen.

mod estep;
mod objective;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{EccotError, Result};
use crate::matrix::{dot, Matrix};

pub use estep::{expected_log_theta, update_eta, update_phi, VariationalState};
pub use objective::{
    compute_elbo, elbo_breakdown, m_step_gradients, sim_loss, topic_word_counts, ElboTerms, EtmLossReport, Gradients,
};
#[cfg(feature = "parallel")]
pub use train::fit_parallel;
pub(crate) use train::infer_theta_with;
pub use train::{fit, infer_theta, FitOutcome};

pub const CHECKPOINT_FORMAT: &str = "mrf-etm/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrfEtmConfig {
    pub num_topics: usize,
    pub embed_dim: usize,
    /// Symmetric Dirichlet prior on document–topic proportions.
    pub dirichlet_alpha: f64,
    /// Weight of the related-pair similarity loss.
    pub lambda: f64,
    /// Relative ELBO change that ends an E-step.
    pub e_step_tol: f64,
    pub max_e_sweeps: usize,
    pub m_step_lr: f64,
    pub m_steps_per_epoch: usize,
    pub grad_clip_norm: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl MrfEtmConfig {
    pub fn new(num_topics: usize, embed_dim: usize) -> Self {
        MrfEtmConfig {
            num_topics,
            embed_dim,
            dirichlet_alpha: 1.0 / num_topics.max(1) as f64,
            lambda: 0.01,
            e_step_tol: 1e-6,
            max_e_sweeps: 100,
            m_step_lr: 0.05,
            m_steps_per_epoch: 20,
            grad_clip_norm: 5.0,
            epochs: 50,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EccotError::Config(m.to_string()));
        if self.num_topics < 1 {
            return bad("num_topics must be at least 1");
        }
        if self.embed_dim < 1 {
            return bad("embed_dim must be at least 1");
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return bad("dirichlet_alpha must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.e_step_tol.is_nan() || self.e_step_tol <= 0.0 {
            return bad("e_step_tol must be positive");
        }
        if !(self.m_step_lr > 0.0 && self.m_step_lr.is_finite()) {
            return bad("m_step_lr must be positive");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad("grad_clip_norm must be positive");
        }
        Ok(())
    }
}

impl Default for MrfEtmConfig {
    fn default() -> Self {
        MrfEtmConfig::new(10, 32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    /// V×D word embeddings.
    pub rho: Matrix,
    /// K×D topic embeddings.
    pub topic_emb: Matrix,
    pub config: MrfEtmConfig,
    pub vocabulary: Vocabulary,
}

impl TopicModel {
    pub fn new(rho: Matrix, topic_emb: Matrix, config: MrfEtmConfig, vocabulary: Vocabulary) -> Result<Self> {
        if rho.rows() != vocabulary.len() {
            return Err(EccotError::Contract(format!(
                "rho has {} rows but vocabulary has {} terms",
                rho.rows(),
                vocabulary.len()
            )));
        }
        if topic_emb.rows() != config.num_topics {
            return Err(EccotError::Contract(format!(
                "topic_emb has {} rows but config has {} topics",
                topic_emb.rows(),
                config.num_topics
            )));
        }
        if rho.cols() != topic_emb.cols() || rho.cols() != config.embed_dim {
            return Err(EccotError::Contract(format!(
                "embedding widths disagree: rho {}, topic_emb {}, config {}",
                rho.cols(),
                topic_emb.cols(),
                config.embed_dim
            )));
        }
        Ok(TopicModel {
            rho,
            topic_emb,
            config,
            vocabulary,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.topic_emb.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.rho.rows()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CheckpointRef {
            format: CHECKPOINT_FORMAT,
            config: &self.config,
            vocabulary: self.vocabulary.terms(),
            rho: &self.rho,
            topic_emb: &self.topic_emb,
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(json)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(EccotError::Data(format!(
                "unsupported checkpoint format {:?} (expected {CHECKPOINT_FORMAT:?})",
                ck.format
            )));
        }
        ck.config.validate()?;
        let model = TopicModel::new(ck.rho, ck.topic_emb, ck.config, Vocabulary::from_terms(ck.vocabulary)?)?;
        if !model.rho.is_finite() || !model.topic_emb.is_finite() {
            return Err(EccotError::Numeric("checkpoint contains non-finite embeddings".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| EccotError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| EccotError::io(path, e))?;
        TopicModel::from_json(&json)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    config: &'a MrfEtmConfig,
    vocabulary: &'a [String],
    rho: &'a Matrix,
    topic_emb: &'a Matrix,
}

#[derive(Deserialize)]
struct Checkpoint {
    format: String,
    config: MrfEtmConfig,
    vocabulary: Vec<String>,
    rho: Matrix,
    topic_emb: Matrix,
}

/// Row-wise softmax of the K×V logit matrix `t_k · ρ_v`, returned both as
/// probabilities and as log-probabilities.
fn softmax_rows(rho: &Matrix, topic_emb: &Matrix) -> Result<(Matrix, Matrix)> {
    let (k, v) = (topic_emb.rows(), rho.rows());
    let mut beta = Matrix::zeros(k, v);
    let mut log_beta = Matrix::zeros(k, v);
    let mut logits = vec![0.0; v];
    for topic in 0..k {
        let t = topic_emb.row(topic);
        for (w, l) in logits.iter_mut().enumerate() {
            *l = dot(rho.row(w), t);
        }
        if let Some(w) = logits.iter().position(|l| !l.is_finite()) {
            return Err(EccotError::Numeric(format!(
                "non-finite logit at topic {topic}, word {w}"
            )));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (w, l) in logits.iter().enumerate() {
            let e = (l - max).exp();
            beta[(topic, w)] = e;
            sum += e;
        }
        let ln_sum = sum.ln();
        for (w, l) in logits.iter().enumerate() {
            beta[(topic, w)] /= sum;
            log_beta[(topic, w)] = l - max - ln_sum;
        }
    }
    Ok((beta, log_beta))
}

/// K×V topic–word probabilities.
pub fn compute_beta(model: &TopicModel) -> Result<Matrix> {
    softmax_rows(&model.rho, &model.topic_emb).map(|(b, _)| b)
}

/// K×V `ln β`, computed without taking the log of rounded probabilities.
pub fn log_beta(model: &TopicModel) -> Result<Matrix> {
    softmax_rows(&model.rho, &model.topic_emb).map(|(_, lb)| lb)
}

/// The `n` most probable terms of topic `k`, ties broken by vocabulary order.
pub fn top_words(model: &TopicModel, k: usize, n: usize) -> Result<Vec<(String, f64)>> {
    if k >= model.num_topics() {
        return Err(EccotError::Contract(format!(
            "topic {k} out of range (model has {} topics)",
            model.num_topics()
        )));
    }
    let beta = compute_beta(model)?;
    Ok(top_of_row(beta.row(k), n)
        .into_iter()
        .map(|(v, p)| (model.vocabulary.terms()[v].clone(), p))
        .collect())
}

pub(crate) fn top_of_row(row: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order.into_iter().take(n).map(|v| (v, row[v])).collect()
}

/// Loss report CSV: `epoch,elbo,nll,kl,sim_loss,total`.
pub fn write_loss_csv<W: std::io::Write>(reports: &[EtmLossReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "elbo", "nll", "kl", "sim_loss", "total"])?;
    for (epoch, r) in reports.iter().enumerate() {
        w.write_record([
            epoch.to_string(),
            r.elbo.to_string(),
            r.nll.to_string(),
            r.kl.to_string(),
            r.sim_loss.to_string(),
            r.total.to_string(),
        ])?;
    }
    w.flush().map_err(|e| EccotError::io("<loss csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_terms((0..n).map(|i| format!("w{i}")).collect()).unwrap()
    }

    fn model(rho: Matrix, topic_emb: Matrix) -> TopicModel {
        let mut cfg = MrfEtmConfig::new(topic_emb.rows(), rho.cols());
        cfg.seed = 7;
        let v = vocab(rho.rows());
        TopicModel::new(rho, topic_emb, cfg, v).unwrap()
    }

    #[test]
    fn beta_uniform_for_zero_rho() {
        let m = model(
            Matrix::zeros(4, 2),
            Matrix::from_rows(&[vec![1.0, -2.0], vec![0.3, 5.0]]).unwrap(),
        );
        let beta = compute_beta(&m).unwrap();
        for &p in beta.as_slice() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn beta_closed_form_two_words() {
        let m = model(
            Matrix::from_rows(&[vec![3f64.ln()], vec![0.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
        );
        let beta = compute_beta(&m).unwrap();
        assert!((beta[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((beta[(0, 1)] - 0.25).abs() < 1e-15);
        let lb = log_beta(&m).unwrap();
        assert!((lb[(0, 1)] - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn beta_permutation_equivariant() {
        let rho = Matrix::from_rows(&[vec![0.1, 0.5], vec![-1.0, 0.2], vec![0.7, -0.3]]).unwrap();
        let t = Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.4]]).unwrap();
        let perm = [2, 0, 1];
        let rho_p = Matrix::from_rows(&perm.iter().map(|&i| rho.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
        let b = compute_beta(&model(rho, t.clone())).unwrap();
        let bp = compute_beta(&model(rho_p, t)).unwrap();
        for k in 0..2 {
            for (j, &i) in perm.iter().enumerate() {
                assert_eq!(bp[(k, j)], b[(k, i)]);
            }
        }
    }

    #[test]
    fn beta_rejects_non_finite() {
        let m = model(
            Matrix::from_rows(&[vec![f64::INFINITY], vec![0.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
        );
        assert!(matches!(compute_beta(&m), Err(EccotError::Numeric(_))));
    }

    #[test]
    fn top_words_cases() {
        let m = model(
            Matrix::from_rows(&[vec![0.0], vec![50.0], vec![0.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
        );
        let top = top_words(&m, 0, 1).unwrap();
        assert_eq!(top[0].0, "w1");
        assert!((top[0].1 - 1.0).abs() < 1e-12);
        assert!(top_words(&m, 0, 0).unwrap().is_empty());
        // uniform row: vocabulary order
        let all = top_words(&m, 1, 3).unwrap();
        assert_eq!(
            all.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>(),
            ["w0", "w1", "w2"]
        );
        assert!((all.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(top_words(&m, 2, 1).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        let m = model(
            Matrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-7, 0.7]]).unwrap(),
            Matrix::from_rows(&[vec![std::f64::consts::PI, -1.1]]).unwrap(),
        );
        let json = m.to_json().unwrap();
        assert!(json.starts_with("{\"format\":\"mrf-etm/1\",\"config\":"));
        let back = TopicModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(compute_beta(&back).unwrap(), compute_beta(&m).unwrap());
    }

    #[test]
    fn checkpoint_rejects_wrong_format() {
        let m = model(Matrix::zeros(1, 1), Matrix::zeros(1, 1));
        let json = m.to_json().unwrap().replace("mrf-etm/1", "mrf-etm/0");
        assert!(matches!(TopicModel::from_json(&json), Err(EccotError::Data(_))));
    }
}
