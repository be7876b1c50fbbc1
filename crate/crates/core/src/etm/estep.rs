use crate::error::{EccotError, Result};
use crate::matrix::{log_sum_exp, Matrix};
use crate::special::digamma;

/// Per-document variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    /// N×K Dirichlet parameters.
    pub eta: Matrix,
    /// One N_i×K responsibility matrix per document.
    pub phi: Vec<Matrix>,
}

impl VariationalState {
    /// η_i = α + N_i/K, φ uniform.
    pub fn initial(doc_lens: &[usize], num_topics: usize, alpha: f64) -> Self {
        let k = num_topics as f64;
        let mut eta = Matrix::zeros(doc_lens.len(), num_topics);
        let mut phi = Vec::with_capacity(doc_lens.len());
        for (i, &n) in doc_lens.iter().enumerate() {
            eta.row_mut(i).fill(alpha + n as f64 / k);
            let mut p = Matrix::zeros(n, num_topics);
            p.as_mut_slice().fill(1.0 / k);
            phi.push(p);
        }
        VariationalState { eta, phi }
    }

    pub fn num_docs(&self) -> usize {
        self.phi.len()
    }
}

/// E_q[ln θ_k] = Ψ(η_k) − Ψ(Σ η).
pub fn expected_log_theta(eta_row: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = eta_row.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(EccotError::Domain(format!(
            "Dirichlet parameter must be positive and finite, got {bad}"
        )));
    }
    let psi_total = digamma(eta_row.iter().sum());
    Ok(eta_row.iter().map(|&e| digamma(e) - psi_total).collect())
}

/// Mean-field responsibilities for one document:
/// `φ_jk ∝ β_{k,w_j} · exp(E_q[ln θ_k])`, normalized in log space.
///
/// Takes the precomputed K×V `ln β` so a sweep does not recompute the softmax
/// per document.
pub fn update_phi(log_beta: &Matrix, eta_row: &[f64], tokens: &[usize]) -> Result<Matrix> {
    if tokens.is_empty() {
        return Err(EccotError::Contract("update_phi called on an empty document".into()));
    }
    let k = log_beta.rows();
    if eta_row.len() != k {
        return Err(EccotError::Contract(format!(
            "eta has {} entries, model has {k} topics",
            eta_row.len()
        )));
    }
    let elog = expected_log_theta(eta_row)?;
    let mut phi = Matrix::zeros(tokens.len(), k);
    let mut logits = vec![0.0; k];
    for (j, &w) in tokens.iter().enumerate() {
        if w >= log_beta.cols() {
            return Err(EccotError::Contract(format!("token index {w} out of vocabulary range")));
        }
        for (topic, l) in logits.iter_mut().enumerate() {
            *l = log_beta[(topic, w)] + elog[topic];
        }
        let lse = log_sum_exp(&logits);
        let row = phi.row_mut(j);
        for (p, l) in row.iter_mut().zip(&logits) {
            *p = (l - lse).exp();
        }
        // renormalize away the last ulp of rounding
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    Ok(phi)
}

/// η_k = α + Σ_j φ_jk.
pub fn update_eta(alpha: f64, num_topics: usize, phi_doc: &Matrix) -> Vec<f64> {
    let mut eta = vec![alpha; num_topics];
    for row in phi_doc.iter_rows() {
        for (e, p) in eta.iter_mut().zip(row) {
            *e += p;
        }
    }
    eta
}
