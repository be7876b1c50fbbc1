//! Shared (Siamese) linear projection head over precomputed question,
//! rationale and answer embeddings, trained with a two-case contrastive loss.
//!
//! With `f(x) = Wx / |Wx|` and `d(u, v) = 1 − f(u)·f(v)`, a causally valid
//! chain (`y = 1`) costs `d(q, r) + d(r, a)`, and an invalid one (`y = 0`)
//! costs `max(L_qr, L_ra)` with `L = max(0, margin − d)`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CotTriple, TripleEmbeddings};
use crate::error::{EccotError, Result};
use crate::matrix::{dot, norm, Matrix};

pub const HEAD_FORMAT: &str = "causal-head/1";

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    /// D_out×D_in.
    pub weight: Matrix,
}

impl ProjectionHead {
    pub fn new(weight: Matrix) -> Result<Self> {
        if weight.rows() == 0 || weight.cols() == 0 {
            return Err(EccotError::Contract("projection weight must be non-empty".into()));
        }
        if !weight.is_finite() {
            return Err(EccotError::Numeric("projection weight has non-finite entries".into()));
        }
        Ok(ProjectionHead { weight })
    }

    pub fn identity(dim: usize) -> Self {
        ProjectionHead {
            weight: Matrix::identity(dim),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn d_out(&self) -> usize {
        self.weight.rows()
    }

    /// Unit-normalized projection.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.project_raw(x).map(|(f, _)| f)
    }

    /// Returns the unit vector and the pre-normalization norm.
    fn project_raw(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.d_in() {
            return Err(EccotError::Contract(format!(
                "input has dimension {}, head expects {}",
                x.len(),
                self.d_in()
            )));
        }
        let mut u = self.weight.mul_vec(x);
        let n = norm(&u);
        if !n.is_finite() {
            return Err(EccotError::Numeric("non-finite projection".into()));
        }
        if n == 0.0 {
            return Err(EccotError::Domain("projection of input is the zero vector".into()));
        }
        u.iter_mut().for_each(|v| *v /= n);
        Ok((u, n))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&HeadCheckpointRef {
            format: HEAD_FORMAT,
            d_in: self.d_in(),
            d_out: self.d_out(),
            weight: &self.weight,
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let ck: HeadCheckpoint = serde_json::from_str(json)?;
        if ck.format != HEAD_FORMAT {
            return Err(EccotError::Data(format!(
                "unsupported head format {:?} (expected {HEAD_FORMAT:?})",
                ck.format
            )));
        }
        if ck.weight.rows() != ck.d_out || ck.weight.cols() != ck.d_in {
            return Err(EccotError::Data(format!(
                "head weight is {}x{} but header says {}x{}",
                ck.weight.rows(),
                ck.weight.cols(),
                ck.d_out,
                ck.d_in
            )));
        }
        ProjectionHead::new(ck.weight)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| EccotError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| EccotError::io(path, e))?;
        ProjectionHead::from_json(&json)
    }
}

#[derive(Serialize)]
struct HeadCheckpointRef<'a> {
    format: &'a str,
    d_in: usize,
    d_out: usize,
    weight: &'a Matrix,
}

#[derive(Deserialize)]
struct HeadCheckpoint {
    format: String,
    d_in: usize,
    d_out: usize,
    weight: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeStrategy {
    /// Use records already labeled 0.
    Labeled,
    /// Derange rationales across the positive chains.
    ShuffleRationale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub negative_strategy: NegativeStrategy,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            margin: 0.5,
            lr: 0.01,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            negative_strategy: NegativeStrategy::ShuffleRationale,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin <= 2.0) {
            return Err(EccotError::Config(format!(
                "margin must be in (0, 2], got {}",
                self.margin
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(EccotError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(EccotError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// B rows of question, rationale and answer embeddings with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleBatch {
    pub q: Matrix,
    pub r: Matrix,
    pub a: Matrix,
    pub y: Vec<bool>,
}

impl TripleBatch {
    pub fn new(q: Matrix, r: Matrix, a: Matrix, y: Vec<bool>) -> Result<Self> {
        let b = q.rows();
        if r.rows() != b || a.rows() != b || y.len() != b {
            return Err(EccotError::Contract(
                "batch components have different row counts".into(),
            ));
        }
        if r.cols() != q.cols() || a.cols() != q.cols() {
            return Err(EccotError::Contract("batch components have different widths".into()));
        }
        Ok(TripleBatch { q, r, a, y })
    }

    pub fn from_embeddings(samples: &[(&TripleEmbeddings, bool)]) -> Result<Self> {
        let d = samples.first().map_or(0, |(e, _)| e.dim());
        let mut q = Vec::with_capacity(samples.len() * d);
        let mut r = Vec::with_capacity(samples.len() * d);
        let mut a = Vec::with_capacity(samples.len() * d);
        for (e, _) in samples {
            if e.dim() != d {
                return Err(EccotError::Contract(
                    "embeddings in batch have different dimensions".into(),
                ));
            }
            q.extend_from_slice(&e.q);
            r.extend_from_slice(&e.r);
            a.extend_from_slice(&e.a);
        }
        let n = samples.len();
        TripleBatch::new(
            Matrix::from_vec(n, d, q)?,
            Matrix::from_vec(n, d, r)?,
            Matrix::from_vec(n, d, a)?,
            samples.iter().map(|&(_, y)| y).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn hinge(margin: f64, distance: f64) -> f64 {
    (margin - distance).max(0.0)
}

/// `(L_qr, L_ra)` for one chain.
pub fn link_losses(head: &ProjectionHead, q: &[f64], r: &[f64], a: &[f64], y: bool, margin: f64) -> Result<(f64, f64)> {
    let (fq, fr, fa) = (head.project(q)?, head.project(r)?, head.project(a)?);
    let (d_qr, d_ra) = (1.0 - dot(&fq, &fr), 1.0 - dot(&fr, &fa));
    Ok(if y {
        (d_qr, d_ra)
    } else {
        (hinge(margin, d_qr), hinge(margin, d_ra))
    })
}

fn sample_loss(l_qr: f64, l_ra: f64, y: bool) -> f64 {
    if y {
        l_qr + l_ra
    } else {
        l_qr.max(l_ra)
    }
}

/// Mean per-sample loss over the batch.
pub fn contrastive_loss(head: &ProjectionHead, batch: &TripleBatch, margin: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(EccotError::Contract("contrastive_loss on an empty batch".into()));
    }
    let mut total = 0.0;
    for i in 0..batch.len() {
        let (l_qr, l_ra) = link_losses(head, batch.q.row(i), batch.r.row(i), batch.a.row(i), batch.y[i], margin)?;
        total += sample_loss(l_qr, l_ra, batch.y[i]);
    }
    Ok(total / batch.len() as f64)
}

/// Accumulates `scale · ∂(f_u · f_v)/∂W` into `grad`, where `f_x = Wx/|Wx|`.
fn accumulate_cos_grad(
    grad: &mut Matrix,
    scale: f64,
    (fu, nu, xu): (&[f64], f64, &[f64]),
    (fv, nv, xv): (&[f64], f64, &[f64]),
) {
    let c = dot(fu, fv);
    for o in 0..grad.rows() {
        // ∂c/∂(Wx_u)_o = (f_v − c f_u)_o / |Wx_u|
        let gu = scale * (fv[o] - c * fu[o]) / nu;
        let gv = scale * (fu[o] - c * fv[o]) / nv;
        let row = grad.row_mut(o);
        for ((g, &xu_i), &xv_i) in row.iter_mut().zip(xu).zip(xv) {
            *g += gu * xu_i + gv * xv_i;
        }
    }
}

/// Loss and analytic gradient with respect to the head weight. At hinge ties
/// (`L_qr == L_ra` for a negative) the subgradient follows `L_qr`.
pub fn contrastive_loss_and_grad(head: &ProjectionHead, batch: &TripleBatch, margin: f64) -> Result<(f64, Matrix)> {
    if batch.is_empty() {
        return Err(EccotError::Contract("contrastive_loss on an empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = Matrix::zeros(head.d_out(), head.d_in());
    let mut total = 0.0;
    for i in 0..batch.len() {
        let (xq, xr, xa) = (batch.q.row(i), batch.r.row(i), batch.a.row(i));
        let (fq, nq) = head.project_raw(xq)?;
        let (fr, nr) = head.project_raw(xr)?;
        let (fa, na) = head.project_raw(xa)?;
        let (d_qr, d_ra) = (1.0 - dot(&fq, &fr), 1.0 - dot(&fr, &fa));
        let q = (fq.as_slice(), nq, xq);
        let r = (fr.as_slice(), nr, xr);
        let a = (fa.as_slice(), na, xa);
        if batch.y[i] {
            total += d_qr + d_ra;
            // ∂(1 − c)/∂c = −1 for both links
            accumulate_cos_grad(&mut grad, -scale, q, r);
            accumulate_cos_grad(&mut grad, -scale, r, a);
        } else {
            let (l_qr, l_ra) = (hinge(margin, d_qr), hinge(margin, d_ra));
            total += l_qr.max(l_ra);
            // active hinge: ∂(m − 1 + c)/∂c = +1
            if l_qr >= l_ra {
                if l_qr > 0.0 {
                    accumulate_cos_grad(&mut grad, scale, q, r);
                }
            } else {
                accumulate_cos_grad(&mut grad, scale, r, a);
            }
        }
    }
    Ok((total * scale, grad))
}

/// Builds negative (y = 0) chains.
///
/// `ShuffleRationale` applies a seeded cyclic derangement (Sattolo) to the
/// rationales, so every negative pairs a question and answer with someone
/// else's rationale. `Labeled` returns the records already labeled 0.
pub fn make_negatives(triples: &[CotTriple], strategy: NegativeStrategy, seed: u64) -> Result<Vec<CotTriple>> {
    match strategy {
        NegativeStrategy::Labeled => Ok(triples.iter().filter(|t| t.label() == Some(false)).cloned().collect()),
        NegativeStrategy::ShuffleRationale => {
            let n = triples.len();
            if n < 2 {
                return Err(EccotError::Data(format!(
                    "rationale shuffling needs at least 2 chains, got {n}"
                )));
            }
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..n).rev() {
                let j = rng.gen_range(0..i);
                perm.swap(i, j);
            }
            Ok(triples
                .iter()
                .zip(&perm)
                .map(|(t, &src)| {
                    let donor = &triples[src];
                    let mut record = t.record.clone();
                    record.id = format!("{}~neg", t.record.id);
                    record.rationale = donor.record.rationale.clone();
                    record.label = Some(0);
                    let embeddings = match (&t.embeddings, &donor.embeddings) {
                        (Some(e), Some(d)) => Some(TripleEmbeddings {
                            q: e.q.clone(),
                            r: d.r.clone(),
                            a: e.a.clone(),
                        }),
                        _ => None,
                    };
                    CotTriple { record, embeddings }
                })
                .collect())
        }
    }
}

/// One row of the training curve. Epoch 0 is the untrained head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pos_mean_cos_qr: f64,
    pub pos_mean_cos_ra: f64,
    pub neg_mean_cos_qr: f64,
    pub neg_mean_cos_ra: f64,
    /// Mean over positives of min(cos_qr, cos_ra) minus the same over negatives.
    pub min_link_gap: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: ProjectionHead,
    pub curve: Vec<CurvePoint>,
}

fn embeddings_of(t: &CotTriple) -> Result<&TripleEmbeddings> {
    t.embeddings
        .as_ref()
        .ok_or_else(|| EccotError::Contract(format!("triple {:?} has no embeddings", t.id())))
}

fn evaluate(
    head: &ProjectionHead,
    samples: &[(&TripleEmbeddings, bool)],
    margin: f64,
    epoch: usize,
) -> Result<CurvePoint> {
    let mut loss = 0.0;
    let mut pos = [0.0; 3];
    let mut neg = [0.0; 3];
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    for &(e, y) in samples {
        let (fq, fr, fa) = (head.project(&e.q)?, head.project(&e.r)?, head.project(&e.a)?);
        let (c_qr, c_ra) = (dot(&fq, &fr), dot(&fr, &fa));
        let (l_qr, l_ra) = if y {
            (1.0 - c_qr, 1.0 - c_ra)
        } else {
            (hinge(margin, 1.0 - c_qr), hinge(margin, 1.0 - c_ra))
        };
        loss += sample_loss(l_qr, l_ra, y);
        let acc = if y {
            n_pos += 1;
            &mut pos
        } else {
            n_neg += 1;
            &mut neg
        };
        acc[0] += c_qr;
        acc[1] += c_ra;
        acc[2] += c_qr.min(c_ra);
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(CurvePoint {
        epoch,
        mean_loss: loss / samples.len() as f64,
        pos_mean_cos_qr: mean(pos[0], n_pos),
        pos_mean_cos_ra: mean(pos[1], n_pos),
        neg_mean_cos_qr: mean(neg[0], n_neg),
        neg_mean_cos_ra: mean(neg[1], n_neg),
        min_link_gap: mean(pos[2], n_pos) - mean(neg[2], n_neg),
    })
}

/// Seeded mini-batch gradient descent from the identity head. The curve holds
/// full-data statistics before training (epoch 0) and after every epoch.
pub fn train_projection(
    config: &ContrastiveConfig,
    positives: &[CotTriple],
    negatives: &[CotTriple],
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut samples = Vec::with_capacity(positives.len() + negatives.len());
    for t in positives {
        samples.push((embeddings_of(t)?, true));
    }
    for t in negatives {
        samples.push((embeddings_of(t)?, false));
    }
    if samples.is_empty() {
        return Err(EccotError::Data("no training chains".into()));
    }
    let dim = samples[0].0.dim();
    if let Some((e, _)) = samples.iter().find(|(e, _)| e.dim() != dim) {
        return Err(EccotError::Contract(format!(
            "embedding dimensions differ ({dim} vs {})",
            e.dim()
        )));
    }

    let mut head = ProjectionHead::identity(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = vec![evaluate(&head, &samples, config.margin, 0)?];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let picked: Vec<(&TripleEmbeddings, bool)> = chunk.iter().map(|&i| samples[i]).collect();
            let batch = TripleBatch::from_embeddings(&picked)?;
            let (loss, grad) = contrastive_loss_and_grad(&head, &batch, config.margin)?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(EccotError::Numeric(format!(
                    "contrastive training diverged at epoch {epoch}"
                )));
            }
            head.weight.add_scaled(&grad, -config.lr);
        }
        let point = evaluate(&head, &samples, config.margin, epoch)
            .map_err(|e| EccotError::Numeric(format!("contrastive training failed at epoch {epoch}: {e}")))?;
        if !point.mean_loss.is_finite() {
            return Err(EccotError::Numeric(format!(
                "contrastive training diverged at epoch {epoch}"
            )));
        }
        curve.push(point);
    }
    Ok(TrainOutcome { head, curve })
}

/// Unit-norm projections `(q̂, r̂, â)` of one chain.
pub fn embed_triple(head: &ProjectionHead, triple: &CotTriple) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let e = embeddings_of(triple)?;
    Ok((head.project(&e.q)?, head.project(&e.r)?, head.project(&e.a)?))
}

/// Curve CSV: `epoch,mean_loss,pos_mean_cos_qr,pos_mean_cos_ra,neg_mean_cos_qr,neg_mean_cos_ra`.
pub fn write_curve_csv<W: std::io::Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "epoch",
        "mean_loss",
        "pos_mean_cos_qr",
        "pos_mean_cos_ra",
        "neg_mean_cos_qr",
        "neg_mean_cos_ra",
    ])?;
    for p in curve {
        w.write_record([
            p.epoch.to_string(),
            p.mean_loss.to_string(),
            p.pos_mean_cos_qr.to_string(),
            p.pos_mean_cos_ra.to_string(),
            p.neg_mean_cos_qr.to_string(),
            p.neg_mean_cos_ra.to_string(),
        ])?;
    }
    w.flush().map_err(|e| EccotError::io("<curve csv>", e))?;
    Ok(())
}

/// Picks a random unit vector; used by tests and the synthetic generators.
pub(crate) fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TripleRecord;

    fn triple(id: &str, q: Vec<f64>, r: Vec<f64>, a: Vec<f64>, label: Option<u8>) -> CotTriple {
        CotTriple {
            record: TripleRecord {
                id: id.into(),
                question: format!("{id} q"),
                rationale: format!("{id} r"),
                answer: format!("{id} a"),
                label,
            },
            embeddings: Some(TripleEmbeddings::new(q, r, a).unwrap()),
        }
    }

    #[test]
    fn link_losses_zero_for_identical_positive() {
        let h = ProjectionHead::identity(2);
        let v = [0.6, 0.8];
        assert_eq!(link_losses(&h, &v, &v, &v, true, 0.5).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn link_losses_hinge_for_identical_negative() {
        let h = ProjectionHead::identity(2);
        let v = [0.6, 0.8];
        assert_eq!(link_losses(&h, &v, &v, &v, false, 0.5).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn link_losses_from_cosines() {
        // cos(q, r) = 0.8, cos(r, a) = 0.6 with r = e1
        let h = ProjectionHead::identity(2);
        let (l_qr, l_ra) = link_losses(&h, &[0.8, 0.6], &[1.0, 0.0], &[0.6, 0.8], true, 0.5).unwrap();
        assert!((l_qr - 0.2).abs() < 1e-12);
        assert!((l_ra - 0.4).abs() < 1e-12);
    }

    #[test]
    fn link_losses_zero_input_is_domain_error() {
        let h = ProjectionHead::identity(2);
        assert!(matches!(
            link_losses(&h, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], true, 0.5),
            Err(EccotError::Domain(_))
        ));
    }

    #[test]
    fn batch_loss_cases() {
        let h = ProjectionHead::identity(2);
        let v = vec![1.0, 0.0];
        let one = |y| {
            TripleBatch::new(
                Matrix::from_rows(std::slice::from_ref(&v)).unwrap(),
                Matrix::from_rows(std::slice::from_ref(&v)).unwrap(),
                Matrix::from_rows(std::slice::from_ref(&v)).unwrap(),
                vec![y],
            )
            .unwrap()
        };
        assert_eq!(contrastive_loss(&h, &one(true), 0.5).unwrap(), 0.0);
        assert_eq!(contrastive_loss(&h, &one(false), 0.5).unwrap(), 0.5);
        let both = TripleBatch::new(
            Matrix::from_rows(&[v.clone(), v.clone()]).unwrap(),
            Matrix::from_rows(&[v.clone(), v.clone()]).unwrap(),
            Matrix::from_rows(&[v.clone(), v.clone()]).unwrap(),
            vec![true, false],
        )
        .unwrap();
        assert_eq!(contrastive_loss(&h, &both, 0.5).unwrap(), 0.25);
        let empty = TripleBatch::new(Matrix::zeros(0, 2), Matrix::zeros(0, 2), Matrix::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(
            contrastive_loss(&h, &empty, 0.5),
            Err(EccotError::Contract(_))
        ));
    }

    #[test]
    fn negatives_swap_for_two() {
        let ts = vec![
            triple("a", vec![1.0, 0.0], vec![1.0, 0.1], vec![1.0, 0.2], Some(1)),
            triple("b", vec![0.0, 1.0], vec![0.1, 1.0], vec![0.2, 1.0], Some(1)),
        ];
        let neg = make_negatives(&ts, NegativeStrategy::ShuffleRationale, 3).unwrap();
        assert_eq!(neg.len(), 2);
        assert_eq!(neg[0].record.rationale, "b r");
        assert_eq!(neg[1].record.rationale, "a r");
        assert_eq!(neg[0].embeddings.as_ref().unwrap().r, vec![0.1, 1.0]);
        assert_eq!(neg[0].embeddings.as_ref().unwrap().q, vec![1.0, 0.0]);
        assert!(neg.iter().all(|t| t.label() == Some(false)));
    }

    #[test]
    fn negatives_are_derangements() {
        let ts: Vec<CotTriple> = (0..9)
            .map(|i| {
                triple(
                    &format!("t{i}"),
                    vec![1.0, i as f64],
                    vec![2.0, i as f64],
                    vec![3.0, i as f64],
                    None,
                )
            })
            .collect();
        for seed in 0..20 {
            let neg = make_negatives(&ts, NegativeStrategy::ShuffleRationale, seed).unwrap();
            assert_eq!(neg.len(), ts.len());
            for (n, t) in neg.iter().zip(&ts) {
                assert_ne!(n.record.rationale, t.record.rationale);
            }
        }
    }

    #[test]
    fn negatives_need_two() {
        let ts = vec![triple("a", vec![1.0], vec![1.0], vec![1.0], None)];
        assert!(make_negatives(&ts, NegativeStrategy::ShuffleRationale, 0).is_err());
    }

    #[test]
    fn labeled_negatives_pass_through() {
        let ts = vec![
            triple("a", vec![1.0], vec![1.0], vec![1.0], Some(1)),
            triple("b", vec![1.0], vec![1.0], vec![1.0], Some(0)),
            triple("c", vec![1.0], vec![1.0], vec![1.0], None),
        ];
        let neg = make_negatives(&ts, NegativeStrategy::Labeled, 0).unwrap();
        assert_eq!(neg.len(), 1);
        assert_eq!(neg[0].id(), "b");
    }

    #[test]
    fn separated_data_is_a_fixed_point() {
        let pos = vec![
            triple(
                "p0",
                vec![1.0, 0.0, 0.0],
                vec![2.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0],
                Some(1),
            ),
            triple(
                "p1",
                vec![0.0, 1.0, 0.0],
                vec![0.0, 3.0, 0.0],
                vec![0.0, 1.0, 0.0],
                Some(1),
            ),
        ];
        let neg = vec![
            triple(
                "n0",
                vec![1.0, 0.0, 0.0],
                vec![-1.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                Some(0),
            ),
            triple(
                "n1",
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, -2.0],
                vec![0.0, 0.0, 1.0],
                Some(0),
            ),
        ];
        let cfg = ContrastiveConfig {
            epochs: 5,
            ..Default::default()
        };
        let out = train_projection(&cfg, &pos, &neg).unwrap();
        assert!(out.curve[0].mean_loss < 1e-6);
        assert_eq!(out.head.weight, Matrix::identity(3));
    }

    #[test]
    fn embed_triple_identity_and_scale_invariance() {
        let h = ProjectionHead::identity(2);
        let t = triple("a", vec![0.6, 0.8], vec![1.0, 0.0], vec![0.0, 1.0], None);
        let (q, r, a) = embed_triple(&h, &t).unwrap();
        assert_eq!((q, r, a), (vec![0.6, 0.8], vec![1.0, 0.0], vec![0.0, 1.0]));

        let h = ProjectionHead::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.2, 0.2]]).unwrap())
            .unwrap();
        let t3 = triple("b", vec![1.8, 2.4], vec![3.0, 0.0], vec![0.0, 3.0], None);
        let (q1, _, _) = embed_triple(&h, &t).unwrap();
        let (q3, _, _) = embed_triple(&h, &t3).unwrap();
        assert!((norm(&q1) - 1.0).abs() < 1e-9);
        for (x, y) in q1.iter().zip(&q3) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn head_json_round_trip() {
        let h = ProjectionHead::new(Matrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-7e-9, 2.0]]).unwrap()).unwrap();
        let json = h.to_json().unwrap();
        assert!(json.starts_with("{\"format\":\"causal-head/1\",\"d_in\":2,\"d_out\":2,\"weight\":"));
        assert_eq!(ProjectionHead::from_json(&json).unwrap(), h);
        assert!(ProjectionHead::from_json(&json.replace("\"d_in\":2", "\"d_in\":3")).is_err());
    }

    #[test]
    fn config_bounds() {
        let mut c = ContrastiveConfig::default();
        assert!(c.validate().is_ok());
        c.margin = 2.5;
        assert!(c.validate().is_err());
        c.margin = 0.0;
        assert!(c.validate().is_err());
    }
}
