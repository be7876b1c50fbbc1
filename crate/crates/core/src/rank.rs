//! Per-chain similarity coefficients, their empirical distribution, and
//! rank-count truncation of the low tail.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::causal::{embed_triple, ProjectionHead};
use crate::corpus::CotTriple;
use crate::error::{EccotError, Result};
use crate::matrix::{dot, norm};

pub const HISTOGRAM_BINS: usize = 40;
const UNIT_TOL: f64 = 1e-6;
// absorbs representation error in products like 0.3 * 10
const COUNT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitionScore {
    pub triple_id: String,
    pub cos_qr: f64,
    pub cos_ra: f64,
    pub coefficient: f64,
    /// 1-based ascending rank by coefficient, ties by id.
    pub rank: usize,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Fraction of chains dropped from the low end, in [0, 1).
    pub tau: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { tau: 0.2 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau) {
            return Err(EccotError::Config(format!("tau must be in [0, 1), got {}", self.tau)));
        }
        Ok(())
    }

    /// ⌊τN⌋
    pub fn drop_count(&self, n: usize) -> usize {
        ((self.tau * n as f64 + COUNT_EPS).floor() as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub sorted_coefficients: Vec<f64>,
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Vec<HistogramBin>,
}

/// `(cos(q̂, r̂), cos(r̂, â), min of the two)` for unit vectors.
pub fn similarity_coefficient(q: &[f64], r: &[f64], a: &[f64]) -> Result<(f64, f64, f64)> {
    for (name, v) in [("q", q), ("r", r), ("a", a)] {
        let n = norm(v);
        if n.is_nan() || (n - 1.0).abs() > UNIT_TOL {
            return Err(EccotError::Contract(format!(
                "{name} is not unit-norm (|{name}| = {n})"
            )));
        }
    }
    if q.len() != r.len() || r.len() != a.len() {
        return Err(EccotError::Contract("vectors have different dimensions".into()));
    }
    let (c_qr, c_ra) = (dot(q, r), dot(r, a));
    Ok((c_qr, c_ra, c_qr.min(c_ra)))
}

fn by_coefficient(a: &CognitionScore, b: &CognitionScore) -> Ordering {
    a.coefficient
        .total_cmp(&b.coefficient)
        .then_with(|| a.triple_id.cmp(&b.triple_id))
}

/// Sorts ascending by (coefficient, id) and writes 1-based ranks.
pub fn assign_ranks(scores: &mut [CognitionScore]) {
    scores.sort_by(by_coefficient);
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank = i + 1;
    }
}

/// Projects every chain and scores it. Output is in input order with ranks
/// assigned and every chain marked kept.
pub fn score_triples(head: &ProjectionHead, triples: &[CotTriple]) -> Result<Vec<CognitionScore>> {
    let mut scores = triples
        .iter()
        .map(|t| {
            let (q, r, a) = embed_triple(head, t)?;
            let (cos_qr, cos_ra, coefficient) = similarity_coefficient(&q, &r, &a)?;
            Ok(CognitionScore {
                triple_id: t.id().to_string(),
                cos_qr,
                cos_ra,
                coefficient,
                rank: 0,
                kept: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&i, &j| by_coefficient(&scores[i], &scores[j]));
    for (r, i) in ranked.into_iter().enumerate() {
        scores[i].rank = r + 1;
    }
    Ok(scores)
}

/// Order statistic at 1-based index max(1, ⌈pN⌉) of an ascending sequence.
pub fn quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(EccotError::Data("quantile of an empty sequence".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(EccotError::Config(format!("quantile level must be in (0, 1], got {p}")));
    }
    let n = sorted.len();
    let idx = ((p * n as f64 - COUNT_EPS).ceil() as usize).clamp(1, n);
    Ok(sorted[idx - 1])
}

pub fn score_distribution(scores: &[CognitionScore], requested_quantiles: &[f64]) -> Result<ScoreDistribution> {
    if scores.is_empty() {
        return Err(EccotError::Data("no scores to summarize".into()));
    }
    let mut sorted: Vec<&CognitionScore> = scores.iter().collect();
    sorted.sort_by(|a, b| by_coefficient(a, b));
    let sorted_coefficients: Vec<f64> = sorted.iter().map(|s| s.coefficient).collect();
    let quantiles = requested_quantiles
        .iter()
        .map(|&p| Ok((p, quantile(&sorted_coefficients, p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreDistribution {
        histogram: histogram(&sorted_coefficients),
        sorted_coefficients,
        quantiles,
    })
}

/// Fixed-width bins over [−1, 1]; the last bin is closed on the right and
/// out-of-range values are clamped into the end bins.
pub fn histogram(values: &[f64]) -> Vec<HistogramBin> {
    let width = 2.0 / HISTOGRAM_BINS as f64;
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin {
            low: -1.0 + i as f64 * width,
            high: -1.0 + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let i = (((v + 1.0) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        bins[i].count += 1;
    }
    bins
}

/// Drops exactly ⌊τN⌋ lowest-ranked chains. Both halves come back in
/// ascending (coefficient, id) order with ranks and `kept` flags set.
pub fn truncate(
    scores: &[CognitionScore],
    config: &FilterConfig,
) -> Result<(Vec<CognitionScore>, Vec<CognitionScore>)> {
    config.validate()?;
    if scores.is_empty() {
        return Err(EccotError::Data("no scores to truncate".into()));
    }
    let mut sorted = scores.to_vec();
    assign_ranks(&mut sorted);
    let k = config.drop_count(sorted.len());
    let kept = sorted.split_off(k);
    let mut dropped = sorted;
    dropped.iter_mut().for_each(|s| s.kept = false);
    let kept = kept
        .into_iter()
        .map(|mut s| {
            s.kept = true;
            s
        })
        .collect();
    Ok((kept, dropped))
}

/// Scores CSV: `triple_id,cos_qr,cos_ra,coefficient,rank,kept`.
pub fn write_scores_csv<W: std::io::Write>(scores: &[CognitionScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["triple_id", "cos_qr", "cos_ra", "coefficient", "rank", "kept"])?;
    for s in scores {
        w.write_record([
            s.triple_id.clone(),
            s.cos_qr.to_string(),
            s.cos_ra.to_string(),
            s.coefficient.to_string(),
            s.rank.to_string(),
            s.kept.to_string(),
        ])?;
    }
    w.flush().map_err(|e| EccotError::io("<scores csv>", e))?;
    Ok(())
}

/// Histogram CSV: `bin_low,bin_high,count`.
pub fn write_histogram_csv<W: std::io::Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_low", "bin_high", "count"])?;
    for b in bins {
        w.write_record([b.low.to_string(), b.high.to_string(), b.count.to_string()])?;
    }
    w.flush().map_err(|e| EccotError::io("<histogram csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(id: &str, c: f64) -> CognitionScore {
        CognitionScore {
            triple_id: id.into(),
            cos_qr: c,
            cos_ra: c,
            coefficient: c,
            rank: 0,
            kept: true,
        }
    }

    #[test]
    fn coefficient_identical() {
        let v = [0.6, 0.8];
        assert_eq!(similarity_coefficient(&v, &v, &v).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn coefficient_orthogonal_answer() {
        let q = [0.9, (1.0f64 - 0.81).sqrt()];
        let r = [1.0, 0.0];
        let a = [0.0, 1.0];
        let (c_qr, c_ra, c) = similarity_coefficient(&q, &r, &a).unwrap();
        assert!((c_qr - 0.9).abs() < 1e-12);
        assert_eq!(c_ra, 0.0);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn coefficient_is_min() {
        let r = [1.0, 0.0];
        let q = [0.9, (1.0f64 - 0.81).sqrt()];
        let a = [0.4, (1.0f64 - 0.16).sqrt()];
        let (_, _, c) = similarity_coefficient(&q, &r, &a).unwrap();
        assert!((c - 0.4).abs() < 1e-12);
    }

    #[test]
    fn coefficient_rejects_non_unit() {
        assert!(matches!(
            similarity_coefficient(&[2.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]),
            Err(EccotError::Contract(_))
        ));
    }

    #[test]
    fn distribution_quantiles() {
        let s = vec![score("c", 0.9), score("a", 0.1), score("b", 0.5)];
        let d = score_distribution(&s, &[0.5, 1e-9, 1.0]).unwrap();
        assert_eq!(d.sorted_coefficients, vec![0.1, 0.5, 0.9]);
        assert_eq!(d.quantiles, vec![(0.5, 0.5), (1e-9, 0.1), (1.0, 0.9)]);
        assert_eq!(d.histogram.len(), HISTOGRAM_BINS);
        assert_eq!(d.histogram.iter().map(|b| b.count).sum::<usize>(), 3);
    }

    #[test]
    fn distribution_degenerate() {
        let s: Vec<_> = (0..7).map(|i| score(&format!("t{i}"), 0.3)).collect();
        let d = score_distribution(&s, &[0.1, 0.25, 0.5, 0.9, 1.0]).unwrap();
        assert!(d.quantiles.iter().all(|&(_, v)| v == 0.3));
        assert!(score_distribution(&[], &[0.5]).is_err());
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[-1.0, 1.0, 0.0, -0.95, 1.5]);
        assert_eq!(h[0].count, 1);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[20].count, 1);
        assert_eq!(h[39].count, 2);
        assert_eq!(h[0].low, -1.0);
        assert!((h[39].high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncate_drops_lowest() {
        let s = vec![score("a", 0.9), score("b", 0.5), score("c", 0.1)];
        let (kept, dropped) = truncate(&s, &FilterConfig { tau: 1.0 / 3.0 }).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].triple_id, "c");
        assert!(!dropped[0].kept);
        assert!(kept.iter().all(|s| s.kept));
    }

    #[test]
    fn truncate_tau_zero_keeps_all() {
        let s = vec![score("a", 0.9), score("b", -0.5)];
        let (kept, dropped) = truncate(&s, &FilterConfig { tau: 0.0 }).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(dropped.is_empty());
    }

    #[test]
    fn truncate_ties_by_id() {
        let s: Vec<_> = (0..10).rev().map(|i| score(&format!("t{i}"), 0.5)).collect();
        let (_, dropped) = truncate(&s, &FilterConfig { tau: 0.3 }).unwrap();
        let ids: Vec<_> = dropped.iter().map(|s| s.triple_id.as_str()).collect();
        assert_eq!(ids, ["t0", "t1", "t2"]);
    }

    #[test]
    fn truncate_rejects_bad_tau() {
        let s = vec![score("a", 0.9)];
        assert!(matches!(
            truncate(&s, &FilterConfig { tau: 1.0 }),
            Err(EccotError::Config(_))
        ));
        assert!(matches!(
            truncate(&s, &FilterConfig { tau: -0.1 }),
            Err(EccotError::Config(_))
        ));
        assert!(matches!(
            truncate(&[], &FilterConfig { tau: 0.1 }),
            Err(EccotError::Data(_))
        ));
    }

    #[test]
    fn drop_count_absorbs_rounding() {
        assert_eq!(FilterConfig { tau: 0.29 }.drop_count(100), 29);
        assert_eq!(FilterConfig { tau: 0.3 }.drop_count(10), 3);
        assert_eq!(FilterConfig { tau: 0.2 }.drop_count(1), 0);
    }
}
