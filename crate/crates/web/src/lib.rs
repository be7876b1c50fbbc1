//! Browser bindings over `eccot-core`, all driven by the bundled synthetic
//! generators. Every export returns a JSON string for the page to render.

use eccot_core::causal::{train_projection, ContrastiveConfig, CurvePoint};
use eccot_core::corpus::{build_pair_set, build_vocabulary, tokenize_corpus, CotTriple, TokenizeConfig};
use eccot_core::etm::{fit, top_words, EtmLossReport, MrfEtmConfig};
use eccot_core::rank::{score_distribution, score_triples, truncate, FilterConfig, HistogramBin};
use eccot_core::synthetic::{causal_triples, topic_corpus, CausalSpec, TopicCorpusSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct TopicView {
    words: Vec<(String, f64)>,
    /// Ground-truth topic this one overlaps most, and how many of its top
    /// words fall in it.
    matched_truth: usize,
    overlap: usize,
}

#[derive(Serialize)]
struct TopicsResult {
    topics: Vec<TopicView>,
    truth: Vec<Vec<String>>,
    loss: Vec<EtmLossReport>,
    pairs: usize,
}

pub fn fit_topics_json(seed: u64, num_topics: usize, lambda: f64, epochs: usize) -> Result<String, String> {
    let corpus = topic_corpus(&TopicCorpusSpec {
        num_docs: 120,
        seed,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let tokens = tokenize_corpus(&corpus.docs, &TokenizeConfig::default()).map_err(|e| e.to_string())?;
    let (vocab, docs) = build_vocabulary(&tokens, 1, usize::MAX).map_err(|e| e.to_string())?;
    let pairs = build_pair_set(&docs, vocab.len(), 10, 5).map_err(|e| e.to_string())?;
    let cfg = MrfEtmConfig {
        lambda,
        epochs,
        seed,
        ..MrfEtmConfig::new(num_topics, 8)
    };
    let out = fit(&cfg, vocab, &docs, &pairs, None).map_err(|e| e.to_string())?;
    let topics = (0..num_topics)
        .map(|k| {
            let words = top_words(&out.model, k, 5).map_err(|e| e.to_string())?;
            let (matched_truth, overlap) = corpus
                .topic_words
                .iter()
                .enumerate()
                .map(|(g, truth)| (g, words.iter().filter(|(w, _)| truth.contains(w)).count()))
                .max_by_key(|&(g, n)| (n, std::cmp::Reverse(g)))
                .unwrap_or((0, 0));
            Ok(TopicView {
                words,
                matched_truth,
                overlap,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&TopicsResult {
        topics,
        truth: corpus.topic_words,
        loss: out.reports,
        pairs: pairs.len(),
    })
    .map_err(|e| e.to_string())
}

fn train(seed: u64, margin: f64, epochs: usize) -> Result<(Vec<CotTriple>, eccot_core::causal::TrainOutcome), String> {
    let all = causal_triples(&CausalSpec {
        seed,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let (pos, neg): (Vec<CotTriple>, Vec<CotTriple>) = all.iter().cloned().partition(|t| t.label() == Some(true));
    let cfg = ContrastiveConfig {
        margin,
        epochs,
        seed,
        ..Default::default()
    };
    let out = train_projection(&cfg, &pos, &neg).map_err(|e| e.to_string())?;
    Ok((all, out))
}

#[derive(Serialize)]
struct CausalResult {
    curve: Vec<CurvePoint>,
}

pub fn train_causal_json(seed: u64, margin: f64, epochs: usize) -> Result<String, String> {
    let (_, out) = train(seed, margin, epochs)?;
    serde_json::to_string(&CausalResult { curve: out.curve }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Point {
    id: String,
    coefficient: f64,
    positive: bool,
    kept: bool,
}

#[derive(Serialize)]
struct RankResult {
    points: Vec<Point>,
    histogram: Vec<HistogramBin>,
    quantiles: Vec<(f64, f64)>,
    kept: usize,
    dropped: usize,
    /// Kept chains that are deranged negatives.
    kept_negatives: usize,
}

pub fn rank_truncate_json(seed: u64, epochs: usize, tau: f64) -> Result<String, String> {
    let (all, out) = train(seed, ContrastiveConfig::default().margin, epochs)?;
    let scores = score_triples(&out.head, &all).map_err(|e| e.to_string())?;
    let dist = score_distribution(&scores, &[0.1, 0.25, 0.5, 0.75, 0.9]).map_err(|e| e.to_string())?;
    let (kept, dropped) = truncate(&scores, &FilterConfig { tau }).map_err(|e| e.to_string())?;
    let label = |id: &str| all.iter().find(|t| t.id() == id).and_then(CotTriple::label) == Some(true);
    let points: Vec<Point> = dropped
        .iter()
        .chain(&kept)
        .map(|s| Point {
            id: s.triple_id.clone(),
            coefficient: s.coefficient,
            positive: label(&s.triple_id),
            kept: s.kept,
        })
        .collect();
    let kept_negatives = points.iter().filter(|p| p.kept && !p.positive).count();
    serde_json::to_string(&RankResult {
        points,
        histogram: dist.histogram,
        quantiles: dist.quantiles,
        kept: kept.len(),
        dropped: dropped.len(),
        kept_negatives,
    })
    .map_err(|e| e.to_string())
}

/// Fits the topic model on a seeded synthetic corpus of three themes.
#[wasm_bindgen]
pub fn fit_topics(seed: u32, num_topics: u32, lambda: f64, epochs: u32) -> Result<String, JsValue> {
    fit_topics_json(seed.into(), num_topics as usize, lambda, epochs as usize).map_err(|e| JsValue::from_str(&e))
}

/// Trains the projection head on synthetic chains; returns the per-epoch curve.
#[wasm_bindgen]
pub fn train_causal(seed: u32, margin: f64, epochs: u32) -> Result<String, JsValue> {
    train_causal_json(seed.into(), margin, epochs as usize).map_err(|e| JsValue::from_str(&e))
}

/// Trains, scores every chain, and drops the lowest `tau` fraction.
#[wasm_bindgen]
pub fn rank_truncate(seed: u32, epochs: u32, tau: f64) -> Result<String, JsValue> {
    rank_truncate_json(seed.into(), epochs as usize, tau).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn topics_payload() {
        let v: Value = serde_json::from_str(&fit_topics_json(1, 3, 0.01, 10).unwrap()).unwrap();
        assert_eq!(v["topics"].as_array().unwrap().len(), 3);
        assert_eq!(v["loss"].as_array().unwrap().len(), 10);
        assert_eq!(v["truth"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn causal_payload() {
        let v: Value = serde_json::from_str(&train_causal_json(1, 0.5, 5).unwrap()).unwrap();
        assert_eq!(v["curve"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn rank_payload() {
        let v: Value = serde_json::from_str(&rank_truncate_json(1, 50, 0.5).unwrap()).unwrap();
        assert_eq!(v["kept"], 60);
        assert_eq!(v["dropped"], 60);
        assert_eq!(v["points"].as_array().unwrap().len(), 120);
        assert_eq!(v["histogram"].as_array().unwrap().len(), 40);
    }

    #[test]
    fn bad_tau_is_an_error() {
        assert!(rank_truncate_json(1, 1, 1.0).is_err());
    }
}
