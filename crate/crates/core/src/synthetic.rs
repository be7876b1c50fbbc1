//! Seeded generators for the bundled synthetic data: a topic corpus drawn
//! from disjoint-support ground-truth topics, and labeled reasoning chains
//! with precomputed embeddings.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::causal::{make_negatives, random_unit, NegativeStrategy};
use crate::corpus::{write_embeddings, CotTriple, EmbeddingTable, TripleEmbeddings, TripleRecord};
use crate::error::{EccotError, Result};

const THEMES: [[&str; 10]; 6] = [
    [
        "ocean", "wave", "ship", "harbor", "sail", "tide", "anchor", "coral", "reef", "shore",
    ],
    [
        "planet",
        "orbit",
        "comet",
        "galaxy",
        "rocket",
        "nebula",
        "asteroid",
        "telescope",
        "moon",
        "star",
    ],
    [
        "bread", "flour", "oven", "yeast", "dough", "butter", "sugar", "crust", "bake", "knead",
    ],
    [
        "violin", "melody", "rhythm", "chord", "tempo", "piano", "choir", "octave", "sonata", "drum",
    ],
    [
        "forest", "pine", "moss", "fern", "oak", "trail", "canopy", "birch", "root", "bark",
    ],
    [
        "circuit",
        "voltage",
        "current",
        "resistor",
        "diode",
        "capacitor",
        "signal",
        "wire",
        "battery",
        "switch",
    ],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCorpusSpec {
    pub num_topics: usize,
    pub words_per_topic: usize,
    pub num_docs: usize,
    pub tokens_per_doc: usize,
    /// Symmetric Dirichlet concentration for document–topic mixtures.
    pub doc_concentration: f64,
    pub seed: u64,
}

impl Default for TopicCorpusSpec {
    fn default() -> Self {
        TopicCorpusSpec {
            num_topics: 3,
            words_per_topic: 10,
            num_docs: 200,
            tokens_per_doc: 50,
            doc_concentration: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpus {
    /// `(id, text)` documents.
    pub docs: Vec<(String, String)>,
    /// Ground-truth support of each topic.
    pub topic_words: Vec<Vec<String>>,
}

fn topic_word(topic: usize, j: usize) -> String {
    match THEMES.get(topic).and_then(|t| t.get(j)) {
        Some(w) => w.to_string(),
        None => format!("topic{topic}word{j}"),
    }
}

/// Each document draws θ ~ Dirichlet(c) and every token draws a topic from θ
/// and then a word uniformly from that topic's support.
pub fn topic_corpus(spec: &TopicCorpusSpec) -> Result<TopicCorpus> {
    if spec.num_topics == 0 || spec.words_per_topic == 0 {
        return Err(EccotError::Config("synthetic corpus needs topics and words".into()));
    }
    let topic_words: Vec<Vec<String>> = (0..spec.num_topics)
        .map(|k| (0..spec.words_per_topic).map(|j| topic_word(k, j)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let docs = (0..spec.num_docs)
        .map(|i| {
            let theta: Vec<f64> = if spec.num_topics == 1 {
                vec![1.0]
            } else {
                Dirichlet::new_with_size(spec.doc_concentration, spec.num_topics)
                    .map_err(|e| EccotError::Config(e.to_string()))?
                    .sample(&mut rng)
            };
            let words: Vec<&str> = (0..spec.tokens_per_doc)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut topic = spec.num_topics - 1;
                    for (k, &t) in theta.iter().enumerate() {
                        acc += t;
                        if u < acc {
                            topic = k;
                            break;
                        }
                    }
                    topic_words[topic][rng.gen_range(0..spec.words_per_topic)].as_str()
                })
                .collect();
            Ok((format!("doc{i:04}"), words.join(" ")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TopicCorpus { docs, topic_words })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalSpec {
    /// Number of valid chains; the same number of deranged negatives is added.
    pub num_chains: usize,
    pub dim: usize,
    /// Weight of the direction shared by every sentence embedding.
    pub common_weight: f64,
    /// Per-coordinate Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for CausalSpec {
    fn default() -> Self {
        CausalSpec {
            num_chains: 60,
            dim: 32,
            common_weight: 2.0,
            noise: 0.03,
            seed: 0,
        }
    }
}

/// Valid chains share a per-chain content vector across q, r and a, on top
/// of a common direction every embedding carries (so raw cosines are high
/// for everything). Negatives swap in another chain's rationale.
///
/// Returns positives (label 1) followed by negatives (label 0).
pub fn causal_triples(spec: &CausalSpec) -> Result<Vec<CotTriple>> {
    if spec.num_chains < 2 || spec.dim < 2 {
        return Err(EccotError::Config("need at least 2 chains and dimension 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| EccotError::Config(e.to_string()))?;
    let common = random_unit(spec.dim, &mut rng);
    let sentence = |content: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        content
            .iter()
            .zip(&common)
            .map(|(z, c)| spec.common_weight * c + z + noise.sample(rng))
            .collect()
    };
    let mut positives = Vec::with_capacity(spec.num_chains);
    for i in 0..spec.num_chains {
        let content = random_unit(spec.dim, &mut rng);
        let q = sentence(&content, &mut rng);
        let r = sentence(&content, &mut rng);
        let a = sentence(&content, &mut rng);
        positives.push(CotTriple {
            record: TripleRecord {
                id: format!("c{i:04}"),
                question: format!("What follows from premise {i}?"),
                rationale: format!("Premise {i} implies step {i}, and step {i} yields conclusion {i}."),
                answer: format!("Conclusion {i}."),
                label: Some(1),
            },
            embeddings: Some(TripleEmbeddings::new(q, r, a)?),
        });
    }
    let negatives = make_negatives(
        &positives,
        NegativeStrategy::ShuffleRationale,
        spec.seed.wrapping_add(1),
    )?;
    positives.extend(negatives);
    Ok(positives)
}

/// Embedding table with `<id>.q`, `<id>.r`, `<id>.a` rows.
pub fn embedding_table(triples: &[CotTriple]) -> Result<EmbeddingTable> {
    let dim = triples
        .iter()
        .find_map(|t| t.embeddings.as_ref().map(TripleEmbeddings::dim))
        .ok_or_else(|| EccotError::Data("no embeddings to export".into()))?;
    let mut table = EmbeddingTable::new(dim)?;
    for t in triples {
        let e = t
            .embeddings
            .as_ref()
            .ok_or_else(|| EccotError::MissingEmbedding(t.id().to_string()))?;
        table.insert(format!("{}.q", t.id()), e.q.clone())?;
        table.insert(format!("{}.r", t.id()), e.r.clone())?;
        table.insert(format!("{}.a", t.id()), e.a.clone())?;
    }
    Ok(table)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| EccotError::io(path, e))
}

pub fn write_corpus_jsonl(docs: &[(String, String)], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for (id, text) in docs {
        writeln!(out, "{}", serde_json::json!({ "id": id, "text": text })).map_err(|e| EccotError::io(path, e))?;
    }
    out.flush().map_err(|e| EccotError::io(path, e))
}

pub fn write_triples_jsonl(triples: &[CotTriple], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for t in triples {
        writeln!(out, "{}", serde_json::to_string(&t.record)?).map_err(|e| EccotError::io(path, e))?;
    }
    out.flush().map_err(|e| EccotError::io(path, e))
}

pub fn write_embeddings_jsonl(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_embeddings(table, &mut out)?;
    out.flush().map_err(|e| EccotError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::cosine;

    #[test]
    fn corpus_uses_only_topic_words() {
        let spec = TopicCorpusSpec {
            num_docs: 20,
            ..Default::default()
        };
        let c = topic_corpus(&spec).unwrap();
        assert_eq!(c.docs.len(), 20);
        let all: std::collections::HashSet<&str> = c.topic_words.iter().flatten().map(String::as_str).collect();
        assert_eq!(all.len(), 30);
        for (_, text) in &c.docs {
            let toks: Vec<&str> = text.split(' ').collect();
            assert_eq!(toks.len(), 50);
            assert!(toks.iter().all(|t| all.contains(t)));
        }
        assert_eq!(topic_corpus(&spec).unwrap(), c);
    }

    #[test]
    fn causal_positives_closer_than_negatives() {
        let t = causal_triples(&CausalSpec::default()).unwrap();
        assert_eq!(t.len(), 120);
        let link = |t: &CotTriple| {
            let e = t.embeddings.as_ref().unwrap();
            cosine(&e.q, &e.r).min(cosine(&e.r, &e.a))
        };
        let pos: f64 = t[..60].iter().map(link).sum::<f64>() / 60.0;
        let neg: f64 = t[60..].iter().map(link).sum::<f64>() / 60.0;
        assert!(pos > neg);
        assert!(t[60..].iter().all(|x| x.label() == Some(false)));
    }
}
