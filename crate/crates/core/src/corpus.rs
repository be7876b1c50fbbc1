//! Corpus ingestion: tokenization, vocabulary construction, related-pair
//! mining, and the JSON-lines loaders for corpora, reasoning-chain triples,
//! embedding tables and pair override files.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EccotError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<usize>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<usize>) -> Self {
        Document { id: id.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Ordered term list with its inverse index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit term order. Terms must be unique.
    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(EccotError::DuplicateId(t.clone()));
            }
        }
        Ok(Vocabulary { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, idx: usize) -> Option<&str> {
        self.terms.get(idx).map(String::as_str)
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Maps tokens to indices, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.get(t.as_ref())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizeConfig {
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        TokenizeConfig {
            stopwords: BTreeSet::new(),
            min_token_len: 2,
        }
    }
}

/// Lowercases and splits on anything that is not alphanumeric. Tokens
/// shorter than `min_token_len` characters and stopwords are removed.
pub fn tokenize(text: &str, rules: &TokenizeConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= rules.min_token_len && !rules.stopwords.contains(t))
        .collect()
}

pub fn tokenize_corpus(raw_docs: &[(String, String)], rules: &TokenizeConfig) -> Result<Vec<(String, Vec<String>)>> {
    let mut seen = HashSet::with_capacity(raw_docs.len());
    raw_docs
        .iter()
        .map(|(id, text)| {
            if !seen.insert(id.as_str()) {
                return Err(EccotError::DuplicateId(id.clone()));
            }
            Ok((id.clone(), tokenize(text, rules)))
        })
        .collect()
}

/// Counts term frequencies, keeps terms with count ≥ `min_count`, the top
/// `max_vocab` of them by (descending count, ascending term), and re-encodes
/// the documents with out-of-vocabulary tokens removed. Documents that end
/// up empty are still returned; see [`split_trainable`].
pub fn build_vocabulary(
    token_docs: &[(String, Vec<String>)],
    min_count: usize,
    max_vocab: usize,
) -> Result<(Vocabulary, Vec<Document>)> {
    if min_count < 1 {
        return Err(EccotError::Config("min_count must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, tokens) in token_docs {
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    // BTreeMap iteration is already lexicographic; the stable sort keeps that as tie-break
    ranked.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
    ranked.truncate(max_vocab);
    if ranked.is_empty() {
        return Err(EccotError::EmptyVocabulary);
    }
    let vocab = Vocabulary::from_terms(ranked.into_iter().map(|(t, _)| t.to_string()).collect())?;
    let docs = token_docs
        .iter()
        .map(|(id, tokens)| Document::new(id.clone(), vocab.encode(tokens)))
        .collect();
    Ok((vocab, docs))
}

/// Splits documents into the non-empty ones used for training and the ids of
/// those excluded because nothing survived out-of-vocabulary removal.
pub fn split_trainable(docs: Vec<Document>) -> (Vec<Document>, Vec<String>) {
    let (keep, drop): (Vec<_>, Vec<_>) = docs.into_iter().partition(|d| !d.is_empty());
    (keep, drop.into_iter().map(|d| d.id).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Mined,
    External,
}

/// Set of unordered related-word index pairs, stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPairSet {
    pairs: BTreeSet<(usize, usize)>,
    pub source: PairSource,
}

impl WordPairSet {
    pub fn new(source: PairSource) -> Self {
        WordPairSet {
            pairs: BTreeSet::new(),
            source,
        }
    }

    /// Inserts the unordered pair; self-pairs are ignored. Returns whether the
    /// set changed.
    pub fn insert(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        self.pairs.insert((a.min(b), a.max(b)))
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

/// Mines related pairs from windowed co-occurrence.
///
/// Two positions `i < j` in the same document co-occur when `j - i < window`
/// (so `window = 2` means adjacent tokens). A pair `(m, n)`, `m != n`, is kept
/// when its co-occurrence count is at least `min_cooc` and
/// `PMI = ln( (c_mn / W) / ((c_m / T)(c_n / T)) ) > 0`, where `W` is the total
/// number of co-occurring position pairs and `T` the total token count.
pub fn build_pair_set(docs: &[Document], vocab_size: usize, window: usize, min_cooc: usize) -> Result<WordPairSet> {
    if window < 1 {
        return Err(EccotError::Config("pair window must be at least 1".into()));
    }
    let mut unigram = vec![0usize; vocab_size];
    let mut cooc: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut total_tokens = 0usize;
    let mut total_windows = 0usize;
    for doc in docs {
        for (i, &m) in doc.tokens.iter().enumerate() {
            if m >= vocab_size {
                return Err(EccotError::Contract(format!(
                    "token index {m} in document {:?} exceeds vocabulary size {vocab_size}",
                    doc.id
                )));
            }
            unigram[m] += 1;
            total_tokens += 1;
            for &n in doc.tokens.iter().skip(i + 1).take(window - 1) {
                total_windows += 1;
                if m != n {
                    *cooc.entry((m.min(n), m.max(n))).or_default() += 1;
                }
            }
        }
    }
    let mut set = WordPairSet::new(PairSource::Mined);
    if total_windows == 0 {
        return Ok(set);
    }
    let (t, w) = (total_tokens as f64, total_windows as f64);
    for ((m, n), c) in cooc {
        if c < min_cooc {
            continue;
        }
        let pmi = ((c as f64 / w) / ((unigram[m] as f64 / t) * (unigram[n] as f64 / t))).ln();
        if pmi > 0.0 {
            set.insert(m, n);
        }
    }
    Ok(set)
}

/// Corpus file contents: either raw text or pre-tokenized records.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusRecords {
    Text(Vec<(String, String)>),
    Tokens(Vec<(String, Vec<String>)>),
}

impl CorpusRecords {
    pub fn len(&self) -> usize {
        match self {
            CorpusRecords::Text(v) => v.len(),
            CorpusRecords::Tokens(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tokenizes (or passes through) into `(id, tokens)`; ids must be unique.
    pub fn tokenized(&self, rules: &TokenizeConfig) -> Result<Vec<(String, Vec<String>)>> {
        match self {
            CorpusRecords::Text(raw) => tokenize_corpus(raw, rules),
            CorpusRecords::Tokens(docs) => {
                let mut seen = HashSet::new();
                for (id, _) in docs {
                    if !seen.insert(id.as_str()) {
                        return Err(EccotError::DuplicateId(id.clone()));
                    }
                }
                Ok(docs.clone())
            }
        }
    }

    /// Display text per document: the raw text, or tokens joined by spaces.
    pub fn texts(&self) -> Vec<(String, String)> {
        match self {
            CorpusRecords::Text(raw) => raw.clone(),
            CorpusRecords::Tokens(docs) => docs.iter().map(|(id, t)| (id.clone(), t.join(" "))).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CorpusLine {
    Text { id: String, text: String },
    Tokens { id: String, tokens: Vec<String> },
}

fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let file = std::fs::File::open(path).map_err(|e| EccotError::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EccotError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, &line)?;
    }
    Ok(())
}

pub fn load_corpus(path: &Path) -> Result<CorpusRecords> {
    let mut text = Vec::new();
    let mut tokens = Vec::new();
    for_each_line(path, |line_no, line| {
        let rec: CorpusLine =
            serde_json::from_str(line).map_err(|e| EccotError::malformed(path, line_no, e.to_string()))?;
        match rec {
            CorpusLine::Text { id, text: t } => text.push((id, t)),
            CorpusLine::Tokens { id, tokens: t } => tokens.push((id, t)),
        }
        if !text.is_empty() && !tokens.is_empty() {
            return Err(EccotError::malformed(
                path,
                line_no,
                "corpus mixes \"text\" and \"tokens\" records",
            ));
        }
        Ok(())
    })?;
    Ok(if tokens.is_empty() {
        CorpusRecords::Text(text)
    } else {
        CorpusRecords::Tokens(tokens)
    })
}

/// One line of a triples file, kept verbatim so filtered output can echo it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub id: String,
    pub question: String,
    pub rationale: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleEmbeddings {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
}

impl TripleEmbeddings {
    pub fn new(q: Vec<f64>, r: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if q.len() != r.len() || r.len() != a.len() || q.is_empty() {
            return Err(EccotError::Contract(format!(
                "triple embeddings must share one positive dimension (got {}, {}, {})",
                q.len(),
                r.len(),
                a.len()
            )));
        }
        Ok(TripleEmbeddings { q, r, a })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// A (question, rationale, answer) reasoning chain.
#[derive(Debug, Clone, PartialEq)]
pub struct CotTriple {
    pub record: TripleRecord,
    pub embeddings: Option<TripleEmbeddings>,
}

impl CotTriple {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn label(&self) -> Option<bool> {
        self.record.label.map(|y| y == 1)
    }
}

pub fn load_triples(path: &Path) -> Result<Vec<CotTriple>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line_no, line| {
        let record: TripleRecord =
            serde_json::from_str(line).map_err(|e| EccotError::malformed(path, line_no, e.to_string()))?;
        if let Some(y) = record.label {
            if y > 1 {
                return Err(EccotError::malformed(
                    path,
                    line_no,
                    format!("label must be 0 or 1, got {y}"),
                ));
            }
        }
        if !seen.insert(record.id.clone()) {
            return Err(EccotError::DuplicateId(record.id));
        }
        out.push(CotTriple {
            record,
            embeddings: None,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Precomputed sentence embeddings keyed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(EccotError::Config("embedding dim must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            entries: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, id: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(EccotError::Contract(format!(
                "embedding {id:?} has length {} but table dim is {}",
                vector.len(),
                self.dim
            )));
        }
        check_vector(&vector).map_err(|m| EccotError::Data(format!("embedding {id:?}: {m}")))?;
        if self.entries.insert(id.clone(), vector).is_some() {
            return Err(EccotError::DuplicateId(id));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

fn check_vector(v: &[f64]) -> std::result::Result<(), String> {
    let n2: f64 = v.iter().map(|x| x * x).sum();
    if !n2.is_finite() {
        Err("non-finite vector".into())
    } else if n2 == 0.0 {
        Err("zero vector".into())
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingHeader {
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for_each_line(path, |line_no, line| {
        let Some(t) = table.as_mut() else {
            let header: EmbeddingHeader = serde_json::from_str(line)
                .map_err(|e| EccotError::malformed(path, line_no, format!("expected {{\"dim\": int}} header: {e}")))?;
            table = Some(EmbeddingTable::new(header.dim)?);
            return Ok(());
        };
        let rec: EmbeddingLine =
            serde_json::from_str(line).map_err(|e| EccotError::malformed(path, line_no, e.to_string()))?;
        if rec.vector.len() != t.dim {
            return Err(EccotError::DimensionMismatch {
                path: path.to_path_buf(),
                line: line_no,
                expected: t.dim,
                found: rec.vector.len(),
            });
        }
        check_vector(&rec.vector).map_err(|m| EccotError::malformed(path, line_no, m))?;
        if t.entries.insert(rec.id.clone(), rec.vector).is_some() {
            return Err(EccotError::malformed(
                path,
                line_no,
                format!("duplicate id {:?}", rec.id),
            ));
        }
        Ok(())
    })?;
    table.ok_or_else(|| EccotError::malformed(path, 1, "missing {\"dim\": int} header"))
}

/// Writes an embedding table in the JSON-lines format read by [`load_embeddings`].
pub fn write_embeddings<W: std::io::Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    writeln!(out, "{}", serde_json::json!({ "dim": table.dim })).map_err(|e| EccotError::io("<embeddings>", e))?;
    for (id, v) in table.iter() {
        let line = serde_json::to_string(&EmbeddingLine {
            id: id.to_string(),
            vector: v.to_vec(),
        })?;
        writeln!(out, "{line}").map_err(|e| EccotError::io("<embeddings>", e))?;
    }
    Ok(())
}

/// Attaches `<id>.q`, `<id>.r`, `<id>.a` vectors to every triple.
pub fn join_embeddings(triples: &mut [CotTriple], table: &EmbeddingTable) -> Result<()> {
    for t in triples.iter_mut() {
        let fetch = |suffix: &str| {
            let key = format!("{}.{suffix}", t.record.id);
            table
                .get(&key)
                .map(<[f64]>::to_vec)
                .ok_or(EccotError::MissingEmbedding(key))
        };
        let (q, r, a) = (fetch("q")?, fetch("r")?, fetch("a")?);
        t.embeddings = Some(TripleEmbeddings::new(q, r, a)?);
    }
    Ok(())
}

#[derive(Deserialize)]
struct PairLine {
    a: String,
    b: String,
}

/// Reads an external pair file, resolving terms against `vocab`. Pairs naming
/// unknown terms (or a term paired with itself) are skipped with a warning.
pub fn load_pair_file(path: &Path, vocab: &Vocabulary) -> Result<WordPairSet> {
    let mut set = WordPairSet::new(PairSource::External);
    for_each_line(path, |line_no, line| {
        let rec: PairLine =
            serde_json::from_str(line).map_err(|e| EccotError::malformed(path, line_no, e.to_string()))?;
        match (vocab.get(&rec.a), vocab.get(&rec.b)) {
            (Some(m), Some(n)) if m != n => {
                set.insert(m, n);
            }
            _ => log::warn!(
                "{}:{line_no}: skipping pair ({:?}, {:?}) not resolvable against vocabulary",
                path.display(),
                rec.a,
                rec.b
            ),
        }
        Ok(())
    })?;
    Ok(set)
}
