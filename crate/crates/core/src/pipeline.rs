//! File-level orchestration of the four stages: topic fitting, theme prompt
//! emission, causal head training, and scoring/filtering.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causal::{
    make_negatives, train_projection, write_curve_csv, ContrastiveConfig, NegativeStrategy, ProjectionHead,
};
use crate::corpus::{
    build_pair_set, build_vocabulary, join_embeddings, load_corpus, load_embeddings, load_pair_file, load_triples,
    tokenize, CotTriple, Document, TokenizeConfig, WordPairSet,
};
use crate::error::{EccotError, Result};
use crate::etm::{self, log_beta, top_words, write_loss_csv, MrfEtmConfig, TopicModel};
use crate::rank::{score_distribution, score_triples, truncate, write_histogram_csv, write_scores_csv, FilterConfig};

pub const TOPICS_CHECKPOINT: &str = "topics.json";
pub const TOPICS_LOSS: &str = "topics_loss.csv";
pub const THETA_FILE: &str = "theta.jsonl";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const HEAD_CHECKPOINT: &str = "head.json";
pub const CAUSAL_CURVE: &str = "causal_curve.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const FILTERED_FILE: &str = "filtered.jsonl";

pub const DEFAULT_TEMPLATE: &str = "Topics: {keywords}\nQuestion: {text}\nReason step by step.";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// External related-pair file; replaces mined pairs when set.
    pub pairs: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularyConfig {
    pub min_count: usize,
    pub max_vocab: usize,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        VocabularyConfig {
            min_count: 1,
            max_vocab: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub window: usize,
    pub min_cooc: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            window: 10,
            min_cooc: 5,
        }
    }
}

/// Topic model settings as written in a config file. The seed comes from the
/// top-level `seed`, and `dirichlet_alpha` defaults to 1/K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub num_topics: usize,
    pub embed_dim: usize,
    pub dirichlet_alpha: Option<f64>,
    pub lambda: f64,
    pub e_step_tol: f64,
    pub max_e_sweeps: usize,
    pub m_step_lr: f64,
    pub m_steps_per_epoch: usize,
    pub grad_clip_norm: f64,
    pub epochs: usize,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        let d = MrfEtmConfig::default();
        TopicsConfig {
            num_topics: d.num_topics,
            embed_dim: d.embed_dim,
            dirichlet_alpha: None,
            lambda: d.lambda,
            e_step_tol: d.e_step_tol,
            max_e_sweeps: d.max_e_sweeps,
            m_step_lr: d.m_step_lr,
            m_steps_per_epoch: d.m_steps_per_epoch,
            grad_clip_norm: d.grad_clip_norm,
            epochs: d.epochs,
        }
    }
}

impl TopicsConfig {
    pub fn to_model_config(&self, seed: u64) -> MrfEtmConfig {
        MrfEtmConfig {
            num_topics: self.num_topics,
            embed_dim: self.embed_dim,
            dirichlet_alpha: self.dirichlet_alpha.unwrap_or(1.0 / self.num_topics.max(1) as f64),
            lambda: self.lambda,
            e_step_tol: self.e_step_tol,
            max_e_sweeps: self.max_e_sweeps,
            m_step_lr: self.m_step_lr,
            m_steps_per_epoch: self.m_steps_per_epoch,
            grad_clip_norm: self.grad_clip_norm,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub tau: f64,
    /// Quantile levels reported alongside the histogram.
    pub quantiles: Vec<f64>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            tau: FilterConfig::default().tau,
            quantiles: vec![0.1, 0.25, 0.5, 0.75, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub top_topics: usize,
    pub top_words: usize,
    /// File whose contents replace the built-in template. `{keywords}` and
    /// `{text}` are substituted.
    pub template: Option<PathBuf>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            top_topics: 2,
            top_words: 5,
            template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Single-threaded execution. Results are identical either way; this only
    /// controls whether the rayon pool is used.
    pub serial: bool,
    pub log_level: String,
    pub paths: Paths,
    pub tokenize: TokenizeConfig,
    pub vocabulary: VocabularyConfig,
    pub pairs: PairConfig,
    pub topics: TopicsConfig,
    pub causal: ContrastiveConfig,
    pub filter: FilterSection,
    pub prompts: PromptConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            serial: false,
            log_level: "info".into(),
            paths: Paths::default(),
            tokenize: TokenizeConfig::default(),
            vocabulary: VocabularyConfig::default(),
            pairs: PairConfig::default(),
            topics: TopicsConfig::default(),
            causal: ContrastiveConfig::default(),
            filter: FilterSection::default(),
            prompts: PromptConfig::default(),
        }
    }
}

/// Command-line overrides; every `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub serial: bool,
    pub out: Option<PathBuf>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub num_topics: Option<usize>,
    pub corpus: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| EccotError::Config(e.to_string()))?;
        cfg.resolve_relative(base_dir);
        Ok(cfg)
    }

    /// Reads a TOML config; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EccotError::Config(format!("cannot read config {}: {e}", path.display())))?;
        PipelineConfig::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.triples);
        fix(&mut self.paths.embeddings);
        fix(&mut self.paths.pairs);
        fix(&mut self.paths.out);
        fix(&mut self.prompts.template);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.serial |= o.serial;
        if let Some(t) = o.tau {
            self.filter.tau = t;
        }
        if let Some(l) = o.lambda {
            self.topics.lambda = l;
        }
        if let Some(k) = o.num_topics {
            self.topics.num_topics = k;
        }
        for (dst, src) in [
            (&mut self.paths.out, &o.out),
            (&mut self.paths.corpus, &o.corpus),
            (&mut self.paths.triples, &o.triples),
            (&mut self.paths.embeddings, &o.embeddings),
            (&mut self.paths.pairs, &o.pairs),
        ] {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| EccotError::Config(e.to_string()))
    }

    pub fn model_config(&self) -> MrfEtmConfig {
        self.topics.to_model_config(self.seed)
    }

    pub fn contrastive_config(&self) -> ContrastiveConfig {
        ContrastiveConfig {
            seed: self.seed,
            ..self.causal.clone()
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig { tau: self.filter.tau }
    }

    /// Output directory, created if needed.
    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| EccotError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn input(&self, path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        let p = path
            .as_ref()
            .ok_or_else(|| EccotError::Config(format!("no {what} path configured")))?;
        if !p.is_file() {
            return Err(EccotError::Config(format!(
                "{what} file {} does not exist",
                p.display()
            )));
        }
        Ok(p.clone())
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| EccotError::io(path, e))
}

fn finish(mut w: std::io::BufWriter<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| EccotError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicsSummary {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub vocab_size: usize,
    pub documents: usize,
    pub excluded: Vec<String>,
    pub pairs: usize,
    pub final_report: Option<etm::EtmLossReport>,
}

/// Tokenize, build the vocabulary and pair set, fit, and write the checkpoint
/// plus the per-epoch loss CSV.
pub fn topics_fit(cfg: &PipelineConfig) -> Result<TopicsSummary> {
    let corpus_path = cfg.input(&cfg.paths.corpus, "corpus")?;
    let pair_path = match &cfg.paths.pairs {
        Some(_) => Some(cfg.input(&cfg.paths.pairs, "pair override")?),
        None => None,
    };
    let model_cfg = cfg.model_config();
    model_cfg.validate()?;
    let out = cfg.out_dir()?;

    let corpus = load_corpus(&corpus_path)?;
    let tokens = corpus.tokenized(&cfg.tokenize)?;
    let (vocab, docs) = build_vocabulary(&tokens, cfg.vocabulary.min_count, cfg.vocabulary.max_vocab)?;
    let pairs = match pair_path {
        Some(p) => load_pair_file(&p, &vocab)?,
        None => build_pair_set(&docs, vocab.len(), cfg.pairs.window, cfg.pairs.min_cooc)?,
    };
    log::info!(
        "fitting {} topics on {} documents, vocabulary {}, {} related pairs",
        model_cfg.num_topics,
        docs.len(),
        vocab.len(),
        pairs.len()
    );
    let vocab_size = vocab.len();
    let outcome = fit_topics(cfg, &model_cfg, vocab, &docs, &pairs)?;
    for id in &outcome.excluded {
        log::warn!("document {id:?} is empty after vocabulary filtering; excluded from fit");
    }

    let checkpoint = out.join(TOPICS_CHECKPOINT);
    outcome.model.save(&checkpoint)?;
    let loss_csv = out.join(TOPICS_LOSS);
    let w = create(&loss_csv)?;
    write_loss_csv(&outcome.reports, w)?;
    Ok(TopicsSummary {
        checkpoint,
        loss_csv,
        vocab_size,
        documents: outcome.documents.len(),
        excluded: outcome.excluded,
        pairs: pairs.len(),
        final_report: outcome.reports.last().copied(),
    })
}

fn fit_topics(
    cfg: &PipelineConfig,
    model_cfg: &MrfEtmConfig,
    vocab: crate::corpus::Vocabulary,
    docs: &[Document],
    pairs: &WordPairSet,
) -> Result<etm::FitOutcome> {
    #[cfg(feature = "parallel")]
    if !cfg.serial {
        return etm::fit_parallel(model_cfg, vocab, docs, pairs, None);
    }
    let _ = cfg.serial;
    etm::fit(model_cfg, vocab, docs, pairs, None)
}

/// One emitted prompt record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemePrompt {
    pub id: String,
    pub theta: Vec<f64>,
    /// Keywords of the selected topics, most probable first.
    pub keywords: Vec<Vec<String>>,
    pub prompt: String,
    /// Selected topic indices, by descending θ.
    #[serde(skip)]
    pub topics: Vec<usize>,
}

pub fn render_prompt(template: &str, keywords: &[Vec<String>], text: &str) -> String {
    let kw = keywords.iter().map(|k| k.join(", ")).collect::<Vec<_>>().join("; ");
    template.replace("{keywords}", &kw).replace("{text}", text)
}

/// Infers θ for every corpus document and renders a theme-conditioned prompt.
pub fn theme_prompts(
    model: &TopicModel,
    docs: &[(String, String)],
    rules: &TokenizeConfig,
    top_t: usize,
    top_w: usize,
    template: &str,
) -> Result<Vec<ThemePrompt>> {
    let lb = log_beta(model)?;
    let k = model.num_topics();
    let keywords_by_topic: Vec<Vec<String>> = (0..k)
        .map(|t| Ok(top_words(model, t, top_w)?.into_iter().map(|(w, _)| w).collect()))
        .collect::<Result<_>>()?;
    let mut any_token = false;
    let mut any_known = false;
    let prompts = docs
        .iter()
        .map(|(id, text)| {
            let tokens = tokenize(text, rules);
            let encoded = Document::new(id.clone(), model.vocabulary.encode(&tokens));
            any_token |= !tokens.is_empty();
            any_known |= !encoded.is_empty();
            let theta = etm::infer_theta_with(&lb, &model.config, &encoded)?;
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
            order.truncate(top_t);
            let keywords: Vec<Vec<String>> = order.iter().map(|&t| keywords_by_topic[t].clone()).collect();
            Ok(ThemePrompt {
                id: id.clone(),
                prompt: render_prompt(template, &keywords, text),
                theta,
                keywords,
                topics: order,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if any_token && !any_known {
        return Err(EccotError::Data(
            "no corpus token appears in the checkpoint vocabulary; checkpoint and corpus do not match".into(),
        ));
    }
    Ok(prompts)
}

fn checkpoint_path(cfg: &PipelineConfig, explicit: Option<&Path>) -> Result<PathBuf> {
    let p = match explicit {
        Some(p) => p.to_path_buf(),
        None => cfg.out_dir()?.join(TOPICS_CHECKPOINT),
    };
    if !p.is_file() {
        return Err(EccotError::Config(format!("checkpoint {} does not exist", p.display())));
    }
    Ok(p)
}

/// Writes `prompts.jsonl`: `{"id","theta","keywords","prompt"}` per document.
pub fn emit_prompts(cfg: &PipelineConfig, checkpoint: Option<&Path>) -> Result<PathBuf> {
    let corpus_path = cfg.input(&cfg.paths.corpus, "corpus")?;
    let ck = checkpoint_path(cfg, checkpoint)?;
    let template = match &cfg.prompts.template {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| EccotError::Config(format!("cannot read template {}: {e}", p.display())))?,
        None => DEFAULT_TEMPLATE.to_string(),
    };
    let out = cfg.out_dir()?;
    let model = TopicModel::load(&ck)?;
    let corpus = load_corpus(&corpus_path)?;
    let prompts = theme_prompts(
        &model,
        &corpus.texts(),
        &cfg.tokenize,
        cfg.prompts.top_topics,
        cfg.prompts.top_words,
        &template,
    )?;
    let path = out.join(PROMPTS_FILE);
    let mut w = create(&path)?;
    for p in &prompts {
        writeln!(w, "{}", serde_json::to_string(p)?).map_err(|e| EccotError::io(&path, e))?;
    }
    finish(w, &path)?;
    Ok(path)
}

#[derive(Serialize)]
struct ThetaRecord<'a> {
    id: &'a str,
    theta: &'a [f64],
}

/// Writes `theta.jsonl`: posterior mean topic proportions per corpus document.
pub fn topics_infer(cfg: &PipelineConfig, checkpoint: Option<&Path>) -> Result<PathBuf> {
    let corpus_path = cfg.input(&cfg.paths.corpus, "corpus")?;
    let ck = checkpoint_path(cfg, checkpoint)?;
    let out = cfg.out_dir()?;
    let model = TopicModel::load(&ck)?;
    let lb = log_beta(&model)?;
    let corpus = load_corpus(&corpus_path)?;
    let path = out.join(THETA_FILE);
    let mut w = create(&path)?;
    for (id, tokens) in corpus.tokenized(&cfg.tokenize)? {
        let doc = Document::new(id, model.vocabulary.encode(&tokens));
        let theta = etm::infer_theta_with(&lb, &model.config, &doc)?;
        let line = serde_json::to_string(&ThetaRecord {
            id: &doc.id,
            theta: &theta,
        })?;
        writeln!(w, "{line}").map_err(|e| EccotError::io(&path, e))?;
    }
    finish(w, &path)?;
    Ok(path)
}

fn load_chains(cfg: &PipelineConfig) -> Result<Vec<CotTriple>> {
    let triples_path = cfg.input(&cfg.paths.triples, "triples")?;
    let emb_path = cfg.input(&cfg.paths.embeddings, "embeddings")?;
    let mut triples = load_triples(&triples_path)?;
    let table = load_embeddings(&emb_path)?;
    join_embeddings(&mut triples, &table)?;
    Ok(triples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalSummary {
    pub head: PathBuf,
    pub curve_csv: PathBuf,
    pub positives: usize,
    pub negatives: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Chains labeled 0 are never used as positives; unlabeled chains are.
pub fn split_training_chains(
    triples: &[CotTriple],
    strategy: NegativeStrategy,
    seed: u64,
) -> Result<(Vec<CotTriple>, Vec<CotTriple>)> {
    let positives: Vec<CotTriple> = triples.iter().filter(|t| t.label() != Some(false)).cloned().collect();
    let negatives = match strategy {
        NegativeStrategy::Labeled => make_negatives(triples, strategy, seed)?,
        NegativeStrategy::ShuffleRationale => make_negatives(&positives, strategy, seed)?,
    };
    Ok((positives, negatives))
}

pub fn causal_train(cfg: &PipelineConfig) -> Result<CausalSummary> {
    let ccfg = cfg.contrastive_config();
    ccfg.validate()?;
    let triples = load_chains(cfg)?;
    let out = cfg.out_dir()?;
    if triples.is_empty() {
        return Err(EccotError::Data("triples file is empty".into()));
    }
    let (positives, negatives) = split_training_chains(&triples, ccfg.negative_strategy, ccfg.seed)?;
    log::info!(
        "training projection head on {} positive and {} negative chains",
        positives.len(),
        negatives.len()
    );
    let outcome = train_projection(&ccfg, &positives, &negatives)?;
    let head = out.join(HEAD_CHECKPOINT);
    outcome.head.save(&head)?;
    let curve_csv = out.join(CAUSAL_CURVE);
    write_curve_csv(&outcome.curve, create(&curve_csv)?)?;
    Ok(CausalSummary {
        head,
        curve_csv,
        positives: positives.len(),
        negatives: negatives.len(),
        initial_loss: outcome.curve[0].mean_loss,
        final_loss: outcome.curve.last().map_or(f64::NAN, |p| p.mean_loss),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub scores_csv: PathBuf,
    pub histogram_csv: PathBuf,
    pub filtered: Option<PathBuf>,
    pub kept: usize,
    pub dropped: usize,
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct FilteredRecord<'a> {
    #[serde(flatten)]
    record: &'a crate::corpus::TripleRecord,
    coefficient: f64,
}

fn head_path(cfg: &PipelineConfig, explicit: Option<&Path>) -> Result<PathBuf> {
    let p = match explicit {
        Some(p) => p.to_path_buf(),
        None => cfg.out_dir()?.join(HEAD_CHECKPOINT),
    };
    if !p.is_file() {
        return Err(EccotError::Config(format!(
            "head checkpoint {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

/// Scores every chain, writes the scores and histogram CSVs, and when
/// `write_filtered` is set also the kept chains as JSON lines (input order,
/// with their coefficient appended).
pub fn rank(cfg: &PipelineConfig, head: Option<&Path>, write_filtered: bool) -> Result<RankSummary> {
    let fcfg = cfg.filter_config();
    fcfg.validate()?;
    let head_file = head_path(cfg, head)?;
    let triples = load_chains(cfg)?;
    let out = cfg.out_dir()?;
    if triples.is_empty() {
        return Err(EccotError::Data("triples file is empty".into()));
    }
    let head = ProjectionHead::load(&head_file)?;
    let mut scores = score_triples(&head, &triples)?;
    let dist = score_distribution(&scores, &cfg.filter.quantiles)?;
    let (kept, dropped) = truncate(&scores, &fcfg)?;
    let kept_ids: std::collections::HashSet<&str> = kept.iter().map(|s| s.triple_id.as_str()).collect();
    for s in scores.iter_mut() {
        s.kept = kept_ids.contains(s.triple_id.as_str());
    }

    let scores_csv = out.join(SCORES_FILE);
    write_scores_csv(&scores, create(&scores_csv)?)?;
    let histogram_csv = out.join(HISTOGRAM_FILE);
    write_histogram_csv(&dist.histogram, create(&histogram_csv)?)?;
    let filtered = if write_filtered {
        let path = out.join(FILTERED_FILE);
        let mut w = create(&path)?;
        for (t, s) in triples.iter().zip(&scores) {
            if s.kept {
                let line = serde_json::to_string(&FilteredRecord {
                    record: &t.record,
                    coefficient: s.coefficient,
                })?;
                writeln!(w, "{line}").map_err(|e| EccotError::io(&path, e))?;
            }
        }
        finish(w, &path)?;
        Some(path)
    } else {
        None
    };
    Ok(RankSummary {
        scores_csv,
        histogram_csv,
        filtered,
        kept: kept.len(),
        dropped: dropped.len(),
        quantiles: dist.quantiles,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub topics: TopicsSummary,
    pub prompts: PathBuf,
    pub causal: CausalSummary,
    pub rank: RankSummary,
}

/// All four stages in order over one output directory.
pub fn run_all(cfg: &PipelineConfig) -> Result<RunSummary> {
    let topics = topics_fit(cfg)?;
    let prompts = emit_prompts(cfg, Some(&topics.checkpoint))?;
    let causal = causal_train(cfg)?;
    let rank = rank(cfg, Some(&causal.head), true)?;
    Ok(RunSummary {
        topics,
        prompts,
        causal,
        rank,
    })
}

/// Writes the bundled synthetic dataset (corpus, triples, embeddings) plus a
/// matching `eccot.toml` into `dir`.
pub fn write_synthetic_bundle(dir: &Path, seed: u64) -> Result<PathBuf> {
    use crate::synthetic::*;
    std::fs::create_dir_all(dir).map_err(|e| EccotError::io(dir, e))?;
    let corpus = topic_corpus(&TopicCorpusSpec {
        num_docs: 50,
        seed,
        ..Default::default()
    })?;
    write_corpus_jsonl(&corpus.docs, &dir.join("corpus.jsonl"))?;
    let triples = causal_triples(&CausalSpec {
        seed,
        ..Default::default()
    })?;
    write_triples_jsonl(&triples, &dir.join("triples.jsonl"))?;
    write_embeddings_jsonl(&embedding_table(&triples)?, &dir.join("embeddings.jsonl"))?;
    let cfg = PipelineConfig {
        seed,
        serial: true,
        paths: Paths {
            corpus: Some("corpus.jsonl".into()),
            triples: Some("triples.jsonl".into()),
            embeddings: Some("embeddings.jsonl".into()),
            pairs: None,
            out: Some("out".into()),
        },
        topics: TopicsConfig {
            num_topics: 3,
            embed_dim: 8,
            ..Default::default()
        },
        causal: ContrastiveConfig {
            negative_strategy: NegativeStrategy::Labeled,
            ..Default::default()
        },
        filter: FilterSection {
            tau: 0.5,
            ..Default::default()
        },
        ..Default::default()
    };
    let path = dir.join("eccot.toml");
    std::fs::write(&path, cfg.to_toml()?).map_err(|e| EccotError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_and_relative_paths() {
        let cfg = PipelineConfig::from_toml_str(
            "seed = 3\n[paths]\ncorpus = \"c.jsonl\"\nout = \"/abs/out\"\n[topics]\nnum_topics = 4\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.paths.corpus.as_deref(), Some(Path::new("/base/c.jsonl")));
        assert_eq!(cfg.paths.out.as_deref(), Some(Path::new("/abs/out")));
        let m = cfg.model_config();
        assert_eq!(m.num_topics, 4);
        assert_eq!(m.dirichlet_alpha, 0.25);
        assert_eq!(m.seed, 3);
        assert_eq!(cfg.filter.tau, 0.2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            PipelineConfig::from_toml_str("[topics]\nnum_topicz = 4\n", Path::new(".")),
            Err(EccotError::Config(_))
        ));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&Overrides {
            seed: Some(9),
            serial: true,
            tau: Some(0.4),
            lambda: Some(0.0),
            num_topics: Some(5),
            out: Some("x".into()),
            ..Default::default()
        });
        assert_eq!(cfg.seed, 9);
        assert!(cfg.serial);
        assert_eq!(cfg.filter.tau, 0.4);
        assert_eq!(cfg.model_config().lambda, 0.0);
        assert_eq!(cfg.model_config().dirichlet_alpha, 0.2);
        assert_eq!(cfg.paths.out.as_deref(), Some(Path::new("x")));
        assert_eq!(cfg.contrastive_config().seed, 9);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml_str(&cfg.to_toml().unwrap(), Path::new("/")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn prompt_rendering() {
        let kw = vec![vec!["a".to_string(), "b".to_string()], vec!["c".to_string()]];
        assert_eq!(
            render_prompt(DEFAULT_TEMPLATE, &kw, "why?"),
            "Topics: a, b; c\nQuestion: why?\nReason step by step."
        );
        assert_eq!(
            render_prompt(DEFAULT_TEMPLATE, &[vec![], vec![]], "t"),
            "Topics: ; \nQuestion: t\nReason step by step."
        );
    }
}
