use std::path::Path;

use eccot_core::corpus::Vocabulary;
use eccot_core::etm::{MrfEtmConfig, TopicModel};
use eccot_core::pipeline::{self, theme_prompts, PipelineConfig, DEFAULT_TEMPLATE};
use eccot_core::{EccotError, Matrix};
use serde_json::Value;

fn bundle() -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = pipeline::write_synthetic_bundle(dir.path(), 5).unwrap();
    let mut cfg = PipelineConfig::load(&cfg_path).unwrap();
    cfg.topics.epochs = 10;
    cfg.causal.epochs = 20;
    (dir, cfg)
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    k.sort_unstable();
    k
}

fn csv_header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn full_run_writes_declared_formats() {
    let (dir, cfg) = bundle();
    let run = pipeline::run_all(&cfg).unwrap();

    let ck: Value = serde_json::from_str(&std::fs::read_to_string(&run.topics.checkpoint).unwrap()).unwrap();
    assert_eq!(keys(&ck), ["config", "format", "rho", "topic_emb", "vocabulary"]);
    assert_eq!(ck["format"], "mrf-etm/1");
    assert_eq!(ck["topic_emb"].as_array().unwrap().len(), 3);
    assert_eq!(csv_header(&run.topics.loss_csv), "epoch,elbo,nll,kl,sim_loss,total");
    assert_eq!(
        std::fs::read_to_string(&run.topics.loss_csv).unwrap().lines().count(),
        11
    );

    let head: Value = serde_json::from_str(&std::fs::read_to_string(&run.causal.head).unwrap()).unwrap();
    assert_eq!(keys(&head), ["d_in", "d_out", "format", "weight"]);
    assert_eq!(head["format"], "causal-head/1");
    assert_eq!(
        csv_header(&run.causal.curve_csv),
        "epoch,mean_loss,pos_mean_cos_qr,pos_mean_cos_ra,neg_mean_cos_qr,neg_mean_cos_ra"
    );
    assert!(run.causal.final_loss <= run.causal.initial_loss);

    assert_eq!(
        csv_header(&run.rank.scores_csv),
        "triple_id,cos_qr,cos_ra,coefficient,rank,kept"
    );
    assert_eq!(csv_header(&run.rank.histogram_csv), "bin_low,bin_high,count");
    assert_eq!(
        std::fs::read_to_string(&run.rank.histogram_csv)
            .unwrap()
            .lines()
            .count(),
        41
    );

    let prompts = lines(&run.prompts);
    assert_eq!(prompts.len(), 50);
    for p in &prompts {
        assert_eq!(keys(p), ["id", "keywords", "prompt", "theta"]);
        let theta: f64 = p["theta"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((theta - 1.0).abs() < 1e-9);
        assert_eq!(p["keywords"].as_array().unwrap().len(), 2);
        assert!(p["prompt"].as_str().unwrap().starts_with("Topics: "));
    }

    let triples = lines(&dir.path().join("triples.jsonl"));
    let filtered = lines(run.rank.filtered.as_ref().unwrap());
    let n = triples.len();
    assert_eq!(filtered.len(), n - n / 2);
    let mut expected = keys(&triples[0]);
    expected.push("coefficient");
    expected.sort_unstable();
    assert_eq!(keys(&filtered[0]), expected);
    assert!(filtered.iter().all(|f| f["label"] == 1));
    assert_eq!((run.rank.kept, run.rank.dropped), (n - n / 2, n / 2));
}

#[test]
fn reruns_overwrite_identically() {
    let (_dir, cfg) = bundle();
    let first = pipeline::topics_fit(&cfg).unwrap();
    let bytes = std::fs::read(&first.checkpoint).unwrap();
    std::fs::remove_dir_all(cfg.paths.out.as_ref().unwrap()).unwrap();
    let second = pipeline::topics_fit(&cfg).unwrap();
    assert_eq!(std::fs::read(&second.checkpoint).unwrap(), bytes);
}

#[test]
fn tau_zero_keeps_everything() {
    let (_dir, mut cfg) = bundle();
    cfg.filter.tau = 0.0;
    pipeline::causal_train(&cfg).unwrap();
    let r = pipeline::rank(&cfg, None, true).unwrap();
    assert_eq!((r.kept, r.dropped), (120, 0));
    assert_eq!(lines(r.filtered.as_ref().unwrap()).len(), 120);
}

#[test]
fn missing_inputs_are_config_errors() {
    let (_dir, mut cfg) = bundle();
    cfg.paths.corpus = Some("/nonexistent/corpus.jsonl".into());
    let err = pipeline::topics_fit(&cfg).unwrap_err();
    assert!(matches!(err, EccotError::Config(_)));
    assert_eq!(err.exit_code(), 2);
    cfg.paths.corpus = None;
    assert_eq!(pipeline::topics_fit(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn missing_embedding_names_the_chain() {
    let (dir, cfg) = bundle();
    let emb = dir.path().join("embeddings.jsonl");
    let kept: Vec<String> = std::fs::read_to_string(&emb)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"c0003.r\""))
        .map(str::to_string)
        .collect();
    std::fs::write(&emb, kept.join("\n") + "\n").unwrap();
    let err = pipeline::causal_train(&cfg).unwrap_err();
    assert!(err.to_string().contains("c0003"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn empty_triple_file_is_a_data_error() {
    let (dir, cfg) = bundle();
    pipeline::causal_train(&cfg).unwrap();
    std::fs::write(dir.path().join("triples.jsonl"), "").unwrap();
    let err = pipeline::rank(&cfg, None, true).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let (dir, cfg) = bundle();
    pipeline::topics_fit(&cfg).unwrap();
    std::fs::write(
        dir.path().join("corpus.jsonl"),
        "{\"id\":\"x\",\"text\":\"entirely unrelated wording\"}\n",
    )
    .unwrap();
    let err = pipeline::emit_prompts(&cfg, None).unwrap_err();
    assert!(matches!(err, EccotError::Data(_)), "{err}");
}

fn four_topic_model() -> TopicModel {
    let vocab = Vocabulary::from_terms(["aa", "bb", "cc", "dd", "ee"].map(String::from).to_vec()).unwrap();
    let rho = Matrix::from_rows(&[
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 0.0],
        vec![0.0, -1.0],
        vec![0.5, 0.5],
    ])
    .unwrap();
    let topics = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0], vec![-2.0, 0.0], vec![0.0, -2.0]]).unwrap();
    TopicModel::new(rho, topics, MrfEtmConfig::new(4, 2), vocab).unwrap()
}

#[test]
fn out_of_vocabulary_document_gets_prior_mean() {
    let model = four_topic_model();
    let docs = vec![
        ("known".to_string(), "aa bb".to_string()),
        ("oov".to_string(), "zz yy".to_string()),
    ];
    let p = theme_prompts(&model, &docs, &Default::default(), 2, 3, DEFAULT_TEMPLATE).unwrap();
    assert_eq!(p[1].theta, vec![0.25; 4]);
    assert_eq!(p[1].keywords.len(), 2);
    assert!(p[1].keywords.iter().all(|k| k.len() == 3));
    assert_eq!(p[0].keywords[0][0], if p[0].topics[0] == 0 { "aa" } else { "bb" });
}

#[test]
fn zero_keywords_still_renders() {
    let model = four_topic_model();
    let docs = vec![("d".to_string(), "aa cc".to_string())];
    let p = theme_prompts(&model, &docs, &Default::default(), 2, 0, DEFAULT_TEMPLATE).unwrap();
    assert_eq!(p[0].keywords, vec![Vec::<String>::new(); 2]);
    assert_eq!(p[0].prompt, "Topics: ; \nQuestion: aa cc\nReason step by step.");
}
