use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use eccot_core::pipeline::{self, Overrides, PipelineConfig};
use eccot_core::EccotError;

#[derive(Parser, Debug)]
#[command(
    name = "eccot",
    version,
    about = "Validate and filter chain-of-thought data with topic-aware prompts and causal scoring"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    serial: bool,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fraction of lowest-scoring chains to drop.
    #[arg(long, global = true, value_name = "F")]
    tau: Option<f64>,
    /// Weight of the related-pair similarity term.
    #[arg(long, global = true, value_name = "F")]
    lambda: Option<f64>,
    /// Number of topics.
    #[arg(long, global = true, value_name = "K")]
    topics: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    triples: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    embeddings: Option<PathBuf>,
    /// Related word pairs; replaces pairs mined from the corpus.
    #[arg(long, global = true, value_name = "PATH")]
    pairs: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Topic model.
    #[command(subcommand)]
    Topics(TopicsCmd),
    /// Theme-conditioned prompts.
    #[command(subcommand)]
    Prompts(PromptsCmd),
    /// Causal projection head.
    #[command(subcommand)]
    Causal(CausalCmd),
    /// Score and filter chains.
    #[command(subcommand)]
    Rank(RankCmd),
    /// All stages.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Write the bundled synthetic dataset and a matching config.
    Synth {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum TopicsCmd {
    Fit,
    Infer {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum PromptsCmd {
    Emit {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Prompt template file; `{keywords}` and `{text}` are substituted.
        #[arg(long, value_name = "PATH")]
        template: Option<PathBuf>,
        /// Topics per document.
        #[arg(long, value_name = "T")]
        top_topics: Option<usize>,
        /// Keywords per topic.
        #[arg(long, value_name = "W")]
        top_words: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum CausalCmd {
    Train,
}

#[derive(Subcommand, Debug)]
enum RankCmd {
    Score {
        #[arg(long, value_name = "PATH")]
        head: Option<PathBuf>,
    },
    Filter {
        #[arg(long, value_name = "PATH")]
        head: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum PipelineCmd {
    Run,
}

fn load_config(common: &Common) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: common.seed,
        serial: common.serial,
        out: common.out.clone(),
        tau: common.tau,
        lambda: common.lambda,
        num_topics: common.topics,
        corpus: common.corpus.clone(),
        triples: common.triples.clone(),
        embeddings: common.embeddings.clone(),
        pairs: common.pairs.clone(),
    });
    Ok(cfg)
}

fn init_logging(level: &str) {
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn print_rank(summary: &pipeline::RankSummary) {
    println!("scores: {}", summary.scores_csv.display());
    println!("histogram: {}", summary.histogram_csv.display());
    for (p, q) in &summary.quantiles {
        println!("quantile {p}: {q:.6}");
    }
    if let Some(f) = &summary.filtered {
        println!("filtered: {}", f.display());
    }
    println!("kept {} dropped {}", summary.kept, summary.dropped);
}

fn print_topics(summary: &pipeline::TopicsSummary) {
    println!(
        "fitted on {} documents ({} excluded), vocabulary {}, {} related pairs",
        summary.documents,
        summary.excluded.len(),
        summary.vocab_size,
        summary.pairs
    );
    if let Some(r) = &summary.final_report {
        println!("final elbo {:.6} total loss {:.6}", r.elbo, r.total);
    }
    println!("checkpoint: {}", summary.checkpoint.display());
    println!("loss: {}", summary.loss_csv.display());
}

fn print_causal(summary: &pipeline::CausalSummary) {
    println!(
        "trained on {} positives and {} negatives, loss {:.6} -> {:.6}",
        summary.positives, summary.negatives, summary.initial_loss, summary.final_loss
    );
    println!("head: {}", summary.head.display());
    println!("curve: {}", summary.curve_csv.display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Synth { dir } = &cli.command {
        init_logging("info");
        let path = pipeline::write_synthetic_bundle(dir, cli.common.seed.unwrap_or(0))?;
        println!("config: {}", path.display());
        return Ok(());
    }
    let cfg = load_config(&cli.common)?;
    init_logging(&cfg.log_level);
    match cli.command {
        Command::Topics(TopicsCmd::Fit) => print_topics(&pipeline::topics_fit(&cfg)?),
        Command::Topics(TopicsCmd::Infer { checkpoint }) => {
            let p = pipeline::topics_infer(&cfg, checkpoint.as_deref())?;
            println!("theta: {}", p.display());
        }
        Command::Prompts(PromptsCmd::Emit {
            checkpoint,
            template,
            top_topics,
            top_words,
        }) => {
            let mut cfg = cfg;
            if template.is_some() {
                cfg.prompts.template = template;
            }
            cfg.prompts.top_topics = top_topics.unwrap_or(cfg.prompts.top_topics);
            cfg.prompts.top_words = top_words.unwrap_or(cfg.prompts.top_words);
            let p = pipeline::emit_prompts(&cfg, checkpoint.as_deref())?;
            println!("prompts: {}", p.display());
        }
        Command::Causal(CausalCmd::Train) => print_causal(&pipeline::causal_train(&cfg)?),
        Command::Rank(RankCmd::Score { head }) => print_rank(&pipeline::rank(&cfg, head.as_deref(), false)?),
        Command::Rank(RankCmd::Filter { head }) => print_rank(&pipeline::rank(&cfg, head.as_deref(), true)?),
        Command::Pipeline(PipelineCmd::Run) => {
            let s = pipeline::run_all(&cfg).context("pipeline run failed")?;
            print_topics(&s.topics);
            println!("prompts: {}", s.prompts.display());
            print_causal(&s.causal);
            print_rank(&s.rank);
        }
        Command::Synth { .. } => unreachable!(),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<EccotError>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
