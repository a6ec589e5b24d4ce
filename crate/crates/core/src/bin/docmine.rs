use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use docmine::classify::Criterion;
use docmine::pipeline::{self, StageCounts};
use docmine::workflow::{self, WorkflowConfig};
use docmine::Params;

#[derive(Parser)]
#[command(name = "docmine", version, about = "Document mining over local record containers")]
struct Cli {
    /// JSON parameter file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of partitions each stage is split into.
    #[arg(long, global = true, default_value_t = 1)]
    partitions: usize,
    /// Log filter such as `warn` or `debug`.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// JSON lines → corpus container.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Corpus container → JSON lines.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Corpus → TFIDF weight vectors.
    Tfidf {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write term statistics into this directory.
        #[arg(long)]
        aux_dir: Option<PathBuf>,
    },
    /// Weight vectors → similarity triples.
    Similarity {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        topk: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Resolve each document's references against the corpus.
    CiteMatch {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Learn per-code vote thresholds.
    ClassifyTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        criterion: Option<Criterion>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Assign codes to unclassified documents.
    ClassifyAssign {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Execute a workflow file.
    Run { workflow: PathBuf },
    /// Corpus → most frequent terms, per-document top terms, extremes.
    TopTerms {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        output_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_millis()
        .init();
    anyhow::ensure!(cli.partitions >= 1, "--partitions must be at least 1");

    let mut params = match &cli.config {
        Some(p) => Params::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Params::default(),
    };
    let p = cli.partitions;

    let counts: StageCounts = match cli.cmd {
        Cmd::Import { input, output } => pipeline::import_stage(&input, &output)?,
        Cmd::Export { input, output } => pipeline::export_stage(&input, &output)?,
        Cmd::Tfidf { corpus, output, aux_dir } => {
            if aux_dir.is_some() {
                params.aux_dir = aux_dir;
            }
            pipeline::tfidf_stage(&corpus, &output, &params, p)?
        }
        Cmd::Similarity { input, threshold, topk, output } => pipeline::similarity_stage(
            &input,
            &output,
            threshold.unwrap_or(params.sim_threshold),
            topk.or(params.topk),
            p,
        )?,
        Cmd::CiteMatch { corpus, threshold, cap, output } => pipeline::cite_match_stage(
            &corpus,
            &output,
            threshold.unwrap_or(params.match_threshold),
            cap.unwrap_or(params.cap),
            params.index_interval,
            p,
        )?,
        Cmd::ClassifyTrain { corpus, n, folds, criterion, seed, model } => {
            params.n = n.unwrap_or(params.n);
            params.folds = folds.unwrap_or(params.folds);
            params.criterion = criterion.unwrap_or(params.criterion);
            params.seed = seed.unwrap_or(params.seed);
            pipeline::classify_train_stage(&corpus, &model, params.train_options(), &params, p)?
        }
        Cmd::ClassifyAssign { corpus, model, output } => pipeline::classify_assign_stage(&corpus, &model, &output, &params, p)?,
        Cmd::TopTerms { corpus, n, output_dir } => {
            params.top_n = n.unwrap_or(params.top_n);
            pipeline::top_terms_stage(&corpus, &output_dir, &params, p)?
        }
        Cmd::Run { workflow: path } => {
            let (mut cfg, base): (WorkflowConfig, PathBuf) = WorkflowConfig::load(&path)?;
            if cli.partitions != 1 {
                cfg.partitions = cli.partitions;
            }
            let report = workflow::run_workflow_with(&cfg, &base, &params)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(());
        }
    };
    println!("in={} out={}", counts.in_count, counts.out_count);
    Ok(())
}
