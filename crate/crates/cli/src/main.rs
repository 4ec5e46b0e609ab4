//! Command-line front end for the role-detection pipeline.
//!
//! Exit status: 0 success, 2 configuration error, 3 data error, 4 runtime
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rolesense::corpus::ClassStats;
use rolesense::eval::Prediction;
use rolesense::pipeline::{self, PipelineConfig};
use rolesense::{Error, ErrorKind, Model};

#[derive(Parser)]
#[command(name = "rolesense", version, about = "Cyberbullying role detection pipeline")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Class counts and token-length statistics.
    Stats,
    /// Write the capped context-target samples and their comment vectors.
    Transform,
    /// Run ADASYN on the whole dataset and write every synthetic point's origin.
    OversamplePreview,
    /// Fit the configured model on the whole dataset.
    Train,
    /// Score a saved model.
    Evaluate {
        /// Model artifact written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Comment vectors to use instead of the configured provider.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Cross-validate and write the full report bundle.
    Run,
}

struct Ctx {
    cfg: PipelineConfig,
    output: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn progress(&self) -> impl Fn(&str) + '_ {
        move |msg: &str| {
            if !self.quiet {
                eprintln!("{msg}");
            }
        }
    }
}

fn load(cli: &Cli) -> Result<Ctx, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output = out.clone();
    }
    Ok(Ctx {
        output: cfg.output.clone(),
        cfg,
        quiet: cli.quiet,
    })
}

fn stats_table(title: &str, stats: &ClassStats) -> String {
    let mut out = format!("{title}\n");
    out.push_str(&format!(
        "{:<20} {:>8} {:>8} {:>8} {:>6}\n",
        "class", "count", "share", "median", "p99"
    ));
    for row in &stats.classes {
        out.push_str(&format!(
            "{:<20} {:>8} {:>7.3}% {:>8} {:>6}\n",
            format!("{} {}", row.label.index(), row.label.name()),
            row.count,
            row.share * 100.0,
            row.median_tokens,
            row.p99_tokens
        ));
    }
    out.push_str(&format!(
        "{:<20} {:>8} {:>7.3}% {:>8} {:>6}\n",
        "total", stats.total, 100.0, stats.overall_median_tokens, stats.overall_p99_tokens
    ));
    out
}

fn stats(ctx: &Ctx, write: bool) -> Result<(), Error> {
    let (samples, before) = pipeline::load_samples(&ctx.cfg)?;
    let after = rolesense::corpus::class_stats(&samples, rolesense::embedding::tokenize_baseline)?;
    print!("{}", stats_table("samples before cap", &before));
    println!();
    print!("{}", stats_table("samples after cap", &after));
    if write {
        let doc = serde_json::json!({"before_cap": before, "after_cap": after});
        pipeline::write_bundle(&ctx.output, &[("stats.json".into(), pipeline::json_file(&doc))])?;
    }
    Ok(())
}

fn transform(ctx: &Ctx) -> Result<(), Error> {
    let data = pipeline::prepare(&ctx.cfg, None)?;
    let mut jsonl = Vec::new();
    for s in &data.samples {
        serde_json::to_writer(&mut jsonl, s).expect("sample serializes");
        jsonl.push(b'\n');
    }
    let mut table = Vec::new();
    data.table.write_to(&mut table).map_err(|e| Error::io(&ctx.output, e))?;
    pipeline::write_bundle(
        &ctx.output,
        &[("samples.jsonl".into(), jsonl), ("embeddings.cte".into(), table)],
    )?;
    (ctx.progress())(&format!(
        "wrote {} samples and {} comment vectors to {}",
        data.len(),
        data.table.len(),
        ctx.output.display()
    ));
    Ok(())
}

fn preview(ctx: &Ctx) -> Result<(), Error> {
    let p = pipeline::oversample_preview(&ctx.cfg)?;
    pipeline::write_bundle(
        &ctx.output,
        &[
            ("oversample.json".into(), pipeline::json_file(&p)),
            ("synthetic.csv".into(), pipeline::synthetic_csv(&p.synthetic).into_bytes()),
        ],
    )?;
    println!("class counts before {:?}", p.counts_before);
    println!("class counts after  {:?}", p.counts_after);
    Ok(())
}

fn train(ctx: &Ctx) -> Result<(), Error> {
    let progress = ctx.progress();
    let t = pipeline::train_full(&ctx.cfg, &progress)?;
    let mut model = Vec::new();
    t.model.write_to(&mut model).map_err(|e| Error::io(&ctx.output, e))?;
    let mut table = Vec::new();
    t.data.table.write_to(&mut table).map_err(|e| Error::io(&ctx.output, e))?;
    let summary = serde_json::json!({
        "model": ctx.cfg.model.kind(),
        "seed": ctx.cfg.seed,
        "training": t.training,
    });
    pipeline::write_bundle(
        &ctx.output,
        &[
            ("model.bin".into(), model),
            ("embeddings.cte".into(), table),
            ("train_metrics.json".into(), pipeline::json_file(&t.in_sample)),
            ("training.json".into(), pipeline::json_file(&summary)),
        ],
    )?;
    progress(&format!(
        "in-sample weighted F1 {:.4}; model written to {}",
        t.in_sample.top1.f1,
        ctx.output.join("model.bin").display()
    ));
    Ok(())
}

fn evaluate(ctx: &Ctx, model: &Path, embeddings: Option<&Path>) -> Result<(), Error> {
    let m = Model::load(model)?;
    let data = pipeline::prepare(&ctx.cfg, embeddings)?;
    let (preds, report) = pipeline::evaluate_model(&m, &data, &ctx.cfg.eval.policy())?;
    let rows: Vec<(Option<usize>, &Prediction, _)> = preds
        .iter()
        .zip(&data.samples)
        .map(|(p, s)| (None, p, s.label))
        .collect();
    pipeline::write_bundle(
        &ctx.output,
        &[
            ("metrics.json".into(), pipeline::json_file(&report)),
            ("confusion.csv".into(), report.confusion.to_csv().into_bytes()),
            ("predictions.csv".into(), pipeline::predictions_csv(rows).into_bytes()),
        ],
    )?;
    (ctx.progress())(&format!(
        "weighted F1 {:.4}, top-2 F1 {:.4}, thresholded F1 {:.4} at tau {:.4}",
        report.top1.f1, report.top2.f1, report.thresholded.f1, report.threshold
    ));
    Ok(())
}

fn run(ctx: &Ctx) -> Result<(), Error> {
    let progress = ctx.progress();
    let report = pipeline::run(&ctx.cfg, &progress)?;
    report.write(&ctx.output)?;
    progress(&format!("report written to {}", ctx.output.display()));
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    let ctx = load(cli)?;
    match &cli.command {
        Command::Stats => stats(&ctx, cli.output.is_some()),
        Command::Transform => transform(&ctx),
        Command::OversamplePreview => preview(&ctx),
        Command::Train => train(&ctx),
        Command::Evaluate { model, embeddings } => evaluate(&ctx, model, embeddings.as_deref()),
        Command::Run => run(&ctx),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Runtime => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
