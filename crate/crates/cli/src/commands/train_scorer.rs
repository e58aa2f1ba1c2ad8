//! `tropiq train-scorer`: fit the minimal embedding scorer on the train
//! split and write a checkpoint plus JSON sidecar.

use std::path::PathBuf;

use clap::Parser;
use tropiq::confidence::{save_scorer, train_embedding_scorer, ScorerHyper};
use tropiq::kg::Split;

use crate::config::{load_kg, write_run_json, Ctx};
use crate::errors::AppError;

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args) -> Result<(), AppError> {
    let ctx = Ctx::load(args.config.as_deref())?;
    let kg_dir: PathBuf = ctx.require(args.kg_dir, "kg-dir")?;
    let out: PathBuf = ctx.require(args.out, "out")?;
    let hyper = ScorerHyper {
        dim: ctx.resolve(args.dim, "dim").unwrap_or(16),
        epochs: ctx.resolve(args.epochs, "epochs").unwrap_or(100),
        learning_rate: ctx.resolve(args.lr, "lr").unwrap_or(0.1),
        negatives_per_positive: ctx.resolve(args.negatives, "negatives").unwrap_or(2),
        seed: ctx.resolve(args.seed, "seed").unwrap_or(0),
    };

    let kg = load_kg(&kg_dir)?;
    let scorer = train_embedding_scorer(&kg, Split::Train, hyper)?;
    let mse = scorer.mse(&kg.view(Split::Train).facts);

    std::fs::create_dir_all(&out)?;
    let ckpt = out.join("scorer.ckpt");
    save_scorer(
        &ckpt,
        &scorer,
        &serde_json::json!({ "kind": "embedding-scorer", "hyper": hyper, "seed": hyper.seed }),
    )?;
    write_run_json(
        &out,
        "train-scorer",
        serde_json::json!({
            "kg-dir": kg_dir.display().to_string(),
            "hyper": hyper,
        }),
        hyper.seed,
        &[],
    )?;
    eprintln!("scorer written to {} (train mse {mse:.6})", ckpt.display());
    Ok(())
}
