//! `tropiq evaluate`: learning-to-rank metrics of a predictions TSV
//! against dataset records.

use std::path::PathBuf;

use clap::Parser;
use tropiq::dataset::load_records;
use tropiq::metrics::{evaluate_records, parse_predictions_tsv};

use crate::config::{load_kg, write_run_json, Ctx};
use crate::errors::AppError;

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg_dir: Option<PathBuf>,
    /// Dataset record files (JSONL) providing ground-truth utilities.
    #[arg(long, num_args = 1..)]
    records: Vec<PathBuf>,
    /// Predictions TSV (`query_id<TAB>entity<TAB>utility`).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Fixed NDCG cutoff; defaults to the answer-set size per query.
    #[arg(long)]
    ndcg_k: Option<usize>,
    /// Also emit report.csv mirroring the tabular layout.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    max_answers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), AppError> {
    let ctx = Ctx::load(args.config.as_deref())?;
    let kg_dir: PathBuf = ctx.require(args.kg_dir, "kg-dir")?;
    let out: PathBuf = ctx.require(args.out, "out")?;
    let predictions_path: PathBuf = ctx.require(args.predictions, "predictions")?;
    let records_paths: Vec<PathBuf> = if args.records.is_empty() {
        ctx.require(None, "records")?
    } else {
        args.records
    };
    let ndcg_k = ctx.resolve(args.ndcg_k, "ndcg-k");
    let max_answers = ctx.resolve(args.max_answers, "max-answers").unwrap_or(100);
    let seed = ctx.resolve(args.seed, "seed").unwrap_or(0);
    let csv = args.csv || ctx.resolve::<bool>(None, "csv").unwrap_or(false);

    let kg = load_kg(&kg_dir)?;
    let mut records = Vec::new();
    for path in &records_paths {
        let text = std::fs::read_to_string(path)?;
        records.extend(load_records(&text, max_answers)?);
    }
    let predictions = parse_predictions_tsv(&std::fs::read_to_string(&predictions_path)?)?;
    let report = evaluate_records(&records, &predictions, &*kg, ndcg_k)?;

    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("report.json"),
        format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    )?;
    if csv {
        std::fs::write(out.join("report.csv"), report.to_csv())?;
    }
    let mut inputs = records_paths.clone();
    inputs.push(predictions_path.clone());
    write_run_json(
        &out,
        "evaluate",
        serde_json::json!({
            "kg-dir": kg_dir.display().to_string(),
            "records": records_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "predictions": predictions_path.display().to_string(),
            "ndcg-k": ndcg_k,
            "max-answers": max_answers,
            "csv": csv,
        }),
        seed,
        &inputs,
    )?;
    println!(
        "evaluated {} queries: avg tau {:.4}, rho {:.4}, MAP {:.4}, NDCG {:.4} ({} skipped for correlation)",
        report.average.queries,
        report.average.tau,
        report.average.rho,
        report.average.map,
        report.average.ndcg,
        report.skipped_correlation,
    );
    Ok(())
}
