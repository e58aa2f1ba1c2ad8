//! `tropiq calibrate`: train the learned affine calibration on alpha = 0
//! training queries with observed utilities.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use tropiq::confidence::{
    save_calibration, train_calibration, CalibrationExample, CalibrationHyper, FeatureTable,
};
use tropiq::dataset::{load_records, DatasetRecord};

use crate::config::{build_backend, load_kg, write_run_json, Ctx};
use crate::errors::AppError;

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg_dir: Option<PathBuf>,
    /// Dataset record files (JSONL) with alpha = 0 queries.
    #[arg(long, num_args = 1..)]
    records: Vec<PathBuf>,
    /// Must be `embedding:<path>`; calibration features come from the
    /// scorer embeddings.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_answers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args) -> Result<(), AppError> {
    let ctx = Ctx::load(args.config.as_deref())?;
    let kg_dir: PathBuf = ctx.require(args.kg_dir, "kg-dir")?;
    let out: PathBuf = ctx.require(args.out, "out")?;
    let backend_spec: String = ctx.require(args.backend, "backend")?;
    let records_paths: Vec<PathBuf> = if args.records.is_empty() {
        ctx.require(None, "records")?
    } else {
        args.records
    };
    let hyper = CalibrationHyper {
        learning_rate: ctx.resolve(args.lr, "lr").unwrap_or(0.05),
        epochs: ctx.resolve(args.epochs, "epochs").unwrap_or(120),
        batch_size: ctx.resolve(args.batch_size, "batch-size").unwrap_or(16),
        seed: ctx.resolve(args.seed, "seed").unwrap_or(0),
    };
    let max_answers = ctx.resolve(args.max_answers, "max-answers").unwrap_or(100);

    let kg = load_kg(&kg_dir)?;
    let built = build_backend(&backend_spec, &kg, None)?;
    let Some(scorer) = built.scorer else {
        return Err(AppError::conflict(
            "learned calibration requires an embedding backend",
        ));
    };
    let features = FeatureTable::from_scorer(&scorer);

    let mut examples = Vec::new();
    for path in &records_paths {
        let text = std::fs::read_to_string(path)?;
        for record in load_records(&text, max_answers)? {
            examples.push(example_from_record(&record, &kg)?);
        }
    }
    let cal = train_calibration(&*scorer, &features, &examples, hyper)?;

    std::fs::create_dir_all(&out)?;
    let ckpt = out.join("calibration.ckpt");
    save_calibration(
        &ckpt,
        &cal,
        &serde_json::json!({ "kind": "affine-calibration", "hyper": hyper, "seed": hyper.seed }),
    )?;
    write_run_json(
        &out,
        "calibrate",
        serde_json::json!({
            "kg-dir": kg_dir.display().to_string(),
            "backend": backend_spec,
            "records": records_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "hyper": hyper,
            "max-answers": max_answers,
        }),
        hyper.seed,
        &records_paths,
    )?;
    eprintln!(
        "calibration trained on {} queries, written to {}",
        examples.len(),
        ckpt.display()
    );
    Ok(())
}

fn example_from_record(
    record: &DatasetRecord,
    kg: &Arc<tropiq::kg::UncertainKG<f64>>,
) -> Result<CalibrationExample<f64>, AppError> {
    let query = record.query.resolve::<f64>(kg)?;
    let answers = DatasetRecord::answers_by_id(&record.test_answers, kg)?
        .into_iter()
        .collect();
    Ok(CalibrationExample { query, answers })
}
