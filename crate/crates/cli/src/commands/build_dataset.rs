//! `tropiq build-dataset`: sample soft queries and write per-type JSONL
//! files plus a statistics report.

use std::path::PathBuf;

use clap::Parser;
use tropiq::dataset::{
    build_dataset, records_to_jsonl, AlphaMode, BetaMode, BuilderConfig, QueryType,
    RequirementStrategy,
};

use crate::config::{load_kg, write_run_json, write_vocab, Ctx};
use crate::errors::{AppError, Code};

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated train query types (subset of 1P,2P,2I,2IN,2IL).
    #[arg(long)]
    train_types: Option<String>,
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    valid_types: Option<String>,
    #[arg(long)]
    valid_count: Option<usize>,
    #[arg(long)]
    test_types: Option<String>,
    #[arg(long)]
    test_count: Option<usize>,
    /// Necessity mode: zero, low, normal, high, hybrid.
    #[arg(long)]
    alpha_mode: Option<String>,
    /// Importance mode: equal, random.
    #[arg(long)]
    beta_mode: Option<String>,
    /// Hybrid necessity drawn once per query instead of per atom.
    #[arg(long)]
    per_query_hybrid: bool,
    #[arg(long)]
    max_answers: Option<usize>,
    #[arg(long)]
    retries: Option<usize>,
    /// Answer with the inference engine instead of the oracle.
    #[arg(long)]
    engine_answers: bool,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_types(spec: &str) -> Result<Vec<QueryType>, AppError> {
    spec.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse::<QueryType>()
                .map_err(|e| AppError::new(Code::ConfigConflict, e))
        })
        .collect()
}

fn parse_alpha(mode: &str) -> Result<AlphaMode, AppError> {
    match mode {
        "zero" => Ok(AlphaMode::Zero),
        "low" => Ok(AlphaMode::Low),
        "normal" => Ok(AlphaMode::Normal),
        "high" => Ok(AlphaMode::High),
        "hybrid" => Ok(AlphaMode::Hybrid),
        other => Err(AppError::conflict(format!("unknown alpha mode `{other}`"))),
    }
}

fn parse_beta(mode: &str) -> Result<BetaMode, AppError> {
    match mode {
        "equal" => Ok(BetaMode::Equal),
        "random" => Ok(BetaMode::Random),
        other => Err(AppError::conflict(format!("unknown beta mode `{other}`"))),
    }
}

pub fn run(args: Args) -> Result<(), AppError> {
    let ctx = Ctx::load(args.config.as_deref())?;
    let kg_dir: PathBuf = ctx.require(args.kg_dir, "kg-dir")?;
    let out: PathBuf = ctx.require(args.out, "out")?;
    let seed = ctx.resolve(args.seed, "seed").unwrap_or(0);

    let section = |types: Option<String>,
                   count: Option<usize>,
                   key: &str|
     -> Result<Vec<(QueryType, usize)>, AppError> {
        let types = ctx.resolve(types, &format!("{key}-types"));
        let count = ctx.resolve(count, &format!("{key}-count")).unwrap_or(0);
        match types {
            None => Ok(vec![]),
            Some(spec) => Ok(parse_types(&spec)?
                .into_iter()
                .map(|t| (t, count))
                .collect()),
        }
    };

    let strategy = RequirementStrategy {
        alpha: parse_alpha(
            &ctx.resolve(args.alpha_mode, "alpha-mode")
                .unwrap_or_else(|| "hybrid".to_owned()),
        )?,
        beta: parse_beta(
            &ctx.resolve(args.beta_mode, "beta-mode")
                .unwrap_or_else(|| "random".to_owned()),
        )?,
        per_query_hybrid: args.per_query_hybrid
            || ctx.resolve::<bool>(None, "per-query-hybrid").unwrap_or(false),
    };
    let config = BuilderConfig {
        train: section(args.train_types, args.train_count, "train")?,
        valid: section(args.valid_types, args.valid_count, "valid")?,
        test: section(args.test_types, args.test_count, "test")?,
        strategy,
        seed,
        max_answers: ctx.resolve(args.max_answers, "max-answers").unwrap_or(100),
        retries_per_record: ctx.resolve(args.retries, "retries").unwrap_or(100),
        exact: !args.engine_answers,
        oracle_budget: ctx.resolve(args.budget, "budget").unwrap_or(1_000_000),
    };
    if config.train.is_empty() && config.valid.is_empty() && config.test.is_empty() {
        return Err(AppError::conflict(
            "nothing to build: no section has types and counts",
        ));
    }

    let kg = load_kg(&kg_dir)?;
    let build = tropiq_build(&kg, &config)?;

    std::fs::create_dir_all(&out)?;
    for (stem, records) in &build.files {
        std::fs::write(out.join(format!("{stem}.jsonl")), records_to_jsonl(records))?;
    }
    std::fs::write(
        out.join("stats.json"),
        format!(
            "{}\n",
            serde_json::to_string_pretty(&build.stats).expect("stats serialize")
        ),
    )?;
    write_vocab(&out, &kg)?;
    write_run_json(
        &out,
        "build-dataset",
        serde_json::json!({
            "kg-dir": kg_dir.display().to_string(),
            "train": config.train.iter().map(|(t, n)| (t.name(), n)).collect::<Vec<_>>(),
            "valid": config.valid.iter().map(|(t, n)| (t.name(), n)).collect::<Vec<_>>(),
            "test": config.test.iter().map(|(t, n)| (t.name(), n)).collect::<Vec<_>>(),
            "strategy": strategy,
            "max-answers": config.max_answers,
            "retries": config.retries_per_record,
            "exact": config.exact,
            "budget": config.oracle_budget,
        }),
        seed,
        &[],
    )?;
    for (stem, stats) in &build.stats.per_file {
        eprintln!(
            "{stem}: {} of {} requested ({} attempts)",
            stats.emitted, stats.requested, stats.attempts
        );
    }
    Ok(())
}

fn tropiq_build(
    kg: &std::sync::Arc<tropiq::kg::UncertainKG<f64>>,
    config: &BuilderConfig,
) -> Result<tropiq::dataset::DatasetBuild, AppError> {
    Ok(build_dataset(kg, config)?)
}
