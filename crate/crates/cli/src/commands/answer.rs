//! `tropiq answer`: evaluate queries against a backend and write the
//! ranked answers as `query_id<TAB>entity<TAB>utility` rows.

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use tropiq::confidence::{debias_query, DebiasConfig};
use tropiq::inference::{write_predictions, Engine, InferenceConfig};
use tropiq::query::RawQuery;
use tropiq::semiring::JoinStrategy;

use crate::config::{build_backend, load_kg, write_run_json, write_vocab, Ctx};
use crate::errors::{AppError, Code};

#[derive(Parser)]
pub struct Args {
    /// Optional JSON config file; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding train.tsv / valid.tsv / test.tsv.
    #[arg(long)]
    kg_dir: Option<PathBuf>,
    /// Query file: DSL lines, canonical query JSON lines, or dataset
    /// records (JSONL).
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Backend: `exact:<split>`, `tabular:<path>`, `embedding:<path>`.
    #[arg(long)]
    backend: Option<String>,
    /// Learned calibration checkpoint (requires an embedding backend).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Debias: subtract this from every atom's necessity (clamped at 0).
    #[arg(long)]
    debias: Option<f64>,
    /// Matrix build threshold.
    #[arg(long)]
    delta1: Option<f64>,
    /// State pruning threshold.
    #[arg(long)]
    delta2: Option<f64>,
    /// Cycle enumeration budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Dump each transformation step to trace.jsonl.
    #[arg(long)]
    emit_trace: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), AppError> {
    let ctx = Ctx::load(args.config.as_deref())?;
    let kg_dir: PathBuf = ctx.require(args.kg_dir, "kg-dir")?;
    let queries_path: PathBuf = ctx.require(args.queries, "queries")?;
    let out: PathBuf = ctx.require(args.out, "out")?;
    let backend_spec: String = ctx
        .resolve(args.backend, "backend")
        .unwrap_or_else(|| "exact:train".to_owned());
    let debias = ctx.resolve(args.debias, "debias");
    let delta1 = ctx.resolve(args.delta1, "delta1");
    let delta2 = ctx.resolve(args.delta2, "delta2");
    let budget = ctx.resolve(args.budget, "budget").unwrap_or(1_000_000);
    let seed = ctx.resolve(args.seed, "seed").unwrap_or(0);
    let emit_trace = args.emit_trace
        || ctx
            .resolve::<bool>(None, "emit-trace")
            .unwrap_or(false);

    let kg = load_kg(&kg_dir)?;
    let built = build_backend(&backend_spec, &kg, args.calibration.as_deref())?;
    let engine = Engine::new(
        built.backend,
        InferenceConfig {
            delta1,
            delta2,
            enumeration_budget: budget,
            join_strategy: JoinStrategy::Auto,
        },
    );
    let debias_cfg = debias.map(DebiasConfig::new);

    let text = std::fs::read_to_string(&queries_path)?;
    let queries = parse_query_lines(&text)?;

    std::fs::create_dir_all(&out)?;
    let mut predictions = Vec::new();
    let mut trace_out = Vec::new();
    for (id, raw) in &queries {
        let mut query = raw.resolve::<f64>(&kg)?;
        if let Some(cfg) = debias_cfg {
            query = debias_query(&query, cfg);
        }
        let outcome = engine.answer_query_full(&query)?;
        write_predictions(&mut predictions, id, &outcome.utilities, |e| {
            kg.entity_name(e).to_owned()
        })?;
        if emit_trace {
            for event in &outcome.trace {
                let mut line = serde_json::to_value(event).expect("trace serializes");
                line.as_object_mut()
                    .expect("trace event is an object")
                    .insert("query_id".into(), serde_json::Value::String(id.clone()));
                writeln!(trace_out, "{line}")?;
            }
        }
    }
    std::fs::write(out.join("predictions.tsv"), predictions)?;
    if emit_trace {
        std::fs::write(out.join("trace.jsonl"), trace_out)?;
    }
    write_vocab(&out, &kg)?;
    write_run_json(
        &out,
        "answer",
        serde_json::json!({
            "kg-dir": kg_dir.display().to_string(),
            "queries": queries_path.display().to_string(),
            "backend": backend_spec,
            "calibration": args.calibration.as_ref().map(|p| p.display().to_string()),
            "debias": debias,
            "delta1": delta1,
            "delta2": delta2,
            "budget": budget,
            "emit-trace": emit_trace,
        }),
        seed,
        std::slice::from_ref(&queries_path),
    )?;
    eprintln!("answered {} queries", queries.len());
    Ok(())
}

/// Accept DSL lines, canonical query JSON, or full dataset records.
pub fn parse_query_lines(text: &str) -> Result<Vec<(String, RawQuery)>, AppError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| {
                AppError::new(
                    Code::MalformedInput,
                    format!("line {}: bad JSON: {e}", i + 1),
                )
            })?;
            if value.get("query").is_some() {
                let record: tropiq::dataset::DatasetRecord = serde_json::from_value(value)
                    .map_err(|e| {
                        AppError::new(
                            Code::MalformedInput,
                            format!("line {}: bad dataset record: {e}", i + 1),
                        )
                    })?;
                out.push((record.id.clone(), record.query));
            } else {
                let raw = RawQuery::parse_json(line)?;
                out.push((format!("q{:05}", i), raw));
            }
        } else {
            let raw = RawQuery::parse_text(line)?;
            out.push((format!("q{:05}", i), raw));
        }
    }
    if out.is_empty() {
        return Err(AppError::new(Code::MalformedInput, "no queries in input"));
    }
    Ok(out)
}
