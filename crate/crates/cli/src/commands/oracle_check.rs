//! `tropiq oracle-check`: cross-check the graph-shrinking engine against
//! the brute-force evaluator on randomly generated KGs and queries.

use std::sync::Arc;

use clap::Parser;
use tropiq::confidence::lookup_backend;
use tropiq::dataset::QueryType;
use tropiq::inference::{Engine, InferenceConfig};
use tropiq::kg::Split;
use tropiq::oracle::{brute_force_utility, OracleConfig};
use tropiq::synth::{gen_cyclic_query, gen_kg, gen_query, KgGenConfig};

use crate::config::Ctx;
use crate::errors::{AppError, Code};

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Number of random queries to check.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    relations: Option<usize>,
    #[arg(long)]
    facts: Option<usize>,
    /// Check single-cycle queries instead of the acyclic templates.
    #[arg(long)]
    cyclic: bool,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args) -> Result<(), AppError> {
    let ctx = Ctx::load(args.config.as_deref())?;
    let n = ctx.resolve(args.n, "n").unwrap_or(1000);
    let entities = ctx.resolve(args.entities, "entities").unwrap_or(20);
    let relations = ctx.resolve(args.relations, "relations").unwrap_or(4);
    let facts = ctx.resolve(args.facts, "facts").unwrap_or(entities * 3);
    let budget = ctx.resolve(args.budget, "budget").unwrap_or(10_000_000);
    let seed = ctx.resolve(args.seed, "seed").unwrap_or(0);
    let cyclic = args.cyclic || ctx.resolve::<bool>(None, "cyclic").unwrap_or(false);

    let kg_cfg = KgGenConfig {
        entities,
        relations,
        train_facts: facts,
        valid_extra: facts / 8,
        test_extra: facts / 8,
        override_prob: 0.2,
    };
    let oracle_cfg = OracleConfig { budget };

    let mut matched = 0usize;
    let mut produced = 0usize;
    let mut attempt = 0u64;
    while produced < n {
        attempt += 1;
        if attempt > 50 * n as u64 {
            return Err(AppError::new(
                Code::Generic,
                format!("query generation stalled after {attempt} attempts"),
            ));
        }
        let kg = Arc::new(gen_kg::<f64>(&kg_cfg, seed ^ attempt));
        let query = if cyclic {
            gen_cyclic_query(&kg, seed.wrapping_add(attempt))
        } else {
            let ty = QueryType::ALL[(attempt as usize) % QueryType::ALL.len()];
            gen_query(&kg, ty, seed.wrapping_add(attempt))
        };
        let Some(query) = query else { continue };
        produced += 1;
        let backend = lookup_backend(kg.clone(), Split::Train);
        let expected = brute_force_utility(&query, &backend, &oracle_cfg)?;
        let engine = Engine::new(
            lookup_backend(kg.clone(), Split::Train),
            InferenceConfig {
                enumeration_budget: budget,
                ..Default::default()
            },
        );
        let actual = engine.answer_query(&query)?;
        if actual == expected {
            matched += 1;
        } else {
            eprintln!("mismatch on attempt {attempt}");
        }
    }

    println!("{matched}/{produced} exact matches");
    if matched != produced {
        return Err(AppError::new(
            Code::CheckFailed,
            format!("{} mismatches", produced - matched),
        ));
    }
    Ok(())
}
