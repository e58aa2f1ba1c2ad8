//! Shared run configuration: optional JSON config file with flags winning,
//! backend construction, and the `run.json` reproducibility record.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde_json::Value;

use tropiq::confidence::{
    load_calibration, load_scorer, lookup_backend, CalibratedBackend, ConfidenceBackend,
    EmbeddingScorer, FeatureTable, TabularBackend,
};
use tropiq::kg::{Split, UncertainKG};
use tropiq::rng::fnv1a64;

use crate::errors::{AppError, Code};

/// Optional JSON config file; every flag may come from it, with the
/// explicit flag winning.
pub struct Ctx {
    file: Value,
}

impl Ctx {
    pub fn load(path: Option<&Path>) -> Result<Self, AppError> {
        let file = match path {
            None => Value::Null,
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| {
                    AppError::new(
                        Code::MalformedInput,
                        format!("{}: config is not valid JSON: {e}", p.display()),
                    )
                })?
            }
        };
        Ok(Self { file })
    }

    /// Flag value, else config-file value under `key`, else `None`.
    pub fn resolve<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Option<T> {
        flag.or_else(|| {
            self.file
                .get(key)
                .cloned()
                .and_then(|v| serde_json::from_value(v).ok())
        })
    }

    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, AppError> {
        self.resolve(flag, key)
            .ok_or_else(|| AppError::conflict(format!("missing required option --{key}")))
    }
}

pub fn load_kg(dir: &Path) -> Result<Arc<UncertainKG<f64>>, AppError> {
    let kg = UncertainKG::load_dir(dir)?;
    for w in kg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(Arc::new(kg))
}

/// Backend selector: `exact:<split>`, `tabular:<path>`, `embedding:<path>`.
pub enum BackendSpec {
    Exact(Split),
    Tabular(PathBuf),
    Embedding(PathBuf),
}

impl BackendSpec {
    pub fn parse(spec: &str) -> Result<Self, AppError> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| AppError::conflict(format!("bad backend spec `{spec}`")))?;
        match kind {
            "exact" => rest
                .parse()
                .map(BackendSpec::Exact)
                .map_err(AppError::conflict),
            "tabular" => Ok(BackendSpec::Tabular(rest.into())),
            "embedding" => Ok(BackendSpec::Embedding(rest.into())),
            other => Err(AppError::conflict(format!("unknown backend kind `{other}`"))),
        }
    }
}

pub struct BuiltBackend {
    pub backend: Box<dyn ConfidenceBackend<f64>>,
    pub scorer: Option<Arc<EmbeddingScorer<f64>>>,
}

/// Build the configured backend, optionally wrapped in learned calibration
/// (which requires the embedding backend for its feature table).
pub fn build_backend(
    spec: &str,
    kg: &Arc<UncertainKG<f64>>,
    calibration: Option<&Path>,
) -> Result<BuiltBackend, AppError> {
    let spec = BackendSpec::parse(spec)?;
    let (backend, scorer): (Box<dyn ConfidenceBackend<f64>>, _) = match spec {
        BackendSpec::Exact(split) => (Box::new(lookup_backend(kg.clone(), split)), None),
        BackendSpec::Tabular(path) => (Box::new(TabularBackend::load(&path, kg)?), None),
        BackendSpec::Embedding(path) => {
            let scorer = Arc::new(load_scorer::<f64>(&path)?);
            (Box::new(scorer.clone()), Some(scorer))
        }
    };
    match calibration {
        None => Ok(BuiltBackend { backend, scorer }),
        Some(path) => {
            let Some(scorer) = scorer else {
                return Err(AppError::conflict(
                    "learned calibration requires an embedding backend",
                ));
            };
            let cal = load_calibration::<f64>(path)?;
            let features = Arc::new(FeatureTable::from_scorer(&scorer));
            let wrapped = CalibratedBackend::new(scorer.clone(), features, cal);
            Ok(BuiltBackend {
                backend: Box::new(wrapped),
                scorer: Some(scorer),
            })
        }
    }
}

/// Write `run.json`: the full effective configuration, the master seed,
/// and digests of every input file. No timestamps; identical runs produce
/// identical bytes.
pub fn write_run_json(
    out: &Path,
    command: &str,
    config: Value,
    seed: u64,
    inputs: &[PathBuf],
) -> Result<(), AppError> {
    let mut digests = serde_json::Map::new();
    for path in inputs {
        let bytes = std::fs::read(path)?;
        digests.insert(
            path.display().to_string(),
            Value::String(format!("fnv1a64:{:016x}", fnv1a64(&bytes))),
        );
    }
    let doc = serde_json::json!({
        "tool": format!("tropiq {}", env!("CARGO_PKG_VERSION")),
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": digests,
    });
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("run.json"),
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("run.json serializes")),
    )?;
    Ok(())
}

/// Emit the entity/relation index mappings next to the outputs.
pub fn write_vocab(out: &Path, kg: &UncertainKG<f64>) -> Result<(), AppError> {
    std::fs::create_dir_all(out)?;
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    kg.write_vocab(&mut entities, &mut relations)?;
    std::fs::write(out.join("entities.tsv"), entities)?;
    std::fs::write(out.join("relations.tsv"), relations)?;
    Ok(())
}
