//! Confidence backends and calibration.
//!
//! A backend is a total function from triples to `[0, 1]`, plus a bulk
//! materializer producing per-relation sparse matrices of raw confidences
//! (default 0, exceptions at or above `delta1`). Exact backends delegate to
//! closed-world lookup on a KG split; the tabular backend ingests
//! externally predicted scores; the embedding scorer is a minimal trainable
//! stand-in for a full uncertain-KG embedding model.
//!
//! Two calibration strategies correct a biased backend: alpha-debiasing
//! ([`debias_query`]) shifts every atom's necessity down by a constant, and
//! learned affine calibration ([`calibrate::AffineCalibration`]) rescales
//! predicted confidences with per-triple coefficients trained on utility
//! mean squared error.

pub mod calibrate;
mod checkpoint;
mod scorer;

pub use calibrate::{
    calibration_loss, calibration_loss_and_grad, train_calibration, AffineCalibration,
    CalibratedBackend, CalibrationExample, CalibrationHyper, FeatureTable,
};
pub use checkpoint::{load_calibration, load_scorer, save_calibration, save_scorer};
pub use scorer::{train_embedding_scorer, EmbeddingScorer, ScorerHyper};

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::kg::{EntityId, RelationId, Split, UncertainKG};
use crate::query::SoftQuery;
use crate::scalar::Scalar;
use crate::semiring::DefaultSparseMatrix;

#[derive(Debug, thiserror::Error)]
pub enum ConfidenceError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed line, expected 4 tab-separated fields")]
    Malformed { file: String, line: usize },
    #[error("{file}:{line}: score out of range: {value}")]
    ScoreRange {
        file: String,
        line: usize,
        value: f64,
    },
    #[error("{file}:{line}: unknown entity or relation `{name}`")]
    UnknownName {
        file: String,
        line: usize,
        name: String,
    },
    #[error("embedding dimension must be positive")]
    BadDimension,
    #[error("train split is empty")]
    EmptyTrainSplit,
    #[error("calibration training requires alpha = 0 on every atom")]
    CalibrationAlphaNonzero,
    #[error("calibration training saw no answers with positive utility")]
    EmptyTrainingAnswers,
    #[error("checkpoint {file}: {reason}")]
    Checkpoint { file: String, reason: String },
}

/// A total confidence function over triples, with a bulk per-relation
/// materializer. Outputs must lie in `[0, 1]` and be deterministic.
pub trait ConfidenceBackend<S: Scalar>: Send + Sync {
    fn num_entities(&self) -> usize;
    fn num_relations(&self) -> usize;

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S;

    /// Per-relation matrix of raw confidences: default 0, exceptions where
    /// the confidence is nonzero and at least `delta1`. The default
    /// implementation scans all entity pairs.
    fn relation_matrix(&self, r: RelationId, delta1: Option<S>) -> DefaultSparseMatrix<S> {
        let n = self.num_entities();
        let keep = keep_threshold(delta1);
        DefaultSparseMatrix::from_entries(
            n,
            S::zero(),
            (0..n)
                .flat_map(|s| (0..n).map(move |o| (s, o)))
                .filter_map(|(s, o)| {
                    let p = self.confidence(s, r, o);
                    (p >= keep && p > S::zero()).then_some((s, o, p))
                }),
        )
    }
}

fn keep_threshold<S: Scalar>(delta1: Option<S>) -> S {
    delta1.unwrap_or_else(S::zero)
}

impl<S: Scalar, B: ConfidenceBackend<S> + ?Sized> ConfidenceBackend<S> for &B {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }
    fn num_relations(&self) -> usize {
        (**self).num_relations()
    }
    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        (**self).confidence(s, r, o)
    }
    fn relation_matrix(&self, r: RelationId, delta1: Option<S>) -> DefaultSparseMatrix<S> {
        (**self).relation_matrix(r, delta1)
    }
}

impl<S: Scalar, B: ConfidenceBackend<S> + ?Sized> ConfidenceBackend<S> for Box<B> {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }
    fn num_relations(&self) -> usize {
        (**self).num_relations()
    }
    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        (**self).confidence(s, r, o)
    }
    fn relation_matrix(&self, r: RelationId, delta1: Option<S>) -> DefaultSparseMatrix<S> {
        (**self).relation_matrix(r, delta1)
    }
}

impl<S: Scalar, B: ConfidenceBackend<S> + ?Sized> ConfidenceBackend<S> for Arc<B> {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }
    fn num_relations(&self) -> usize {
        (**self).num_relations()
    }
    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        (**self).confidence(s, r, o)
    }
    fn relation_matrix(&self, r: RelationId, delta1: Option<S>) -> DefaultSparseMatrix<S> {
        (**self).relation_matrix(r, delta1)
    }
}

/// Closed-world exact backend over one split view.
#[derive(Debug)]
pub struct LookupBackend<S> {
    kg: Arc<UncertainKG<S>>,
    split: Split,
}

/// Backend delegating to closed-world lookup on the given split.
pub fn lookup_backend<S: Scalar>(kg: Arc<UncertainKG<S>>, split: Split) -> LookupBackend<S> {
    LookupBackend { kg, split }
}

impl<S: Scalar> ConfidenceBackend<S> for LookupBackend<S> {
    fn num_entities(&self) -> usize {
        self.kg.num_entities()
    }

    fn num_relations(&self) -> usize {
        self.kg.num_relations()
    }

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        self.kg.confidence(self.split, s, r, o)
    }

    fn relation_matrix(&self, r: RelationId, delta1: Option<S>) -> DefaultSparseMatrix<S> {
        let keep = keep_threshold(delta1);
        DefaultSparseMatrix::from_entries(
            self.kg.num_entities(),
            S::zero(),
            self.kg
                .view(self.split)
                .facts_with_relation(r)
                .filter(|f| f.confidence >= keep && f.confidence > S::zero())
                .map(|f| (f.head, f.tail, f.confidence)),
        )
    }
}

/// Predicted scores ingested from a TSV file; unlisted triples score 0.
#[derive(Debug)]
pub struct TabularBackend<S> {
    n_entities: usize,
    n_relations: usize,
    scores: HashMap<(u32, u32, u32), S>,
}

impl<S: Scalar> TabularBackend<S> {
    pub fn load(path: impl AsRef<Path>, kg: &UncertainKG<S>) -> Result<Self, ConfidenceError> {
        let path = path.as_ref();
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfidenceError::Io {
            file: file.clone(),
            source,
        })?;
        Self::from_tsv_str(&text, &file, kg)
    }

    pub fn from_tsv_str(
        text: &str,
        file: &str,
        kg: &UncertainKG<S>,
    ) -> Result<Self, ConfidenceError> {
        let mut scores = HashMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let line_no = line_no + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [h, r, t, p] = fields.as_slice() else {
                return Err(ConfidenceError::Malformed {
                    file: file.into(),
                    line: line_no,
                });
            };
            let lookup_err = |name: &str| ConfidenceError::UnknownName {
                file: file.into(),
                line: line_no,
                name: name.into(),
            };
            let s = kg.entity_id(h).map_err(|_| lookup_err(h))?;
            let rel = kg.relation_id(r).map_err(|_| lookup_err(r))?;
            let o = kg.entity_id(t).map_err(|_| lookup_err(t))?;
            let score: f64 = p.trim().parse().map_err(|_| ConfidenceError::Malformed {
                file: file.into(),
                line: line_no,
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(ConfidenceError::ScoreRange {
                    file: file.into(),
                    line: line_no,
                    value: score,
                });
            }
            scores.insert((s as u32, rel as u32, o as u32), S::from_f64_lossy(score));
        }
        Ok(Self {
            n_entities: kg.num_entities(),
            n_relations: kg.num_relations(),
            scores,
        })
    }
}

impl<S: Scalar> ConfidenceBackend<S> for TabularBackend<S> {
    fn num_entities(&self) -> usize {
        self.n_entities
    }

    fn num_relations(&self) -> usize {
        self.n_relations
    }

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        self.scores
            .get(&(s as u32, r as u32, o as u32))
            .copied()
            .unwrap_or_else(S::zero)
    }

    fn relation_matrix(&self, r: RelationId, delta1: Option<S>) -> DefaultSparseMatrix<S> {
        let keep = keep_threshold(delta1);
        DefaultSparseMatrix::from_entries(
            self.n_entities,
            S::zero(),
            self.scores.iter().filter_map(|(&(s, rel, o), &p)| {
                (rel as usize == r && p >= keep && p > S::zero())
                    .then_some((s as usize, o as usize, p))
            }),
        )
    }
}

/// Debiasing configuration: shift every atom's necessity down by
/// `delta_alpha`, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebiasConfig<S> {
    pub delta_alpha: S,
}

impl<S: Scalar> DebiasConfig<S> {
    pub fn new(delta_alpha: S) -> Self {
        assert!(
            (S::zero()..=S::one()).contains(&delta_alpha),
            "delta_alpha out of range"
        );
        Self { delta_alpha }
    }
}

/// Replace every atom's alpha by `max(alpha - delta_alpha, 0)`.
pub fn debias_query<S: Scalar>(query: &SoftQuery<S>, cfg: DebiasConfig<S>) -> SoftQuery<S> {
    query.map_alpha(|a| {
        let shifted = a - cfg.delta_alpha;
        if shifted > S::zero() {
            shifted
        } else {
            S::zero()
        }
    })
}
