//! Soft query answering over uncertain knowledge graphs.
//!
//! An uncertain KG attaches a confidence value in `[0, 1]` to every fact.
//! Queries here are existential first-order formulas whose atoms carry two
//! soft requirements: a necessity threshold `alpha` that filters facts below
//! it, and an importance weight `beta` that scales the surviving confidence.
//! Query values live in the tropical (max, +, -inf) semiring: `+` combines
//! conjuncts, `max` resolves existentials and disjunction, and `-inf` is the
//! absorbing "infeasible" value.
//!
//! The main pieces:
//!
//! - [`kg`]: TSV loading, nested train/valid/test views, closed-world lookup.
//! - [`query`]: the soft query DSL, JSON form, and query graphs.
//! - [`semiring`]: state vectors, default-valued sparse matrices, max-plus
//!   join kernels.
//! - [`confidence`]: confidence backends (exact, tabular, embedding) plus
//!   alpha-debiasing and learned affine calibration.
//! - [`inference`]: the graph-shrinking engine (constant-node folds,
//!   self-loop folds, leaf joins, cycle enumeration).
//! - [`oracle`]: a deliberately naive assignment-enumeration evaluator used
//!   as ground truth.
//! - [`dataset`]: query sampling, requirement strategies, useful-query
//!   filtering, JSONL serialization.
//! - [`metrics`]: learning-to-rank evaluation (MAP, NDCG, Kendall tau,
//!   Spearman rho) and the error-accumulation probe.
//! - [`synth`]: seeded random KGs, queries, and perturbed backends for
//!   cross-checking.
//!
//! Core arithmetic is generic over the [`scalar::Scalar`] type (`f32` or
//! `f64`); the aliases below fix the default `f64` instantiation.

pub mod confidence;
pub mod dataset;
pub mod inference;
pub mod kg;
pub mod metrics;
pub mod oracle;
pub mod query;
pub mod rng;
pub mod scalar;
pub mod semiring;
pub mod synth;

pub use scalar::Scalar;

/// Default scalar type for engine arithmetic.
pub type Value = f64;

/// Uncertain KG over the default scalar.
pub type Kg = kg::UncertainKG<Value>;
/// Soft query over the default scalar.
pub type Query = query::SoftQuery<Value>;
/// Per-variable state vector over the default scalar.
pub type StateVec = semiring::StateVector<Value>;
/// Utility vector over the default scalar.
pub type UtilityVec = semiring::UtilityVector<Value>;
/// Default-valued sparse matrix over the default scalar.
pub type SparseMat = semiring::DefaultSparseMatrix<Value>;
/// Inference configuration over the default scalar.
pub type Config = inference::InferenceConfig<Value>;
/// Inference engine over the default scalar and a chosen backend.
pub type Engine<B> = inference::Engine<Value, B>;
