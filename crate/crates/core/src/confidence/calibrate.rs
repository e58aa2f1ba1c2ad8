//! Learned affine calibration of a confidence backend.
//!
//! The calibrated confidence is `P_c(s,r,o) = P(s,r,o) * (1 + rho) + lambda`
//! clamped to `[0, 1]`, where `(rho, lambda)` is an affine function of the
//! feature embeddings of the subject, relation, and object slots: one
//! `2 x d` weight block and a bias pair per slot, shared across the
//! vocabulary. Training minimizes the squared error between predicted and
//! observed utilities over answers with positive utility, on queries whose
//! atoms all have `alpha = 0` so thresholding is inactive.
//!
//! Gradients flow through the tropical `max` along the argmax path (ties
//! resolved toward the lexicographically smallest assignment) and
//! additively through `+`. Training evaluates utilities in smooth
//! (unquantized) arithmetic; the trained parameters are then used by the
//! grid-quantized engine.

use std::sync::Arc;

use rand_chacha::ChaCha12Rng;

use crate::kg::{EntityId, RelationId};
use crate::query::{SoftQuery, Term};
use crate::rng;
use crate::scalar::Scalar;

use super::{ConfidenceBackend, ConfidenceError, EmbeddingScorer};

/// Feature embeddings consumed by the calibration layer. For an embedding
/// scorer base these are the scorer's own embeddings; other backends get an
/// explicit (e.g. seeded random) table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<S> {
    pub dim: usize,
    entity: Vec<S>,
    relation: Vec<S>,
}

impl<S: Scalar> FeatureTable<S> {
    pub fn from_scorer(scorer: &EmbeddingScorer<S>) -> Self {
        Self {
            dim: scorer.dim,
            entity: scorer.entity_params().to_vec(),
            relation: scorer.relation_params().to_vec(),
        }
    }

    pub fn random(n_entities: usize, n_relations: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::substream(seed, "calibration-features");
        let mut draw = |len: usize| -> Vec<S> {
            (0..len)
                .map(|_| S::from_f64_lossy(rng::uniform01(&mut rng) - 0.5))
                .collect()
        };
        Self {
            dim,
            entity: draw(n_entities * dim),
            relation: draw(n_relations * dim),
        }
    }

    /// Intercept-only features: the calibration collapses to one global
    /// `(rho, lambda)` pair, the right capacity for recovering a uniform
    /// affine distortion of a backend that has no embeddings of its own.
    pub fn constant(n_entities: usize, n_relations: usize) -> Self {
        Self {
            dim: 1,
            entity: vec![S::one(); n_entities],
            relation: vec![S::one(); n_relations],
        }
    }

    pub fn entity_features(&self, e: EntityId) -> &[S] {
        &self.entity[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation_features(&self, r: RelationId) -> &[S] {
        &self.relation[r * self.dim..(r + 1) * self.dim]
    }
}

const SLOTS: usize = 3; // subject, relation, object

/// Affine calibration parameters: per slot a `rho` row, a `lambda` row
/// (each of the feature dimension), and a bias pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCalibration<S> {
    pub dim: usize,
    w_rho: [Vec<S>; SLOTS],
    w_lambda: [Vec<S>; SLOTS],
    b_rho: [S; SLOTS],
    b_lambda: [S; SLOTS],
}

impl<S: Scalar> AffineCalibration<S> {
    /// Zero-initialized calibration: the identity on any base backend.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            w_rho: std::array::from_fn(|_| vec![S::zero(); dim]),
            w_lambda: std::array::from_fn(|_| vec![S::zero(); dim]),
            b_rho: [S::zero(); SLOTS],
            b_lambda: [S::zero(); SLOTS],
        }
    }

    pub fn param_len(&self) -> usize {
        SLOTS * (2 * self.dim + 2)
    }

    /// Flatten parameters (slot-major: w_rho, w_lambda, b_rho, b_lambda).
    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_len());
        for slot in 0..SLOTS {
            out.extend_from_slice(&self.w_rho[slot]);
            out.extend_from_slice(&self.w_lambda[slot]);
            out.push(self.b_rho[slot]);
            out.push(self.b_lambda[slot]);
        }
        out
    }

    pub fn set_params(&mut self, params: &[S]) {
        assert_eq!(params.len(), self.param_len(), "parameter length mismatch");
        let mut i = 0;
        for slot in 0..SLOTS {
            self.w_rho[slot].copy_from_slice(&params[i..i + self.dim]);
            i += self.dim;
            self.w_lambda[slot].copy_from_slice(&params[i..i + self.dim]);
            i += self.dim;
            self.b_rho[slot] = params[i];
            self.b_lambda[slot] = params[i + 1];
            i += 2;
        }
    }

    /// `(rho, lambda)` for one triple.
    #[allow(clippy::needless_range_loop)]
    pub fn rho_lambda(
        &self,
        features: &FeatureTable<S>,
        s: EntityId,
        r: RelationId,
        o: EntityId,
    ) -> (S, S) {
        debug_assert_eq!(features.dim, self.dim, "feature dimension mismatch");
        let slot_feats = [
            features.entity_features(s),
            features.relation_features(r),
            features.entity_features(o),
        ];
        let mut rho = S::zero();
        let mut lambda = S::zero();
        for slot in 0..SLOTS {
            let f = slot_feats[slot];
            for k in 0..self.dim {
                rho = rho + self.w_rho[slot][k] * f[k];
                lambda = lambda + self.w_lambda[slot][k] * f[k];
            }
            rho = rho + self.b_rho[slot];
            lambda = lambda + self.b_lambda[slot];
        }
        (rho, lambda)
    }
}

fn clamp01<S: Scalar>(v: S) -> S {
    if v < S::zero() {
        S::zero()
    } else if v > S::one() {
        S::one()
    } else {
        v
    }
}

/// A backend whose raw confidence is affinely recalibrated per triple.
pub struct CalibratedBackend<S, B> {
    base: B,
    features: Arc<FeatureTable<S>>,
    cal: AffineCalibration<S>,
}

impl<S: Scalar, B: ConfidenceBackend<S>> CalibratedBackend<S, B> {
    pub fn new(base: B, features: Arc<FeatureTable<S>>, cal: AffineCalibration<S>) -> Self {
        assert_eq!(features.dim, cal.dim, "feature/calibration dimension mismatch");
        Self {
            base,
            features,
            cal,
        }
    }

    pub fn calibration(&self) -> &AffineCalibration<S> {
        &self.cal
    }
}

impl<S: Scalar, B: ConfidenceBackend<S>> ConfidenceBackend<S> for CalibratedBackend<S, B> {
    fn num_entities(&self) -> usize {
        self.base.num_entities()
    }

    fn num_relations(&self) -> usize {
        self.base.num_relations()
    }

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        let p = self.base.confidence(s, r, o);
        let (rho, lambda) = self.cal.rho_lambda(&self.features, s, r, o);
        clamp01(p * (S::one() + rho) + lambda)
    }
}

/// One training example: an `alpha = 0` query and its observed utilities.
#[derive(Debug, Clone)]
pub struct CalibrationExample<S> {
    pub query: SoftQuery<S>,
    pub answers: Vec<(EntityId, S)>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CalibrationHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 120,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Smooth (unquantized) utility of `query(answer)` under the calibrated
/// backend, together with the argmax path. Assumes `alpha = 0` everywhere,
/// so every atom value is finite and differentiable up to the clamp.
struct SmoothEval<'a, S, B> {
    base: &'a B,
    features: &'a FeatureTable<S>,
    cal: &'a AffineCalibration<S>,
}

struct Winner {
    disjunct: usize,
    assignment: Vec<EntityId>,
}

impl<'a, S: Scalar, B: ConfidenceBackend<S>> SmoothEval<'a, S, B> {
    fn atom_terms(
        &self,
        atom: &crate::query::SoftAtom<S>,
        answer: EntityId,
        existentials: &[u32],
        assignment: &[EntityId],
    ) -> (EntityId, RelationId, EntityId) {
        let resolve = |t: Term| -> EntityId {
            match t {
                Term::Const(e) => e,
                Term::Free => answer,
                Term::Exist(i) => {
                    let pos = existentials
                        .iter()
                        .position(|&x| x == i)
                        .expect("existential declared");
                    assignment[pos]
                }
            }
        };
        (resolve(atom.head), atom.relation, resolve(atom.tail))
    }

    fn atom_value(&self, atom: &crate::query::SoftAtom<S>, s: EntityId, o: EntityId) -> S {
        let p = self.base.confidence(s, atom.relation, o);
        let (rho, lambda) = self.cal.rho_lambda(self.features, s, atom.relation, o);
        let pc = clamp01(p * (S::one() + rho) + lambda);
        if atom.negated {
            atom.beta * (S::one() - pc)
        } else {
            atom.beta * pc
        }
    }

    fn utility(&self, query: &SoftQuery<S>, answer: EntityId) -> (S, Winner) {
        let n = self.base.num_entities();
        let mut best: Option<(S, Winner)> = None;
        for (di, disjunct) in query.disjuncts.iter().enumerate() {
            let k = disjunct.existentials.len();
            let mut assignment = vec![0usize; k];
            loop {
                let mut value = S::zero();
                for atom in &disjunct.atoms {
                    let (s, _, o) =
                        self.atom_terms(atom, answer, &disjunct.existentials, &assignment);
                    value = value + self.atom_value(atom, s, o);
                }
                let better = match &best {
                    None => true,
                    Some((bv, _)) => value > *bv,
                };
                if better {
                    best = Some((
                        value,
                        Winner {
                            disjunct: di,
                            assignment: assignment.clone(),
                        },
                    ));
                }
                // odometer over assignments, last variable fastest
                let mut pos = k;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    assignment[pos] += 1;
                    if assignment[pos] < n {
                        break;
                    }
                    assignment[pos] = 0;
                }
                if k == 0 || assignment.iter().all(|&a| a == 0) {
                    break;
                }
            }
        }
        best.expect("query has at least one disjunct")
    }

    /// Accumulate `coeff * dU/dparams` along the winner path into `grad`
    /// (flat layout of [`AffineCalibration::params`]).
    #[allow(clippy::needless_range_loop)]
    fn accumulate_grad(
        &self,
        query: &SoftQuery<S>,
        answer: EntityId,
        winner: &Winner,
        coeff: S,
        grad: &mut [S],
    ) {
        let d = self.cal.dim;
        let stride = 2 * d + 2;
        let disjunct = &query.disjuncts[winner.disjunct];
        for atom in &disjunct.atoms {
            let (s, r, o) =
                self.atom_terms(atom, answer, &disjunct.existentials, &winner.assignment);
            let p = self.base.confidence(s, r, o);
            let (rho, lambda) = self.cal.rho_lambda(self.features, s, r, o);
            let z = p * (S::one() + rho) + lambda;
            if z < S::zero() || z > S::one() {
                continue; // clamp subgradient is zero outside [0, 1]
            }
            let sign = if atom.negated {
                -atom.beta
            } else {
                atom.beta
            };
            let c = coeff * sign;
            let slot_feats = [
                self.features.entity_features(s),
                self.features.relation_features(r),
                self.features.entity_features(o),
            ];
            for slot in 0..SLOTS {
                let offset = slot * stride;
                let f = slot_feats[slot];
                for k in 0..d {
                    // z = p * (1 + rho) + lambda
                    grad[offset + k] = grad[offset + k] + c * p * f[k];
                    grad[offset + d + k] = grad[offset + d + k] + c * f[k];
                }
                grad[offset + 2 * d] = grad[offset + 2 * d] + c * p;
                grad[offset + 2 * d + 1] = grad[offset + 2 * d + 1] + c;
            }
        }
    }
}

/// Total squared utility error of the calibrated backend over all answers
/// with positive observed utility.
pub fn calibration_loss<S: Scalar, B: ConfidenceBackend<S>>(
    base: &B,
    features: &FeatureTable<S>,
    cal: &AffineCalibration<S>,
    examples: &[CalibrationExample<S>],
) -> S {
    let eval = SmoothEval {
        base,
        features,
        cal,
    };
    let mut loss = S::zero();
    for ex in examples {
        for &(answer, truth) in &ex.answers {
            if truth <= S::zero() {
                continue;
            }
            let (pred, _) = eval.utility(&ex.query, answer);
            let resid = pred - truth;
            loss = loss + resid * resid;
        }
    }
    loss
}

/// Loss plus its analytic gradient in the flat parameter layout.
pub fn calibration_loss_and_grad<S: Scalar, B: ConfidenceBackend<S>>(
    base: &B,
    features: &FeatureTable<S>,
    cal: &AffineCalibration<S>,
    examples: &[CalibrationExample<S>],
) -> (S, Vec<S>) {
    let eval = SmoothEval {
        base,
        features,
        cal,
    };
    let mut loss = S::zero();
    let mut grad = vec![S::zero(); cal.param_len()];
    let two = S::one() + S::one();
    for ex in examples {
        for &(answer, truth) in &ex.answers {
            if truth <= S::zero() {
                continue;
            }
            let (pred, winner) = eval.utility(&ex.query, answer);
            let resid = pred - truth;
            loss = loss + resid * resid;
            eval.accumulate_grad(&ex.query, answer, &winner, two * resid, &mut grad);
        }
    }
    (loss, grad)
}

/// Train the calibration by mini-batch gradient descent on utility MSE.
///
/// Every atom of every training query must carry `alpha = 0`; the examples
/// must contain at least one answer with positive utility.
pub fn train_calibration<S: Scalar, B: ConfidenceBackend<S>>(
    base: &B,
    features: &FeatureTable<S>,
    examples: &[CalibrationExample<S>],
    hyper: CalibrationHyper,
) -> Result<AffineCalibration<S>, ConfidenceError> {
    for ex in examples {
        for disjunct in &ex.query.disjuncts {
            if disjunct.atoms.iter().any(|a| a.alpha != S::zero()) {
                return Err(ConfidenceError::CalibrationAlphaNonzero);
            }
        }
    }
    let usable: usize = examples
        .iter()
        .map(|ex| ex.answers.iter().filter(|(_, u)| *u > S::zero()).count())
        .sum();
    if usable == 0 {
        return Err(ConfidenceError::EmptyTrainingAnswers);
    }

    let mut cal = AffineCalibration::zero(features.dim);
    let mut rng: ChaCha12Rng = rng::substream(hyper.seed, "calibration-train");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let batch = hyper.batch_size.max(1);
    let lr = S::from_f64_lossy(hyper.learning_rate);
    for _ in 0..hyper.epochs {
        rng::shuffle(&mut rng, &mut order);
        for chunk in order.chunks(batch) {
            let batch_examples: Vec<CalibrationExample<S>> =
                chunk.iter().map(|&i| examples[i].clone()).collect();
            // normalize by contributing answers, not queries: answer counts
            // vary wildly and the loss sums over them
            let answers: usize = batch_examples
                .iter()
                .map(|ex| ex.answers.iter().filter(|(_, u)| *u > S::zero()).count())
                .sum();
            if answers == 0 {
                continue;
            }
            let (_, grad) = calibration_loss_and_grad(base, features, &cal, &batch_examples);
            let scale = lr / S::from_f64_lossy(answers as f64);
            let mut params = cal.params();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p = *p - scale * *g;
            }
            cal.set_params(&params);
        }
    }
    Ok(cal)
}
