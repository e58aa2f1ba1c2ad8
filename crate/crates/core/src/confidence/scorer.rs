//! Minimal trainable embedding scorer: trilinear product through a
//! logistic squash. A desk-scale stand-in for pre-trained uncertain-KG
//! embedding models, not a replication of them.

use rand_chacha::ChaCha12Rng;

use crate::kg::{EntityId, RelationId, Split, UncertainKG, ViewFact};
use crate::rng;
use crate::scalar::Scalar;

use super::{ConfidenceBackend, ConfidenceError};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingScorer<S> {
    pub dim: usize,
    n_entities: usize,
    n_relations: usize,
    entity: Vec<S>,
    relation: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScorerHyper {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for ScorerHyper {
    fn default() -> Self {
        Self {
            dim: 16,
            epochs: 100,
            learning_rate: 0.1,
            negatives_per_positive: 2,
            seed: 0,
        }
    }
}

impl<S: Scalar> EmbeddingScorer<S> {
    pub fn init(dim: usize, n_entities: usize, n_relations: usize, rng: &mut ChaCha12Rng) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let mut draw = |len: usize| -> Vec<S> {
            (0..len)
                .map(|_| S::from_f64_lossy((rng::uniform01(rng) - 0.5) * scale))
                .collect()
        };
        Self {
            dim,
            n_entities,
            n_relations,
            entity: draw(n_entities * dim),
            relation: draw(n_relations * dim),
        }
    }

    pub fn from_parts(
        dim: usize,
        n_entities: usize,
        n_relations: usize,
        entity: Vec<S>,
        relation: Vec<S>,
    ) -> Self {
        assert_eq!(entity.len(), n_entities * dim);
        assert_eq!(relation.len(), n_relations * dim);
        Self {
            dim,
            n_entities,
            n_relations,
            entity,
            relation,
        }
    }

    pub fn entity_embedding(&self, e: EntityId) -> &[S] {
        &self.entity[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation_embedding(&self, r: RelationId) -> &[S] {
        &self.relation[r * self.dim..(r + 1) * self.dim]
    }

    pub fn entity_params(&self) -> &[S] {
        &self.entity
    }

    pub fn relation_params(&self) -> &[S] {
        &self.relation
    }

    fn raw_score(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        let (es, wr, eo) = (
            self.entity_embedding(s),
            self.relation_embedding(r),
            self.entity_embedding(o),
        );
        let mut z = S::zero();
        for k in 0..self.dim {
            z = z + es[k] * wr[k] * eo[k];
        }
        z
    }

    pub fn score(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        sigmoid(self.raw_score(s, r, o))
    }

    /// Mean squared error of predicted scores against observed confidences.
    pub fn mse(&self, facts: &[ViewFact<S>]) -> f64 {
        if facts.is_empty() {
            return 0.0;
        }
        let sum: f64 = facts
            .iter()
            .map(|f| {
                let d = (self.score(f.head, f.relation, f.tail) - f.confidence).to_f64_lossy();
                d * d
            })
            .sum();
        sum / facts.len() as f64
    }

    fn sgd_step(&mut self, s: EntityId, r: RelationId, o: EntityId, target: S, lr: S) {
        let z = self.raw_score(s, r, o);
        let p = sigmoid(z);
        // d/dz of (sigmoid(z) - t)^2
        let g = (S::one() + S::one()) * (p - target) * p * (S::one() - p);
        let dim = self.dim;
        let mut grad_s = vec![S::zero(); dim];
        let mut grad_r = vec![S::zero(); dim];
        let mut grad_o = vec![S::zero(); dim];
        {
            let (es, wr, eo) = (
                self.entity_embedding(s),
                self.relation_embedding(r),
                self.entity_embedding(o),
            );
            for k in 0..dim {
                grad_s[k] = g * wr[k] * eo[k];
                grad_r[k] = g * es[k] * eo[k];
                grad_o[k] = g * es[k] * wr[k];
            }
        }
        for k in 0..dim {
            self.entity[s * dim + k] = self.entity[s * dim + k] - lr * grad_s[k];
            self.relation[r * dim + k] = self.relation[r * dim + k] - lr * grad_r[k];
            self.entity[o * dim + k] = self.entity[o * dim + k] - lr * grad_o[k];
        }
    }
}

fn sigmoid<S: Scalar>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}

impl<S: Scalar> ConfidenceBackend<S> for EmbeddingScorer<S> {
    fn num_entities(&self) -> usize {
        self.n_entities
    }

    fn num_relations(&self) -> usize {
        self.n_relations
    }

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        self.score(s, r, o)
    }
}

/// Fit the scorer to observed confidences on the given split: squared error
/// toward the stored confidence on positives and toward 0 on uniformly
/// corrupted negatives. Deterministic given the seed.
pub fn train_embedding_scorer<S: Scalar>(
    kg: &UncertainKG<S>,
    split: Split,
    hyper: ScorerHyper,
) -> Result<EmbeddingScorer<S>, ConfidenceError> {
    if hyper.dim == 0 {
        return Err(ConfidenceError::BadDimension);
    }
    let facts = &kg.view(split).facts;
    if facts.is_empty() {
        return Err(ConfidenceError::EmptyTrainSplit);
    }
    let mut rng = rng::substream(hyper.seed, "scorer-train");
    let mut scorer = EmbeddingScorer::init(hyper.dim, kg.num_entities(), kg.num_relations(), &mut rng);
    let lr = S::from_f64_lossy(hyper.learning_rate);
    let n = kg.num_entities();
    let mut order: Vec<usize> = (0..facts.len()).collect();
    for _ in 0..hyper.epochs {
        rng::shuffle(&mut rng, &mut order);
        for &i in &order {
            let f = &facts[i];
            scorer.sgd_step(f.head, f.relation, f.tail, f.confidence, lr);
            for _ in 0..hyper.negatives_per_positive {
                let corrupt_head = rng::uniform_index(&mut rng, 2) == 0;
                let e = rng::uniform_index(&mut rng, n);
                let (s, o) = if corrupt_head { (e, f.tail) } else { (f.head, e) };
                scorer.sgd_step(s, f.relation, o, S::zero(), lr);
            }
        }
    }
    Ok(scorer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_kg() -> UncertainKG<f64> {
        UncertainKG::from_tsv_strs(
            "a\tr1\tb\t0.9\nb\tr1\tc\t0.8\nc\tr1\td\t0.7\nd\tr1\te\t0.6\n\
             a\tr2\tc\t0.5\nb\tr2\td\t0.4\nc\tr2\te\t0.3\nd\tr2\ta\t0.9\n\
             e\tr1\ta\t0.2\ne\tr2\tb\t0.85\n",
            "",
            "",
        )
        .unwrap()
    }

    #[test]
    fn training_reduces_mse() {
        let kg = toy_kg();
        let hyper = ScorerHyper {
            dim: 8,
            epochs: 500,
            learning_rate: 1.0,
            negatives_per_positive: 1,
            seed: 7,
        };
        let mut rng = rng::substream(hyper.seed, "scorer-train");
        let initial = EmbeddingScorer::<f64>::init(8, kg.num_entities(), kg.num_relations(), &mut rng);
        let initial_mse = initial.mse(&kg.view(Split::Train).facts);
        let trained = train_embedding_scorer(&kg, Split::Train, hyper).unwrap();
        let trained_mse = trained.mse(&kg.view(Split::Train).facts);
        assert!(
            trained_mse <= initial_mse * 0.5,
            "mse {initial_mse} -> {trained_mse}"
        );
    }

    #[test]
    fn zero_epochs_returns_initialized_scorer() {
        let kg = toy_kg();
        let hyper = ScorerHyper {
            dim: 4,
            epochs: 0,
            seed: 3,
            ..Default::default()
        };
        let trained = train_embedding_scorer(&kg, Split::Train, hyper).unwrap();
        let mut rng = rng::substream(3, "scorer-train");
        let init = EmbeddingScorer::<f64>::init(4, kg.num_entities(), kg.num_relations(), &mut rng);
        assert_eq!(trained, init);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let kg = toy_kg();
        let hyper = ScorerHyper {
            dim: 6,
            epochs: 20,
            seed: 11,
            ..Default::default()
        };
        let a = train_embedding_scorer(&kg, Split::Train, hyper).unwrap();
        let b = train_embedding_scorer(&kg, Split::Train, hyper).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_hyper_is_rejected() {
        let kg = toy_kg();
        let err = train_embedding_scorer::<f64>(
            &kg,
            Split::Train,
            ScorerHyper {
                dim: 0,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, ConfidenceError::BadDimension));
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let kg = toy_kg();
        let trained = train_embedding_scorer(
            &kg,
            Split::Train,
            ScorerHyper {
                dim: 4,
                epochs: 30,
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap();
        for s in 0..kg.num_entities() {
            for o in 0..kg.num_entities() {
                let p: f64 = trained.confidence(s, 0, o);
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
