//! Brute-force reference evaluator.
//!
//! Evaluates the recursive query semantics literally: enumerate every
//! assignment of the existential variables, ⊗-fold the atom values of each
//! sentence, ⊕ over assignments and disjuncts. It never touches sparse
//! matrices or the delta thresholds and calls the backend pointwise, so it
//! is independent of every optimized path it is used to check.
//! Intentionally naive; the budget is the only guard.

use crate::confidence::ConfidenceBackend;
use crate::kg::EntityId;
use crate::query::{SoftConjunctiveQuery, SoftQuery, Term};
use crate::scalar::Scalar;
use crate::semiring::{self, UtilityVector};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("oracle budget of {budget} assignment evaluations exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("assignment does not bind variable x{0}")]
    UnassignedVariable(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Maximum number of sentence evaluations per query.
    pub budget: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { budget: 1_000_000 }
    }
}

/// A total assignment: the free variable plus every existential.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub free: EntityId,
    pub bindings: Vec<(u32, EntityId)>,
}

impl Assignment {
    pub fn lookup(&self, var: u32) -> Option<EntityId> {
        self.bindings
            .iter()
            .find(|(v, _)| *v == var)
            .map(|(_, e)| *e)
    }
}

/// ⊗-fold of the atom values of one sentence, in atom order.
pub fn eval_sentence<S: Scalar, B: ConfidenceBackend<S>>(
    conj: &SoftConjunctiveQuery<S>,
    assignment: &Assignment,
    backend: &B,
) -> Result<S, OracleError> {
    let resolve = |t: Term| -> Result<EntityId, OracleError> {
        match t {
            Term::Const(e) => Ok(e),
            Term::Free => Ok(assignment.free),
            Term::Exist(i) => assignment
                .lookup(i)
                .ok_or(OracleError::UnassignedVariable(i)),
        }
    };
    let mut acc = S::zero();
    for atom in &conj.atoms {
        let s = resolve(atom.head)?;
        let o = resolve(atom.tail)?;
        let p = backend.confidence(s, atom.relation, o);
        acc = semiring::mul(
            acc,
            semiring::atom_value(p, atom.alpha, atom.beta, atom.negated),
        );
    }
    Ok(acc)
}

/// Exact utility vector by full enumeration.
pub fn brute_force_utility<S: Scalar, B: ConfidenceBackend<S>>(
    query: &SoftQuery<S>,
    backend: &B,
    cfg: &OracleConfig,
) -> Result<UtilityVector<S>, OracleError> {
    let n = backend.num_entities();
    let mut result = UtilityVector::all_zero_bar(n);
    let mut remaining = cfg.budget;

    for disjunct in &query.disjuncts {
        // precompiled term slots: avoid variable-name lookups per sentence
        let slot = |t: Term| -> Slot {
            match t {
                Term::Const(e) => Slot::Const(e),
                Term::Free => Slot::Free,
                Term::Exist(i) => Slot::Exist(
                    disjunct
                        .existentials
                        .iter()
                        .position(|&x| x == i)
                        .expect("existential declared"),
                ),
            }
        };
        let compiled: Vec<(Slot, usize, Slot, S, S, bool)> = disjunct
            .atoms
            .iter()
            .map(|a| {
                (
                    slot(a.head),
                    a.relation,
                    slot(a.tail),
                    a.alpha,
                    a.beta,
                    a.negated,
                )
            })
            .collect();

        let k = disjunct.existentials.len();
        let mut assignment = vec![0usize; k];
        for free in 0..n {
            let mut best = semiring::zero_bar::<S>();
            assignment.iter_mut().for_each(|a| *a = 0);
            loop {
                if remaining == 0 {
                    return Err(OracleError::BudgetExceeded { budget: cfg.budget });
                }
                remaining -= 1;

                let resolve = |s: Slot| -> EntityId {
                    match s {
                        Slot::Const(e) => e,
                        Slot::Free => free,
                        Slot::Exist(pos) => assignment[pos],
                    }
                };
                let mut acc = S::zero();
                for &(h, r, t, alpha, beta, negated) in &compiled {
                    let p = backend.confidence(resolve(h), r, resolve(t));
                    acc = semiring::mul(acc, semiring::atom_value(p, alpha, beta, negated));
                }
                best = semiring::add(best, acc);

                // odometer, last variable fastest
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
            result.set(free, semiring::add(result.get(free), best));
        }
    }
    Ok(result)
}

#[derive(Clone, Copy)]
enum Slot {
    Const(EntityId),
    Free,
    Exist(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::lookup_backend;
    use crate::kg::{Split, UncertainKG};
    use crate::query::RawQuery;
    use std::sync::Arc;

    fn backend() -> crate::confidence::LookupBackend<f64> {
        let kg = Arc::new(
            UncertainKG::from_tsv_strs("a\tr1\tb\t0.9\nb\tr2\tc\t0.6\n", "", "").unwrap(),
        );
        lookup_backend(kg, Split::Train)
    }

    fn query(text: &str) -> SoftQuery<f64> {
        let kg =
            UncertainKG::from_tsv_strs("a\tr1\tb\t0.9\nb\tr2\tc\t0.6\n", "", "").unwrap();
        RawQuery::parse_text(text).unwrap().resolve(&kg).unwrap()
    }

    #[test]
    fn grounded_sentence_is_a_lookup() {
        let b = backend();
        let q = query("(a, r1, b, 0, 1) & (a, r1, y, 0, 1)");
        let asg = Assignment {
            free: 1,
            bindings: vec![],
        };
        let v = eval_sentence(&q.disjuncts[0], &asg, &b).unwrap();
        let expected = crate::semiring::atom_value(0.9, 0.0, 1.0, false);
        assert_eq!(v, expected + expected);
    }

    #[test]
    fn threshold_kill_absorbs_the_sentence() {
        let b = backend();
        let q = query("(a, r1, y, 0.95, 1) & (b, r2, y, 0, 1)");
        let asg = Assignment {
            free: 1,
            bindings: vec![],
        };
        assert_eq!(
            eval_sentence(&q.disjuncts[0], &asg, &b).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn negated_absent_fact_scores_beta() {
        let b = backend();
        let q = query("!(b, r1, y, 0, 2) & (a, r1, y, 0, 1)");
        // P(b, r1, a) = 0, so the negated atom contributes 2 * (1 - 0)
        let asg = Assignment {
            free: 0,
            bindings: vec![],
        };
        let v = eval_sentence(&q.disjuncts[0], &asg, &b).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }

    #[test]
    fn unassigned_variable_errors() {
        let b = backend();
        let q = query("EXISTS x1 . (x1, r1, y, 0, 1)");
        let asg = Assignment {
            free: 0,
            bindings: vec![],
        };
        assert_eq!(
            eval_sentence(&q.disjuncts[0], &asg, &b).unwrap_err(),
            OracleError::UnassignedVariable(1)
        );
    }

    #[test]
    fn two_hop_chain_matches_hand_evaluation() {
        let b = backend();
        let q = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let u = brute_force_utility(&q, &b, &OracleConfig::default()).unwrap();
        // entity c reaches 0.9 + 0.6 through x1 = b; a and b max out at
        // 0.9 + 0 via x1 = b with an absent second hop
        let q09 = crate::semiring::atom_value(0.9, 0.0, 1.0, false);
        let q06 = crate::semiring::atom_value(0.6, 0.0, 1.0, false);
        assert_eq!(u.get(2), q09 + q06);
        assert_eq!(u.get(0), q09);
        assert_eq!(u.get(1), q09);
    }

    #[test]
    fn disjunction_with_itself_is_idempotent() {
        let b = backend();
        let single = query("(a, r1, y, 0, 1)");
        let doubled = query("(a, r1, y, 0, 1) | (a, r1, y, 0, 1)");
        let u1 = brute_force_utility(&single, &b, &OracleConfig::default()).unwrap();
        let u2 = brute_force_utility(&doubled, &b, &OracleConfig::default()).unwrap();
        assert_eq!(u1, u2);
    }

    #[test]
    fn atom_permutation_is_invariant() {
        let b = backend();
        let q1 = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let q2 = query("EXISTS x1 . (x1, r2, y, 0, 1) & (a, r1, x1, 0, 1)");
        let u1 = brute_force_utility(&q1, &b, &OracleConfig::default()).unwrap();
        let u2 = brute_force_utility(&q2, &b, &OracleConfig::default()).unwrap();
        assert_eq!(u1, u2);
    }

    #[test]
    fn budget_is_enforced() {
        let b = backend();
        let q = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let err = brute_force_utility(&q, &b, &OracleConfig { budget: 5 }).unwrap_err();
        assert_eq!(err, OracleError::BudgetExceeded { budget: 5 });
    }
}
