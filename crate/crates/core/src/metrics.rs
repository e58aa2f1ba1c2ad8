//! Learning-to-rank evaluation of predicted utility vectors, plus the
//! empirical error-accumulation probe.
//!
//! The ground-truth answer set `A` of a query is the set of entities whose
//! eval-view utility is positive. The predicted ranking is total over
//! `A` plus the predicted support: predicted entities ordered by utility
//! descending (index ascending on ties), then unpredicted answers appended
//! in ascending index order. Rank correlation (Kendall tau-b, Spearman rho
//! with average ranks) compares utility values over `A` only and is
//! skipped for singleton answer sets.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceBackend;
use crate::dataset::DatasetRecord;
use crate::kg::{EntityId, UncertainKG};
use crate::oracle::{brute_force_utility, OracleConfig, OracleError};
use crate::query::{SoftQuery, Term};
use crate::scalar::Scalar;
use crate::semiring::{self, atom_value};
use crate::synth::NoisyBackend;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no prediction rows for query `{0}`")]
    IdMismatch(String),
    #[error("prediction set is empty")]
    EmptyPredictions,
    #[error("record `{0}` has an empty answer set")]
    EmptyAnswerSet(String),
    #[error("unknown entity `{0}` in predictions or records")]
    UnknownEntity(String),
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
}

/// Ground-truth and predicted utilities of one query.
#[derive(Debug, Clone)]
pub struct EvalPair<S> {
    pub truth: BTreeMap<EntityId, S>,
    pub predicted: BTreeMap<EntityId, S>,
}

impl<S: Scalar> EvalPair<S> {
    pub fn answer_count(&self) -> usize {
        self.truth.len()
    }

    /// Total predicted ranking over predicted support plus `A`.
    pub fn predicted_ranking(&self) -> Vec<EntityId> {
        let mut ranked: Vec<(EntityId, S)> =
            self.predicted.iter().map(|(&e, &v)| (e, v)).collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("utilities are never NaN")
                .then(a.0.cmp(&b.0))
        });
        let mut order: Vec<EntityId> = ranked.into_iter().map(|(e, _)| e).collect();
        for &a in self.truth.keys() {
            if !self.predicted.contains_key(&a) {
                order.push(a);
            }
        }
        order
    }

    /// 1-based rank of every entity in the total predicted ranking.
    fn ranks(&self) -> HashMap<EntityId, usize> {
        self.predicted_ranking()
            .into_iter()
            .enumerate()
            .map(|(i, e)| (e, i + 1))
            .collect()
    }

    /// Answers sorted by ground-truth utility descending, index ascending.
    fn answers_by_truth(&self) -> Vec<EntityId> {
        let mut answers: Vec<(EntityId, S)> = self.truth.iter().map(|(&e, &v)| (e, v)).collect();
        answers.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("utilities are never NaN")
                .then(a.0.cmp(&b.0))
        });
        answers.into_iter().map(|(e, _)| e).collect()
    }

    /// Predicted value of an answer; unpredicted answers sit below every
    /// prediction.
    fn predicted_value(&self, e: EntityId) -> S {
        self.predicted
            .get(&e)
            .copied()
            .unwrap_or_else(semiring::zero_bar)
    }
}

/// Fraction of the top `k` predicted positions occupied by answers.
pub fn precision_at_k<S: Scalar>(pair: &EvalPair<S>, k: usize) -> f64 {
    assert!(!pair.truth.is_empty(), "precision over an empty answer set");
    assert!(k > 0, "precision at k = 0");
    let ranks = pair.ranks();
    let hits = pair
        .truth
        .keys()
        .filter(|a| ranks.get(a).is_some_and(|&r| r <= k))
        .count();
    hits as f64 / k as f64
}

/// Mean of `P@k` over the positions `k` holding an answer.
pub fn average_precision<S: Scalar>(pair: &EvalPair<S>) -> f64 {
    assert!(!pair.truth.is_empty(), "AP over an empty answer set");
    let ranking = pair.predicted_ranking();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, e) in ranking.iter().enumerate() {
        if pair.truth.contains_key(e) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / pair.truth.len() as f64
}

/// Mean average precision over queries.
pub fn mean_average_precision<S: Scalar>(pairs: &[EvalPair<S>]) -> f64 {
    assert!(!pairs.is_empty(), "MAP over no queries");
    pairs.iter().map(average_precision).sum::<f64>() / pairs.len() as f64
}

/// NDCG with reciprocal-rank gains: answers ordered by ground-truth
/// utility, gain `1 / predicted_rank`, discount `1 / log2(i + 1)`; the
/// ideal ranking puts answer `i` at predicted rank `i`. `k` defaults to
/// `|A|`.
pub fn ndcg<S: Scalar>(pair: &EvalPair<S>, k: Option<usize>) -> f64 {
    assert!(!pair.truth.is_empty(), "NDCG over an empty answer set");
    let answers = pair.answers_by_truth();
    let k = k.unwrap_or(answers.len()).min(answers.len()).max(1);
    let ranks = pair.ranks();
    let mut dcg = 0.0;
    let mut ideal = 0.0;
    for (i, a) in answers.iter().take(k).enumerate() {
        let discount = 1.0 / ((i + 2) as f64).log2();
        let rank = ranks[a] as f64;
        dcg += (1.0 / rank) * discount;
        ideal += (1.0 / (i + 1) as f64) * discount;
    }
    dcg / ideal
}

/// Tie-corrected Kendall tau-b over the answer set; `None` for fewer than
/// two answers, `0` when one side is entirely tied.
pub fn kendall_tau<S: Scalar>(pair: &EvalPair<S>) -> Option<f64> {
    if pair.truth.len() < 2 {
        return None;
    }
    let items: Vec<(S, S)> = pair
        .truth
        .iter()
        .map(|(&e, &t)| (t, pair.predicted_value(e)))
        .collect();
    let n = items.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let (xi, yi) = items[i];
            let (xj, yj) = items[j];
            let tie_x = xi == xj;
            let tie_y = yi == yj;
            if tie_x && tie_y {
                ties_x += 1;
                ties_y += 1;
            } else if tie_x {
                ties_x += 1;
            } else if tie_y {
                ties_y += 1;
            } else if (xi > xj) == (yi > yj) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    if denom == 0.0 {
        return Some(0.0);
    }
    Some((concordant - discordant) as f64 / denom)
}

fn average_ranks<S: Scalar>(values: &[S]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("utilities are never NaN")
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rho with average ranks for ties; `None` for fewer than two
/// answers, `0` when one side is entirely tied.
pub fn spearman_rho<S: Scalar>(pair: &EvalPair<S>) -> Option<f64> {
    if pair.truth.len() < 2 {
        return None;
    }
    let truth: Vec<S> = pair.truth.values().copied().collect();
    let predicted: Vec<S> = pair
        .truth
        .keys()
        .map(|&e| pair.predicted_value(e))
        .collect();
    let rx = average_ranks(&truth);
    let ry = average_ranks(&predicted);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut var_x, mut var_y) = (0.0, 0.0, 0.0);
    for i in 0..rx.len() {
        let (dx, dy) = (rx[i] - mean, ry[i] - mean);
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Some(0.0);
    }
    Some(cov / (var_x * var_y).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub queries: usize,
    /// Queries contributing to tau/rho (answer sets of size >= 2).
    pub correlated: usize,
    pub map: f64,
    pub ndcg: f64,
    pub tau: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: BTreeMap<String, MetricRow>,
    pub average: MetricRow,
    /// Queries skipped for correlation metrics (singleton answer sets).
    pub skipped_correlation: usize,
}

impl EvalReport {
    /// CSV form: one row per type plus the average row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,queries,tau,rho,map,ndcg\n");
        for (ty, row) in &self.per_type {
            out.push_str(&format!(
                "{ty},{},{},{},{},{}\n",
                row.queries, row.tau, row.rho, row.map, row.ndcg
            ));
        }
        out.push_str(&format!(
            "AVG,{},{},{},{},{}\n",
            self.average.queries,
            self.average.tau,
            self.average.rho,
            self.average.map,
            self.average.ndcg
        ));
        out
    }
}

/// Aggregate metrics per query type and averaged across types.
pub fn evaluate_pairs<S: Scalar>(
    items: &[(String, EvalPair<S>)],
    ndcg_k: Option<usize>,
) -> Result<EvalReport, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::EmptyPredictions);
    }
    struct Acc {
        queries: usize,
        correlated: usize,
        map: f64,
        ndcg: f64,
        tau: f64,
        rho: f64,
    }
    let mut per_type: BTreeMap<String, Acc> = BTreeMap::new();
    let mut skipped = 0usize;
    for (ty, pair) in items {
        let acc = per_type.entry(ty.clone()).or_insert(Acc {
            queries: 0,
            correlated: 0,
            map: 0.0,
            ndcg: 0.0,
            tau: 0.0,
            rho: 0.0,
        });
        acc.queries += 1;
        acc.map += average_precision(pair);
        acc.ndcg += ndcg(pair, ndcg_k);
        match (kendall_tau(pair), spearman_rho(pair)) {
            (Some(t), Some(r)) => {
                acc.correlated += 1;
                acc.tau += t;
                acc.rho += r;
            }
            _ => skipped += 1,
        }
    }
    let rows: BTreeMap<String, MetricRow> = per_type
        .into_iter()
        .map(|(ty, acc)| {
            let c = acc.correlated.max(1) as f64;
            (
                ty,
                MetricRow {
                    queries: acc.queries,
                    correlated: acc.correlated,
                    map: acc.map / acc.queries as f64,
                    ndcg: acc.ndcg / acc.queries as f64,
                    tau: acc.tau / c,
                    rho: acc.rho / c,
                },
            )
        })
        .collect();
    let k = rows.len() as f64;
    let average = MetricRow {
        queries: rows.values().map(|r| r.queries).sum(),
        correlated: rows.values().map(|r| r.correlated).sum(),
        map: rows.values().map(|r| r.map).sum::<f64>() / k,
        ndcg: rows.values().map(|r| r.ndcg).sum::<f64>() / k,
        tau: rows.values().map(|r| r.tau).sum::<f64>() / k,
        rho: rows.values().map(|r| r.rho).sum::<f64>() / k,
    };
    Ok(EvalReport {
        per_type: rows,
        average,
        skipped_correlation: skipped,
    })
}

/// Evaluate dataset records against a prediction set keyed by query id
/// (entity names as in the records).
pub fn evaluate_records<S: Scalar>(
    records: &[DatasetRecord],
    predictions: &HashMap<String, BTreeMap<String, f64>>,
    kg: &UncertainKG<S>,
    ndcg_k: Option<usize>,
) -> Result<EvalReport, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyPredictions);
    }
    let mut items = Vec::with_capacity(records.len());
    for record in records {
        let rows = predictions
            .get(&record.id)
            .ok_or_else(|| MetricsError::IdMismatch(record.id.clone()))?;
        if record.test_answers.is_empty() {
            return Err(MetricsError::EmptyAnswerSet(record.id.clone()));
        }
        let resolve = |m: &BTreeMap<String, f64>| -> Result<BTreeMap<EntityId, S>, MetricsError> {
            m.iter()
                .map(|(name, &v)| {
                    kg.entity_id(name)
                        .map(|e| (e, S::from_f64_lossy(v)))
                        .map_err(|_| MetricsError::UnknownEntity(name.clone()))
                })
                .collect()
        };
        items.push((
            record.query_type.name().to_owned(),
            EvalPair {
                truth: resolve(&record.test_answers)?,
                predicted: resolve(rows)?,
            },
        ));
    }
    evaluate_pairs(&items, ndcg_k)
}

/// Parse a predictions TSV (`query_id<TAB>entity<TAB>utility`).
pub fn parse_predictions_tsv(
    text: &str,
) -> Result<HashMap<String, BTreeMap<String, f64>>, MetricsError> {
    let mut out: HashMap<String, BTreeMap<String, f64>> = HashMap::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, entity, value] = fields.as_slice() else {
            return Err(MetricsError::EmptyPredictions);
        };
        let value: f64 = value
            .parse()
            .map_err(|_| MetricsError::UnknownEntity(entity.to_string()))?;
        out.entry(id.to_string())
            .or_default()
            .insert(entity.to_string(), value);
    }
    if out.is_empty() {
        return Err(MetricsError::EmptyPredictions);
    }
    Ok(out)
}

fn utility_diff<S: Scalar>(a: S, b: S) -> S {
    if a == b {
        S::zero()
    } else if a.is_finite() && b.is_finite() {
        (a - b).abs()
    } else {
        S::infinity()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeTrial {
    pub observed: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub trials: Vec<ProbeTrial>,
    pub max_observed: f64,
    /// Bound of the trial attaining the maximum observed error.
    pub bound_at_max: f64,
    pub violations: usize,
}

/// Empirical probe of the linear error-accumulation property: perturb the
/// backend by bounded pointwise noise, measure each atom's maximal value
/// error over the entity pairs it can touch, and check that the utility
/// error never exceeds the per-disjunct sum of atom errors.
pub fn error_accumulation_probe<S: Scalar, B: ConfidenceBackend<S>>(
    query: &SoftQuery<S>,
    backend: &B,
    amplitude: S,
    trials: usize,
    seed: u64,
    oracle: &OracleConfig,
) -> Result<ProbeReport, MetricsError> {
    let n = backend.num_entities();
    let truth = brute_force_utility(query, backend, oracle)?;
    let mut report = ProbeReport {
        trials: Vec::with_capacity(trials),
        max_observed: 0.0,
        bound_at_max: 0.0,
        violations: 0,
    };
    for trial in 0..trials {
        let noise_seed = crate::rng::splitmix64(seed ^ (trial as u64).wrapping_mul(0x9e37));
        let noisy = NoisyBackend::new(backend, amplitude, noise_seed);
        let predicted = brute_force_utility(query, &noisy, oracle)?;

        let mut observed = S::zero();
        for e in 0..n {
            observed = observed.max(utility_diff(truth.get(e), predicted.get(e)));
        }

        // per-disjunct sum of per-atom maximal errors; the query-level
        // error is bounded by the max over disjuncts
        let mut bound = S::zero();
        for disjunct in &query.disjuncts {
            let mut disjunct_bound = S::zero();
            for atom in &disjunct.atoms {
                let pairs: Box<dyn Iterator<Item = (EntityId, EntityId)>> =
                    match (atom.head, atom.tail) {
                        (Term::Const(h), Term::Const(t)) => Box::new(std::iter::once((h, t))),
                        (Term::Const(h), _) => Box::new((0..n).map(move |o| (h, o))),
                        (_, Term::Const(t)) => Box::new((0..n).map(move |s| (s, t))),
                        _ => Box::new((0..n).flat_map(move |s| (0..n).map(move |o| (s, o)))),
                    };
                let mut eps = S::zero();
                for (s, o) in pairs {
                    let exact = atom_value(
                        backend.confidence(s, atom.relation, o),
                        atom.alpha,
                        atom.beta,
                        atom.negated,
                    );
                    let noisy_v = atom_value(
                        noisy.confidence(s, atom.relation, o),
                        atom.alpha,
                        atom.beta,
                        atom.negated,
                    );
                    eps = eps.max(utility_diff(exact, noisy_v));
                }
                disjunct_bound = disjunct_bound + eps;
            }
            bound = bound.max(disjunct_bound);
        }

        let violated = observed > bound;
        if violated {
            report.violations += 1;
        }
        let observed = observed.to_f64_lossy();
        let bound = bound.to_f64_lossy();
        if observed > report.max_observed || trial == 0 {
            report.max_observed = observed;
            report.bound_at_max = bound;
        }
        report.trials.push(ProbeTrial {
            observed,
            bound,
            violated,
        });
    }
    Ok(report)
}
