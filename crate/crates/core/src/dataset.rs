//! Dataset construction: sample soft queries of the catalog template types
//! from an uncertain KG, assign soft requirements by strategy, compute
//! utility vectors under two split views, keep only useful queries (those
//! whose utilities change between views), and serialize JSONL records.
//!
//! Template shapes (free variable `y`, existentials `x1..`):
//!
//! ```text
//! 1P   (c, r, y)                       2P   (c, r1, x1) & (x1, r2, y)
//! 2I   (c1, r1, y) & (c2, r2, y)       2IN  (c1, r1, y) & !(c2, r2, y)
//! 2IL  (c, r1, y) & (x1, r2, y)        2M   (c, r1, y) & (c, r2, y)
//! 2U   (c1, r1, y) | (c2, r2, y)       3IN  2I plus !(c3, r3, y)
//! IP   (c1, r1, x1) & (c2, r2, x1) & (x1, r3, y)
//! INP  (c1, r1, x1) & !(c2, r2, x1) & (x1, r3, y)
//! IM   (c1, r1, y) & (c2, r2, y) & (c2, r3, y)
//! UP   [(c1, r1, x1) & (x1, r2, y)] | [(c2, r3, x1) & (x1, r4, y)]
//! ```
//!
//! Constants are grounded by walking observed train facts backward from a
//! sampled answer entity, so at least one answer has finite utility under
//! the train view before requirements are assigned; the grounding is
//! re-verified afterwards because a high necessity can still filter it out.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{lookup_backend, ConfidenceBackend};
use crate::inference::{Engine, InferenceConfig};
use crate::kg::{EntityId, Split, UncertainKG, ViewFact};
use crate::oracle::{brute_force_utility, OracleConfig, OracleError};
use crate::query::{QueryError, RawQuery, SoftAtom, SoftConjunctiveQuery, SoftQuery, Term};
use crate::rng;
use crate::scalar::Scalar;
use crate::semiring::UtilityVector;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no train-split statistics for relation `{0}`")]
    MissingStats(String),
    #[error("query type {0} is evaluation-only and cannot appear in the train section")]
    EvalOnlyTypeInTrain(QueryType),
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
    #[error("inference failure: {0}")]
    Inference(#[from] crate::inference::InferenceError),
    #[error("invalid query in record {id}: {source}")]
    BadRecordQuery { id: String, source: QueryError },
    #[error("record {id} fails the useful-query check")]
    UselessRecord { id: String },
    #[error("line {line}: record does not parse: {reason}")]
    BadRecordJson { line: usize, reason: String },
}

/// The query type catalog. `P` projection, `I` intersection, `N` negation,
/// `M` multi-edge, `L` existential leaf, `U` union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryType {
    #[serde(rename = "1P")]
    OneP,
    #[serde(rename = "2P")]
    TwoP,
    #[serde(rename = "2I")]
    TwoI,
    #[serde(rename = "2IN")]
    TwoIN,
    #[serde(rename = "2IL")]
    TwoIL,
    #[serde(rename = "2M")]
    TwoM,
    #[serde(rename = "2U")]
    TwoU,
    #[serde(rename = "3IN")]
    ThreeIN,
    #[serde(rename = "IP")]
    IP,
    #[serde(rename = "INP")]
    INP,
    #[serde(rename = "IM")]
    IM,
    #[serde(rename = "UP")]
    UP,
}

impl QueryType {
    pub const ALL: [QueryType; 12] = [
        QueryType::OneP,
        QueryType::TwoP,
        QueryType::TwoI,
        QueryType::TwoIN,
        QueryType::TwoIL,
        QueryType::TwoM,
        QueryType::TwoU,
        QueryType::ThreeIN,
        QueryType::IP,
        QueryType::INP,
        QueryType::IM,
        QueryType::UP,
    ];

    /// Types allowed in the train section.
    pub const TRAIN: [QueryType; 5] = [
        QueryType::OneP,
        QueryType::TwoP,
        QueryType::TwoI,
        QueryType::TwoIN,
        QueryType::TwoIL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryType::OneP => "1P",
            QueryType::TwoP => "2P",
            QueryType::TwoI => "2I",
            QueryType::TwoIN => "2IN",
            QueryType::TwoIL => "2IL",
            QueryType::TwoM => "2M",
            QueryType::TwoU => "2U",
            QueryType::ThreeIN => "3IN",
            QueryType::IP => "IP",
            QueryType::INP => "INP",
            QueryType::IM => "IM",
            QueryType::UP => "UP",
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QueryType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown query type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Zero,
    Low,
    Normal,
    High,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaMode {
    Equal,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequirementStrategy {
    pub alpha: AlphaMode,
    pub beta: BetaMode,
    /// Hybrid necessity: draw one mode per query instead of per atom.
    pub per_query_hybrid: bool,
}

impl Default for RequirementStrategy {
    fn default() -> Self {
        Self {
            alpha: AlphaMode::Hybrid,
            beta: BetaMode::Random,
            per_query_hybrid: false,
        }
    }
}

fn pick_fact<'a, S: Scalar>(
    rng: &mut ChaCha12Rng,
    facts: &'a [ViewFact<S>],
) -> Option<&'a ViewFact<S>> {
    (!facts.is_empty()).then(|| &facts[rng::uniform_index(rng, facts.len())])
}

fn pick_where<'a, S: Scalar, I: Iterator<Item = &'a ViewFact<S>>>(
    rng: &mut ChaCha12Rng,
    iter: I,
) -> Option<&'a ViewFact<S>> {
    let candidates: Vec<&ViewFact<S>> = iter.collect();
    (!candidates.is_empty()).then(|| candidates[rng::uniform_index(rng, candidates.len())])
}

/// Ground a template against the train view. Soft requirements are left at
/// the neutral `alpha = 0`, `beta = 1`; [`assign_requirements`] fills them.
pub fn sample_query_skeleton<S: Scalar>(
    kg: &UncertainKG<S>,
    ty: QueryType,
    rng: &mut ChaCha12Rng,
) -> Option<SoftQuery<S>> {
    let view = kg.view(Split::Train);
    let atom = |h: Term, r: usize, t: Term, neg: bool| -> SoftAtom<S> {
        SoftAtom::new(h, r, t, S::zero(), S::one(), neg).expect("neutral requirements are valid")
    };
    let conj = |ex: Vec<u32>, atoms: Vec<SoftAtom<S>>| -> Option<SoftQuery<S>> {
        Some(SoftQuery::single(SoftConjunctiveQuery::new(ex, atoms).ok()?))
    };
    // negated constants come from entities that do have facts with the
    // relation, so the negation is non-vacuous
    let negation_anchor = |rng: &mut ChaCha12Rng, exclude: &[EntityId]| -> Option<(EntityId, usize)> {
        let f = pick_where(rng, view.facts.iter().filter(|f| !exclude.contains(&f.head)))?;
        Some((f.head, f.relation))
    };

    match ty {
        QueryType::OneP => {
            let f = pick_fact(rng, &view.facts)?;
            conj(vec![], vec![atom(Term::Const(f.head), f.relation, Term::Free, false)])
        }
        QueryType::TwoP => {
            let f2 = pick_fact(rng, &view.facts)?;
            let f1 = pick_where(rng, view.facts_with_tail(f2.head))?;
            conj(
                vec![1],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Exist(1), false),
                    atom(Term::Exist(1), f2.relation, Term::Free, false),
                ],
            )
        }
        QueryType::TwoI => {
            let f1 = pick_fact(rng, &view.facts)?;
            let f2 = pick_where(
                rng,
                view.facts_with_tail(f1.tail).filter(|f| f.head != f1.head),
            )?;
            conj(
                vec![],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Free, false),
                    atom(Term::Const(f2.head), f2.relation, Term::Free, false),
                ],
            )
        }
        QueryType::TwoIN => {
            let f1 = pick_fact(rng, &view.facts)?;
            let (c2, r2) = negation_anchor(rng, &[f1.head])?;
            conj(
                vec![],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Free, false),
                    atom(Term::Const(c2), r2, Term::Free, true),
                ],
            )
        }
        QueryType::TwoIL => {
            let f1 = pick_fact(rng, &view.facts)?;
            let f2 = pick_where(rng, view.facts_with_tail(f1.tail))?;
            conj(
                vec![1],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Free, false),
                    atom(Term::Exist(1), f2.relation, Term::Free, false),
                ],
            )
        }
        QueryType::TwoM => {
            let f1 = pick_fact(rng, &view.facts)?;
            let f2 = pick_where(
                rng,
                view.facts_with_tail(f1.tail)
                    .filter(|f| f.head == f1.head && f.relation != f1.relation),
            )?;
            conj(
                vec![],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Free, false),
                    atom(Term::Const(f1.head), f2.relation, Term::Free, false),
                ],
            )
        }
        QueryType::TwoU => {
            let f1 = pick_fact(rng, &view.facts)?;
            let f2 = pick_where(
                rng,
                view.facts
                    .iter()
                    .filter(|f| (f.head, f.relation) != (f1.head, f1.relation)),
            )?;
            let d1 = SoftConjunctiveQuery::new(
                vec![],
                vec![atom(Term::Const(f1.head), f1.relation, Term::Free, false)],
            )
            .ok()?;
            let d2 = SoftConjunctiveQuery::new(
                vec![],
                vec![atom(Term::Const(f2.head), f2.relation, Term::Free, false)],
            )
            .ok()?;
            SoftQuery::new(vec![d1, d2]).ok()
        }
        QueryType::ThreeIN => {
            let f1 = pick_fact(rng, &view.facts)?;
            let f2 = pick_where(
                rng,
                view.facts_with_tail(f1.tail).filter(|f| f.head != f1.head),
            )?;
            let (c3, r3) = negation_anchor(rng, &[f1.head, f2.head])?;
            conj(
                vec![],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Free, false),
                    atom(Term::Const(f2.head), f2.relation, Term::Free, false),
                    atom(Term::Const(c3), r3, Term::Free, true),
                ],
            )
        }
        QueryType::IP => {
            let f3 = pick_fact(rng, &view.facts)?;
            let f1 = pick_where(rng, view.facts_with_tail(f3.head))?;
            let f2 = pick_where(
                rng,
                view.facts_with_tail(f3.head).filter(|f| f.head != f1.head),
            )?;
            conj(
                vec![1],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Exist(1), false),
                    atom(Term::Const(f2.head), f2.relation, Term::Exist(1), false),
                    atom(Term::Exist(1), f3.relation, Term::Free, false),
                ],
            )
        }
        QueryType::INP => {
            let f3 = pick_fact(rng, &view.facts)?;
            let f1 = pick_where(rng, view.facts_with_tail(f3.head))?;
            let (c2, r2) = negation_anchor(rng, &[f1.head])?;
            conj(
                vec![1],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Exist(1), false),
                    atom(Term::Const(c2), r2, Term::Exist(1), true),
                    atom(Term::Exist(1), f3.relation, Term::Free, false),
                ],
            )
        }
        QueryType::IM => {
            let f1 = pick_fact(rng, &view.facts)?;
            let f2 = pick_where(
                rng,
                view.facts_with_tail(f1.tail).filter(|f| f.head != f1.head),
            )?;
            let f3 = pick_where(
                rng,
                view.facts_with_tail(f1.tail)
                    .filter(|f| f.head == f2.head && f.relation != f2.relation),
            )?;
            conj(
                vec![],
                vec![
                    atom(Term::Const(f1.head), f1.relation, Term::Free, false),
                    atom(Term::Const(f2.head), f2.relation, Term::Free, false),
                    atom(Term::Const(f3.head), f3.relation, Term::Free, false),
                ],
            )
        }
        QueryType::UP => {
            let chain = |rng: &mut ChaCha12Rng| -> Option<SoftConjunctiveQuery<S>> {
                let f2 = pick_fact(rng, &view.facts)?;
                let f1 = pick_where(rng, view.facts_with_tail(f2.head))?;
                SoftConjunctiveQuery::new(
                    vec![1],
                    vec![
                        atom(Term::Const(f1.head), f1.relation, Term::Exist(1), false),
                        atom(Term::Exist(1), f2.relation, Term::Free, false),
                    ],
                )
                .ok()
            };
            let d1 = chain(rng)?;
            let d2 = chain(rng)?;
            SoftQuery::new(vec![d1, d2]).ok()
        }
    }
}

/// Assign soft requirements: necessity by percentile mode, importance equal
/// or uniform in `(0, 1]`. Deterministic given the RNG state.
pub fn assign_requirements<S: Scalar>(
    query: &SoftQuery<S>,
    strategy: &RequirementStrategy,
    kg: &UncertainKG<S>,
    rng: &mut ChaCha12Rng,
) -> Result<SoftQuery<S>, DatasetError> {
    let draw_mode = |rng: &mut ChaCha12Rng| -> AlphaMode {
        match rng::uniform_index(rng, 4) {
            0 => AlphaMode::Zero,
            1 => AlphaMode::Low,
            2 => AlphaMode::Normal,
            _ => AlphaMode::High,
        }
    };
    let query_mode = match strategy.alpha {
        AlphaMode::Hybrid if strategy.per_query_hybrid => Some(draw_mode(rng)),
        _ => None,
    };
    let alpha_for = |mode: AlphaMode, relation: usize| -> Result<S, DatasetError> {
        let q = match mode {
            AlphaMode::Zero => return Ok(S::zero()),
            AlphaMode::Low => 25.0,
            AlphaMode::Normal => 50.0,
            AlphaMode::High => 75.0,
            AlphaMode::Hybrid => unreachable!("hybrid resolves to a concrete mode"),
        };
        let stats = kg
            .relation_stats(relation)
            .ok_or_else(|| DatasetError::MissingStats(kg.relation_name(relation).to_owned()))?;
        Ok(stats.percentile(q))
    };

    let mut disjuncts = Vec::with_capacity(query.disjuncts.len());
    for d in &query.disjuncts {
        let mut atoms = Vec::with_capacity(d.atoms.len());
        for a in &d.atoms {
            let mode = match strategy.alpha {
                AlphaMode::Hybrid => query_mode.unwrap_or_else(|| draw_mode(rng)),
                fixed => fixed,
            };
            let alpha = alpha_for(mode, a.relation)?;
            let beta = match strategy.beta {
                BetaMode::Equal => S::one(),
                BetaMode::Random => S::from_f64_lossy(rng::uniform01_open_low(rng)),
            };
            atoms.push(
                SoftAtom::new(a.head, a.relation, a.tail, alpha, beta, a.negated)
                    .expect("requirements stay in range"),
            );
        }
        disjuncts.push(
            SoftConjunctiveQuery::new(d.existentials.clone(), atoms)
                .expect("skeleton is structurally valid"),
        );
    }
    Ok(SoftQuery::new(disjuncts).expect("skeleton has disjuncts"))
}

fn positive_map<S: Scalar>(u: &UtilityVector<S>) -> BTreeMap<EntityId, S> {
    u.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > S::zero())
        .map(|(i, &v)| (i, v))
        .collect()
}

/// Positive-utility maps under the train and eval views.
pub type AnswerMaps<S> = (BTreeMap<EntityId, S>, BTreeMap<EntityId, S>);

/// Utility maps (entities with positive utility) under two backends; exact
/// mode uses the oracle, otherwise the inference engine.
pub fn compute_answers<S: Scalar, BT: ConfidenceBackend<S>, BE: ConfidenceBackend<S>>(
    query: &SoftQuery<S>,
    train_backend: &BT,
    eval_backend: &BE,
    exact: bool,
    oracle_budget: u64,
) -> Result<AnswerMaps<S>, DatasetError> {
    if exact {
        let cfg = OracleConfig {
            budget: oracle_budget,
        };
        let train = brute_force_utility(query, train_backend, &cfg)?;
        let eval = brute_force_utility(query, eval_backend, &cfg)?;
        Ok((positive_map(&train), positive_map(&eval)))
    } else {
        let train = Engine::new(train_backend, InferenceConfig::default()).answer_query(query)?;
        let eval = Engine::new(eval_backend, InferenceConfig::default()).answer_query(query)?;
        Ok((positive_map(&train), positive_map(&eval)))
    }
}

/// A query is useful when its utilities change between views (support or
/// any value beyond `1e-12`) and its eval-view answer count is within
/// bounds.
pub fn filter_useful<S: Scalar>(
    train: &BTreeMap<EntityId, S>,
    eval: &BTreeMap<EntityId, S>,
    max_answers: usize,
) -> bool {
    if eval.is_empty() || eval.len() > max_answers {
        return false;
    }
    if train.len() != eval.len() {
        return true;
    }
    let tol = S::from_f64_lossy(1e-12);
    train.iter().any(|(k, v)| match eval.get(k) {
        None => true,
        Some(w) => (*v - *w).abs() > tol,
    })
}

/// One dataset record as serialized to JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub query_type: QueryType,
    pub query: RawQuery,
    /// Entity name -> utility under the train view (positives only).
    pub train_answers: BTreeMap<String, f64>,
    /// Entity name -> utility under the record's eval view.
    pub test_answers: BTreeMap<String, f64>,
    pub seed: u64,
}

impl DatasetRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    /// Name-keyed map converted back to entity ids.
    pub fn answers_by_id<S: Scalar>(
        map: &BTreeMap<String, f64>,
        kg: &UncertainKG<S>,
    ) -> Result<BTreeMap<EntityId, S>, crate::kg::KgError> {
        map.iter()
            .map(|(name, &v)| Ok((kg.entity_id(name)?, S::from_f64_lossy(v))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Train,
    Valid,
    Test,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Train, Section::Valid, Section::Test];

    pub fn name(self) -> &'static str {
        match self {
            Section::Train => "train",
            Section::Valid => "valid",
            Section::Test => "test",
        }
    }

    /// The view whose new facts define usefulness for this section.
    fn eval_split(self) -> Split {
        match self {
            Section::Train | Section::Valid => Split::Valid,
            Section::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuilderConfig {
    pub train: Vec<(QueryType, usize)>,
    pub valid: Vec<(QueryType, usize)>,
    pub test: Vec<(QueryType, usize)>,
    pub strategy: RequirementStrategy,
    pub seed: u64,
    pub max_answers: usize,
    pub retries_per_record: usize,
    /// Answer with the oracle (exact) or the inference engine.
    pub exact: bool,
    pub oracle_budget: u64,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        Self {
            train: vec![],
            valid: vec![],
            test: vec![],
            strategy: RequirementStrategy::default(),
            seed: 0,
            max_answers: 100,
            retries_per_record: 100,
            exact: true,
            oracle_budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeStats {
    pub requested: usize,
    pub emitted: usize,
    pub shortfall: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub seed: u64,
    pub per_file: BTreeMap<String, TypeStats>,
}

#[derive(Debug, Clone)]
pub struct DatasetBuild {
    /// File stem (`<section>_<type>`) to its records.
    pub files: BTreeMap<String, Vec<DatasetRecord>>,
    pub stats: BuildStats,
}

/// Sample, filter, and serialize the configured dataset. Identical config
/// and seed reproduce identical records; shortfalls after the retry budget
/// are reported per type rather than failing the build.
pub fn build_dataset<S: Scalar>(
    kg: &std::sync::Arc<UncertainKG<S>>,
    config: &BuilderConfig,
) -> Result<DatasetBuild, DatasetError> {
    for (ty, _) in &config.train {
        if !QueryType::TRAIN.contains(ty) {
            return Err(DatasetError::EvalOnlyTypeInTrain(*ty));
        }
    }

    let train_backend = lookup_backend(kg.clone(), Split::Train);
    let mut files = BTreeMap::new();
    let mut per_file = BTreeMap::new();

    let sections = [
        (Section::Train, &config.train),
        (Section::Valid, &config.valid),
        (Section::Test, &config.test),
    ];
    for (section, requests) in sections {
        let eval_backend = lookup_backend(kg.clone(), section.eval_split());
        for &(ty, count) in requests.iter() {
            let stem = format!("{}_{}", section.name(), ty.name());
            let mut records = Vec::with_capacity(count);
            let mut attempts = 0usize;
            for slot in 0..count {
                for attempt in 0..config.retries_per_record.max(1) {
                    attempts += 1;
                    let stream = format!(
                        "dataset/{}/{}/{}/{}",
                        section.name(),
                        ty.name(),
                        slot,
                        attempt
                    );
                    let record_seed =
                        rng::fnv1a64(stream.as_bytes()) ^ rng::splitmix64(config.seed);
                    let mut rng = rng::substream(config.seed, &stream);
                    let Some(skeleton) = sample_query_skeleton(kg, ty, &mut rng) else {
                        continue;
                    };
                    let query =
                        assign_requirements(&skeleton, &config.strategy, kg, &mut rng)?;
                    let (train_map, eval_map) = compute_answers(
                        &query,
                        &train_backend,
                        &eval_backend,
                        config.exact,
                        config.oracle_budget,
                    )?;
                    if train_map.is_empty() {
                        continue; // requirements filtered the grounding out
                    }
                    if !filter_useful(&train_map, &eval_map, config.max_answers) {
                        continue;
                    }
                    let to_names = |m: &BTreeMap<EntityId, S>| -> BTreeMap<String, f64> {
                        m.iter()
                            .map(|(&e, v)| (kg.entity_name(e).to_owned(), v.to_f64_lossy()))
                            .collect()
                    };
                    records.push(DatasetRecord {
                        id: format!("{}-{}-{:04}", section.name(), ty.name(), slot),
                        query_type: ty,
                        query: query.to_raw(kg),
                        train_answers: to_names(&train_map),
                        test_answers: to_names(&eval_map),
                        seed: record_seed,
                    });
                    break;
                }
            }
            per_file.insert(
                stem.clone(),
                TypeStats {
                    requested: count,
                    emitted: records.len(),
                    shortfall: count - records.len(),
                    attempts,
                },
            );
            files.insert(stem, records);
        }
    }

    Ok(DatasetBuild {
        files,
        stats: BuildStats {
            seed: config.seed,
            per_file,
        },
    })
}

/// Serialize records as JSONL.
pub fn records_to_jsonl(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

/// Parse JSONL records, re-checking the useful-query property of each.
pub fn load_records(text: &str, max_answers: usize) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::BadRecordJson {
                line: line_no + 1,
                reason: e.to_string(),
            })?;
        record
            .query
            .validate()
            .map_err(|source| DatasetError::BadRecordQuery {
                id: record.id.clone(),
                source,
            })?;
        let differs = record.train_answers.len() != record.test_answers.len()
            || record
                .train_answers
                .iter()
                .any(|(k, v)| match record.test_answers.get(k) {
                    None => true,
                    Some(w) => (v - w).abs() > 1e-12,
                });
        if !differs || record.test_answers.is_empty() || record.test_answers.len() > max_answers
        {
            return Err(DatasetError::UselessRecord {
                id: record.id.clone(),
            });
        }
        out.push(record);
    }
    Ok(out)
}
