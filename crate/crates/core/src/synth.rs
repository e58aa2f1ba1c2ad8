//! Seeded synthetic inputs for cross-checks: random uncertain KGs, random
//! template queries, random single-cycle queries, and perturbed backends
//! (affine distortion, bounded pointwise noise).

use rand_chacha::ChaCha12Rng;

use crate::confidence::ConfidenceBackend;
use crate::dataset::{self, AlphaMode, BetaMode, QueryType, RequirementStrategy};
use crate::kg::{EntityId, RelationId, Split, UncertainKG};
use crate::query::{SoftAtom, SoftConjunctiveQuery, SoftQuery, Term};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct KgGenConfig {
    pub entities: usize,
    pub relations: usize,
    pub train_facts: usize,
    pub valid_extra: usize,
    pub test_extra: usize,
    /// Probability that a valid/test increment re-lists an existing triple
    /// with a fresh confidence instead of adding a new one.
    pub override_prob: f64,
}

impl Default for KgGenConfig {
    fn default() -> Self {
        Self {
            entities: 20,
            relations: 4,
            train_facts: 60,
            valid_extra: 8,
            test_extra: 8,
            override_prob: 0.2,
        }
    }
}

/// Random uncertain KG built through the TSV loader, so generated graphs
/// satisfy every loader invariant by construction.
pub fn gen_kg<S: Scalar>(cfg: &KgGenConfig, seed: u64) -> UncertainKG<S> {
    let mut rng = rng::substream(seed, "synth-kg");
    let mut used: std::collections::HashSet<(usize, usize, usize)> = Default::default();
    let mut files = [String::new(), String::new(), String::new()];
    let mut all: Vec<(usize, usize, usize)> = Vec::new();

    let capacity = cfg.entities * cfg.entities * cfg.relations;
    {
        // overrides must not collide within one file (loader duplicate rule)
        let mut per_file_seen: Vec<std::collections::HashSet<(usize, usize, usize)>> =
            vec![Default::default(), Default::default(), Default::default()];
        let mut push_fact = |rng: &mut ChaCha12Rng, file: usize, allow_override: bool| {
            let conf = (rng::uniform01(rng) * 1000.0).round() / 1000.0;
            if allow_override && !all.is_empty() && rng::uniform01(rng) < cfg.override_prob {
                let (s, r, o) = all[rng::uniform_index(rng, all.len())];
                if per_file_seen[file].insert((s, r, o)) {
                    files[file].push_str(&format!("e{s}\tr{r}\te{o}\t{conf}\n"));
                }
                return;
            }
            if used.len() >= capacity {
                return;
            }
            loop {
                let s = rng::uniform_index(rng, cfg.entities);
                let o = rng::uniform_index(rng, cfg.entities);
                let r = rng::uniform_index(rng, cfg.relations);
                if used.insert((s, r, o)) {
                    per_file_seen[file].insert((s, r, o));
                    all.push((s, r, o));
                    files[file].push_str(&format!("e{s}\tr{r}\te{o}\t{conf}\n"));
                    return;
                }
            }
        };

        for _ in 0..cfg.train_facts.max(1) {
            push_fact(&mut rng, 0, false);
        }
        for _ in 0..cfg.valid_extra {
            push_fact(&mut rng, 1, true);
        }
        for _ in 0..cfg.test_extra {
            push_fact(&mut rng, 2, true);
        }
    }

    // every entity and relation must appear somewhere; anchor strays onto
    // the train file with a self-describing fact
    for e in 0..cfg.entities {
        if !files.iter().any(|f| f.contains(&format!("e{e}\t")))
            && !files.iter().any(|f| f.contains(&format!("\te{e}\t")))
        {
            let o = (e + 1) % cfg.entities;
            if used.insert((e, 0, o)) {
                files[0].push_str(&format!("e{e}\tr0\te{o}\t0.5\n"));
            }
        }
    }
    for r in 0..cfg.relations {
        if !files.iter().any(|f| f.contains(&format!("\tr{r}\t"))) {
            let s = r % cfg.entities;
            let o = (r + 1) % cfg.entities;
            if used.insert((s, r, o)) {
                files[0].push_str(&format!("e{s}\tr{r}\te{o}\t0.5\n"));
            }
        }
    }

    UncertainKG::from_tsv_strs(&files[0], &files[1], &files[2])
        .expect("generated KG satisfies loader invariants")
}

/// Random requirement strategy mixing the catalog modes.
pub fn gen_strategy(rng: &mut ChaCha12Rng) -> RequirementStrategy {
    let alpha = match rng::uniform_index(rng, 5) {
        0 => AlphaMode::Zero,
        1 => AlphaMode::Low,
        2 => AlphaMode::Normal,
        3 => AlphaMode::High,
        _ => AlphaMode::Hybrid,
    };
    let beta = if rng::uniform_index(rng, 2) == 0 {
        BetaMode::Equal
    } else {
        BetaMode::Random
    };
    RequirementStrategy {
        alpha,
        beta,
        per_query_hybrid: false,
    }
}

/// Random query of the given template type with random soft requirements;
/// `None` when the KG cannot ground the template.
pub fn gen_query<S: Scalar>(
    kg: &UncertainKG<S>,
    ty: QueryType,
    seed: u64,
) -> Option<SoftQuery<S>> {
    let mut rng = rng::substream(seed, "synth-query");
    for _ in 0..40 {
        let strategy = gen_strategy(&mut rng);
        if let Some(skeleton) = dataset::sample_query_skeleton(kg, ty, &mut rng) {
            if let Ok(q) = dataset::assign_requirements(&skeleton, &strategy, kg, &mut rng) {
                return Some(q);
            }
        }
    }
    None
}

/// Random single-cycle query: a triangle or square of existentials through
/// the free variable, plus a constant anchor edge. Directions, relations,
/// negation flags, and soft requirements are randomized.
pub fn gen_cyclic_query<S: Scalar>(kg: &UncertainKG<S>, seed: u64) -> Option<SoftQuery<S>> {
    let mut rng = rng::substream(seed, "synth-cycle");
    let n_rel = kg.num_relations();
    let cycle_len = 3 + rng::uniform_index(&mut rng, 2); // 3 or 4
    let nodes: Vec<Term> = (0..cycle_len)
        .map(|i| {
            if i == 0 {
                Term::Free
            } else {
                Term::Exist(i as u32)
            }
        })
        .collect();
    let mut atoms = Vec::new();
    let rand_alpha = |rng: &mut ChaCha12Rng| -> f64 {
        if rng::uniform_index(rng, 2) == 0 {
            0.0
        } else {
            rng::uniform01(rng) * 0.8
        }
    };
    for i in 0..cycle_len {
        let a = nodes[i];
        let b = nodes[(i + 1) % cycle_len];
        let (h, t) = if rng::uniform_index(&mut rng, 2) == 0 {
            (a, b)
        } else {
            (b, a)
        };
        let alpha = rand_alpha(&mut rng);
        let beta = rng::uniform01_open_low(&mut rng);
        let negated = rng::uniform_index(&mut rng, 5) == 0;
        atoms.push(
            SoftAtom::new(
                h,
                rng::uniform_index(&mut rng, n_rel),
                t,
                S::from_f64_lossy(alpha),
                S::from_f64_lossy(beta),
                negated,
            )
            .ok()?,
        );
    }
    // constant anchor keeps the query grounded in the data
    let view = kg.view(Split::Train);
    if view.facts.is_empty() {
        return None;
    }
    let f = view.facts[rng::uniform_index(&mut rng, view.facts.len())];
    atoms.push(
        SoftAtom::new(
            Term::Const(f.head),
            f.relation,
            Term::Free,
            S::zero(),
            S::one(),
            false,
        )
        .ok()?,
    );
    let existentials = (1..cycle_len as u32).collect();
    Some(SoftQuery::single(
        SoftConjunctiveQuery::new(existentials, atoms).ok()?,
    ))
}

/// Backend wrapping another with a fixed affine distortion
/// `clamp(a * p + b)`; used to exercise calibration recovery.
pub struct AffineDistorted<B> {
    base: B,
    a: f64,
    b: f64,
}

impl<B> AffineDistorted<B> {
    pub fn new(base: B, a: f64, b: f64) -> Self {
        Self { base, a, b }
    }
}

impl<S: Scalar, B: ConfidenceBackend<S>> ConfidenceBackend<S> for AffineDistorted<B> {
    fn num_entities(&self) -> usize {
        self.base.num_entities()
    }

    fn num_relations(&self) -> usize {
        self.base.num_relations()
    }

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        let p = self.base.confidence(s, r, o);
        let v = S::from_f64_lossy(self.a) * p + S::from_f64_lossy(self.b);
        if v < S::zero() {
            S::zero()
        } else if v > S::one() {
            S::one()
        } else {
            v
        }
    }
}

/// Backend with bounded pointwise noise, deterministic per triple: the
/// perturbation is a pure hash of `(seed, s, r, o)`, so call order never
/// changes results.
pub struct NoisyBackend<B, S> {
    base: B,
    amplitude: S,
    seed: u64,
}

impl<B, S: Scalar> NoisyBackend<B, S> {
    pub fn new(base: B, amplitude: S, seed: u64) -> Self {
        Self {
            base,
            amplitude,
            seed,
        }
    }
}

impl<S: Scalar, B: ConfidenceBackend<S>> ConfidenceBackend<S> for NoisyBackend<B, S> {
    fn num_entities(&self) -> usize {
        self.base.num_entities()
    }

    fn num_relations(&self) -> usize {
        self.base.num_relations()
    }

    fn confidence(&self, s: EntityId, r: RelationId, o: EntityId) -> S {
        let p = self.base.confidence(s, r, o);
        let mut h = self.seed;
        for v in [s as u64, r as u64, o as u64] {
            h = rng::splitmix64(h ^ v);
        }
        let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let noise = S::from_f64_lossy(2.0 * u - 1.0) * self.amplitude;
        let v = p + noise;
        if v < S::zero() {
            S::zero()
        } else if v > S::one() {
            S::one()
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::lookup_backend;
    use std::sync::Arc;

    #[test]
    fn generated_kg_is_deterministic_and_valid() {
        let cfg = KgGenConfig::default();
        let a = gen_kg::<f64>(&cfg, 5);
        let b = gen_kg::<f64>(&cfg, 5);
        assert_eq!(a.num_entities(), b.num_entities());
        assert_eq!(
            a.view(Split::Test).facts.len(),
            b.view(Split::Test).facts.len()
        );
        assert!(a.view(Split::Train).facts.len() <= a.view(Split::Valid).facts.len());
    }

    #[test]
    fn noisy_backend_is_pointwise_deterministic_and_bounded() {
        let kg = Arc::new(gen_kg::<f64>(&KgGenConfig::default(), 9));
        let base = lookup_backend(kg.clone(), Split::Train);
        let noisy = NoisyBackend::new(lookup_backend(kg.clone(), Split::Train), 0.2, 13);
        for s in 0..kg.num_entities() {
            for o in 0..kg.num_entities() {
                let p = base.confidence(s, 0, o);
                let q = noisy.confidence(s, 0, o);
                assert_eq!(q, noisy.confidence(s, 0, o));
                assert!((0.0..=1.0).contains(&q));
                assert!((p - q).abs() <= 0.2 + 1e-12);
            }
        }
    }

    #[test]
    fn cyclic_generator_produces_a_cycle() {
        let kg = gen_kg::<f64>(&KgGenConfig::default(), 21);
        let q = gen_cyclic_query(&kg, 3).unwrap();
        let g = crate::query::build_query_graph(&q.disjuncts[0]);
        let d = g.validate();
        assert!(!d.acyclic);
        assert!(d.free_present);
    }
}
