//! Uncertain knowledge graph storage: loading, nested split views,
//! closed-world confidence lookup, per-relation confidence statistics.
//!
//! A dataset is three TSV files (`train.tsv`, `valid.tsv`, `test.tsv`),
//! one `head<TAB>relation<TAB>tail<TAB>confidence` fact per line. The valid
//! and test files hold only their incremental facts; nesting
//! (train ⊆ valid ⊆ test) is reconstructed at load. Re-listing a triple in
//! a later file overrides its confidence for that split's view and is
//! flagged as a warning.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::scalar::Scalar;

pub type EntityId = usize;
pub type RelationId = usize;

/// Nested fact views; `Train < Valid < Test`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed line, expected 4 tab-separated fields")]
    Malformed { file: String, line: usize },
    #[error("{file}:{line}: confidence out of range: {value}")]
    ConfidenceRange {
        file: String,
        line: usize,
        value: f64,
    },
    #[error("{file}:{line}: confidence does not parse: {value}")]
    ConfidenceParse {
        file: String,
        line: usize,
        value: String,
    },
    #[error("{file}:{line}: duplicate fact ({head}, {relation}, {tail}) within one split")]
    DuplicateFact {
        file: String,
        line: usize,
        head: String,
        relation: String,
        tail: String,
    },
    #[error("no facts in the train split")]
    NoFacts,
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug)]
struct StoredFact<S> {
    head: EntityId,
    relation: RelationId,
    tail: EntityId,
    /// Confidence per source file (train/valid/test); later files override
    /// for their own view.
    values: [Option<S>; 3],
}

impl<S: Scalar> StoredFact<S> {
    fn value_for(&self, split: Split) -> Option<S> {
        self.values[..=split.index()]
            .iter()
            .rev()
            .flatten()
            .next()
            .copied()
    }
}

/// One fact as seen from a split view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewFact<S> {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub confidence: S,
}

/// Materialized fact list and adjacency indexes of one split.
#[derive(Debug)]
pub struct SplitView<S> {
    pub split: Split,
    pub facts: Vec<ViewFact<S>>,
    by_head: Vec<Vec<u32>>,
    by_tail: Vec<Vec<u32>>,
    by_relation: Vec<Vec<u32>>,
}

impl<S: Scalar> SplitView<S> {
    pub fn facts_with_head(&self, e: EntityId) -> impl Iterator<Item = &ViewFact<S>> {
        self.by_head[e].iter().map(|&i| &self.facts[i as usize])
    }

    pub fn facts_with_tail(&self, e: EntityId) -> impl Iterator<Item = &ViewFact<S>> {
        self.by_tail[e].iter().map(|&i| &self.facts[i as usize])
    }

    pub fn facts_with_relation(&self, r: RelationId) -> impl Iterator<Item = &ViewFact<S>> {
        self.by_relation[r].iter().map(|&i| &self.facts[i as usize])
    }
}

/// Sorted train-split confidences of one relation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationStats<S> {
    pub relation: RelationId,
    confidences: Vec<S>,
}

impl<S: Scalar> RelationStats<S> {
    pub fn count(&self) -> usize {
        self.confidences.len()
    }

    pub fn confidences(&self) -> &[S] {
        &self.confidences
    }

    /// Nearest-rank percentile of the sorted confidence list; `q` in
    /// `[0, 100]`. Panics on empty stats.
    pub fn percentile(&self, q: f64) -> S {
        assert!(!self.confidences.is_empty(), "percentile of empty stats");
        assert!((0.0..=100.0).contains(&q), "percentile rank out of range");
        let n = self.confidences.len();
        let rank = ((q / 100.0) * n as f64).ceil() as usize;
        self.confidences[rank.clamp(1, n) - 1]
    }
}

/// Standalone form of the nearest-rank percentile.
pub fn relation_percentile<S: Scalar>(stats: &RelationStats<S>, q: f64) -> S {
    stats.percentile(q)
}

/// An uncertain KG: entity/relation vocabularies plus confidence-weighted
/// facts in nested train/valid/test views. Immutable after load; all reads
/// are safe to share across threads.
#[derive(Debug)]
pub struct UncertainKG<S> {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
    facts: Vec<StoredFact<S>>,
    triple_index: HashMap<(EntityId, RelationId, EntityId), u32>,
    views: Vec<SplitView<S>>,
    stats: Vec<RelationStats<S>>,
    warnings: Vec<String>,
}

impl<S: Scalar> UncertainKG<S> {
    /// Load `train.tsv`, `valid.tsv`, `test.tsv` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, KgError> {
        let dir = dir.as_ref();
        let mut contents = Vec::new();
        for split in Split::ALL {
            let path = dir.join(format!("{}.tsv", split.name()));
            let text = std::fs::read_to_string(&path).map_err(|source| KgError::Io {
                file: path.display().to_string(),
                source,
            })?;
            contents.push((format!("{}.tsv", split.name()), text));
        }
        Self::from_named_tsv(contents.iter().map(|(n, t)| (n.as_str(), t.as_str())))
    }

    /// Build from in-memory TSV contents (train, valid, test increments).
    pub fn from_tsv_strs(train: &str, valid: &str, test: &str) -> Result<Self, KgError> {
        Self::from_named_tsv([
            ("train.tsv", train),
            ("valid.tsv", valid),
            ("test.tsv", test),
        ])
    }

    fn from_named_tsv<'a>(
        files: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, KgError> {
        let mut kg = UncertainKG {
            entities: Vec::new(),
            relations: Vec::new(),
            entity_ids: HashMap::new(),
            relation_ids: HashMap::new(),
            facts: Vec::new(),
            triple_index: HashMap::new(),
            views: Vec::new(),
            stats: Vec::new(),
            warnings: Vec::new(),
        };

        for (file_idx, (file, text)) in files.into_iter().enumerate() {
            let mut seen_here: HashMap<(EntityId, RelationId, EntityId), ()> = HashMap::new();
            for (line_no, line) in text.lines().enumerate() {
                let line_no = line_no + 1;
                if line.is_empty() {
                    continue;
                }
                let mut fields = line.split('\t');
                let (h, r, t, p) = match (
                    fields.next(),
                    fields.next(),
                    fields.next(),
                    fields.next(),
                    fields.next(),
                ) {
                    (Some(h), Some(r), Some(t), Some(p), None) => (h, r, t, p),
                    _ => {
                        return Err(KgError::Malformed {
                            file: file.into(),
                            line: line_no,
                        })
                    }
                };
                let conf: f64 = p.trim().parse().map_err(|_| KgError::ConfidenceParse {
                    file: file.into(),
                    line: line_no,
                    value: p.into(),
                })?;
                if !(0.0..=1.0).contains(&conf) {
                    return Err(KgError::ConfidenceRange {
                        file: file.into(),
                        line: line_no,
                        value: conf,
                    });
                }
                let head = kg.intern_entity(h);
                let tail = kg.intern_entity(t);
                let relation = kg.intern_relation(r);
                let key = (head, relation, tail);
                if seen_here.insert(key, ()).is_some() {
                    return Err(KgError::DuplicateFact {
                        file: file.into(),
                        line: line_no,
                        head: h.into(),
                        relation: r.into(),
                        tail: t.into(),
                    });
                }
                let conf = S::from_f64_lossy(conf);
                match kg.triple_index.get(&key) {
                    Some(&idx) => {
                        // Re-listed in a larger split: its value wins there.
                        kg.warnings.push(format!(
                            "{file}:{line_no}: fact ({h}, {r}, {t}) overrides an earlier split's confidence"
                        ));
                        kg.facts[idx as usize].values[file_idx] = Some(conf);
                    }
                    None => {
                        let mut values = [None, None, None];
                        values[file_idx] = Some(conf);
                        kg.triple_index.insert(key, kg.facts.len() as u32);
                        kg.facts.push(StoredFact {
                            head,
                            relation,
                            tail,
                            values,
                        });
                    }
                }
            }
        }

        if kg
            .facts
            .iter()
            .all(|f| f.value_for(Split::Train).is_none())
        {
            return Err(KgError::NoFacts);
        }

        kg.build_views();
        kg.build_stats();
        Ok(kg)
    }

    fn intern_entity(&mut self, name: &str) -> EntityId {
        match self.entity_ids.get(name) {
            Some(&id) => id,
            None => {
                let id = self.entities.len();
                self.entities.push(name.to_owned());
                self.entity_ids.insert(name.to_owned(), id);
                id
            }
        }
    }

    fn intern_relation(&mut self, name: &str) -> RelationId {
        match self.relation_ids.get(name) {
            Some(&id) => id,
            None => {
                let id = self.relations.len();
                self.relations.push(name.to_owned());
                self.relation_ids.insert(name.to_owned(), id);
                id
            }
        }
    }

    fn build_views(&mut self) {
        for split in Split::ALL {
            let mut facts = Vec::new();
            for stored in &self.facts {
                if let Some(confidence) = stored.value_for(split) {
                    facts.push(ViewFact {
                        head: stored.head,
                        relation: stored.relation,
                        tail: stored.tail,
                        confidence,
                    });
                }
            }
            let mut by_head = vec![Vec::new(); self.entities.len()];
            let mut by_tail = vec![Vec::new(); self.entities.len()];
            let mut by_relation = vec![Vec::new(); self.relations.len()];
            for (i, f) in facts.iter().enumerate() {
                by_head[f.head].push(i as u32);
                by_tail[f.tail].push(i as u32);
                by_relation[f.relation].push(i as u32);
            }
            self.views.push(SplitView {
                split,
                facts,
                by_head,
                by_tail,
                by_relation,
            });
        }
    }

    fn build_stats(&mut self) {
        let mut per_relation: Vec<Vec<S>> = vec![Vec::new(); self.relations.len()];
        for f in &self.views[Split::Train.index()].facts {
            per_relation[f.relation].push(f.confidence);
        }
        self.stats = per_relation
            .into_iter()
            .enumerate()
            .map(|(relation, mut confidences)| {
                confidences.sort_by(|a, b| a.partial_cmp(b).expect("confidences are finite"));
                RelationStats {
                    relation,
                    confidences,
                }
            })
            .collect();
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id]
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId, KgError> {
        self.entity_ids
            .get(name)
            .copied()
            .ok_or_else(|| KgError::UnknownEntity(name.into()))
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId, KgError> {
        self.relation_ids
            .get(name)
            .copied()
            .ok_or_else(|| KgError::UnknownRelation(name.into()))
    }

    pub fn view(&self, split: Split) -> &SplitView<S> {
        &self.views[split.index()]
    }

    /// Closed-world confidence: the stored value if `(s, r, o)` is in the
    /// split view, else 0. Panics on out-of-range indices.
    pub fn confidence(&self, split: Split, s: EntityId, r: RelationId, o: EntityId) -> S {
        assert!(
            s < self.entities.len() && o < self.entities.len() && r < self.relations.len(),
            "entity or relation index out of range"
        );
        self.triple_index
            .get(&(s, r, o))
            .and_then(|&i| self.facts[i as usize].value_for(split))
            .unwrap_or_else(S::zero)
    }

    pub fn contains(&self, split: Split, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.triple_index
            .get(&(s, r, o))
            .is_some_and(|&i| self.facts[i as usize].value_for(split).is_some())
    }

    /// Train-split confidence stats; `None` when the relation never occurs
    /// in the train view.
    pub fn relation_stats(&self, r: RelationId) -> Option<&RelationStats<S>> {
        self.stats.get(r).filter(|s| s.count() > 0)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Emit the entity and relation index mappings (`index<TAB>name`).
    pub fn write_vocab(
        &self,
        mut entities: impl Write,
        mut relations: impl Write,
    ) -> std::io::Result<()> {
        for (i, name) in self.entities.iter().enumerate() {
            writeln!(entities, "{i}\t{name}")?;
        }
        for (i, name) in self.relations.iter().enumerate() {
            writeln!(relations, "{i}\t{name}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> UncertainKG<f64> {
        UncertainKG::from_tsv_strs("a\tr\tb\t0.9\na\tr\tc\t0.6\n", "", "").unwrap()
    }

    #[test]
    fn parses_and_indexes_by_first_appearance() {
        let kg = toy();
        assert_eq!(kg.num_entities(), 3);
        assert_eq!(kg.num_relations(), 1);
        assert_eq!(kg.view(Split::Train).facts.len(), 2);
        assert_eq!(kg.entity_name(0), "a");
        assert_eq!(kg.entity_name(1), "b");
        assert_eq!(kg.entity_name(2), "c");
    }

    #[test]
    fn closed_world_lookup() {
        let kg = toy();
        let (a, b) = (kg.entity_id("a").unwrap(), kg.entity_id("b").unwrap());
        let r = kg.relation_id("r").unwrap();
        assert_eq!(kg.confidence(Split::Train, a, r, b), 0.9);
        // absent fact is false
        assert_eq!(kg.confidence(Split::Train, b, r, a), 0.0);
    }

    #[test]
    fn splits_nest_and_test_only_facts_hide_from_train() {
        let kg =
            UncertainKG::<f64>::from_tsv_strs("a\tr\tb\t0.9\n", "b\tr\tc\t0.5\n", "c\tr\ta\t0.4\n")
                .unwrap();
        let r = 0;
        let (a, b, c) = (0, 1, 2);
        assert_eq!(kg.confidence(Split::Train, b, r, c), 0.0);
        assert_eq!(kg.confidence(Split::Valid, b, r, c), 0.5);
        assert_eq!(kg.confidence(Split::Test, b, r, c), 0.5);
        assert_eq!(kg.confidence(Split::Test, c, r, a), 0.4);
        assert_eq!(kg.confidence(Split::Valid, c, r, a), 0.0);
        // a fact present in train has identical confidence in all views
        for split in Split::ALL {
            assert_eq!(kg.confidence(split, a, r, b), 0.9);
        }
    }

    #[test]
    fn empty_train_is_an_error() {
        let err = UncertainKG::<f64>::from_tsv_strs("", "", "").unwrap_err();
        assert!(matches!(err, KgError::NoFacts));
    }

    #[test]
    fn out_of_range_confidence_is_an_error() {
        let err = UncertainKG::<f64>::from_tsv_strs("a\tr\tb\t1.3\n", "", "").unwrap_err();
        assert!(matches!(err, KgError::ConfidenceRange { line: 1, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = UncertainKG::<f64>::from_tsv_strs("a\tr\tb\t0.9\na\tr\tb\n", "", "").unwrap_err();
        assert!(matches!(err, KgError::Malformed { line: 2, .. }));
    }

    #[test]
    fn duplicate_within_split_is_an_error() {
        let err = UncertainKG::<f64>::from_tsv_strs("a\tr\tb\t0.9\na\tr\tb\t0.8\n", "", "")
            .unwrap_err();
        assert!(matches!(err, KgError::DuplicateFact { line: 2, .. }));
    }

    #[test]
    fn cross_split_override_warns_and_wins_for_its_view() {
        let kg =
            UncertainKG::<f64>::from_tsv_strs("a\tr\tb\t0.5\n", "", "a\tr\tb\t0.8\n").unwrap();
        assert_eq!(kg.warnings().len(), 1);
        assert_eq!(kg.confidence(Split::Train, 0, 0, 1), 0.5);
        assert_eq!(kg.confidence(Split::Valid, 0, 0, 1), 0.5);
        assert_eq!(kg.confidence(Split::Test, 0, 0, 1), 0.8);
    }

    #[test]
    fn percentile_nearest_rank() {
        let kg = UncertainKG::<f64>::from_tsv_strs(
            "a\tr\tb\t0.2\na\tr\tc\t0.4\nb\tr\tc\t0.6\nc\tr\ta\t0.8\n",
            "",
            "",
        )
        .unwrap();
        let stats = kg.relation_stats(0).unwrap();
        assert_eq!(stats.percentile(50.0), 0.4);
        assert_eq!(stats.percentile(75.0), 0.6);
        assert_eq!(stats.percentile(0.0), 0.2);
        assert_eq!(stats.percentile(100.0), 0.8);
    }

    #[test]
    fn percentile_singleton_and_monotonicity() {
        let kg = UncertainKG::<f64>::from_tsv_strs("a\tr\tb\t0.7\n", "", "").unwrap();
        let stats = kg.relation_stats(0).unwrap();
        for q in [0.0, 13.0, 50.0, 99.0, 100.0] {
            assert_eq!(stats.percentile(q), 0.7);
        }

        let kg = UncertainKG::<f64>::from_tsv_strs(
            "a\tr\tb\t0.31\na\tr\tc\t0.11\nb\tr\tc\t0.77\nc\tr\tb\t0.52\nc\tr\ta\t0.92\n",
            "",
            "",
        )
        .unwrap();
        let stats = kg.relation_stats(0).unwrap();
        let mut last = f64::NEG_INFINITY;
        for q in 0..=100 {
            let v = stats.percentile(q as f64);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn load_is_deterministic() {
        let text = "a\tr1\tb\t0.9\nc\tr2\ta\t0.3\nb\tr1\tc\t0.5\n";
        let kg1 = UncertainKG::<f64>::from_tsv_strs(text, "", "").unwrap();
        let kg2 = UncertainKG::<f64>::from_tsv_strs(text, "", "").unwrap();
        assert_eq!(kg1.entities, kg2.entities);
        assert_eq!(kg1.relations, kg2.relations);
    }

    #[test]
    fn adjacency_indexes_agree_with_facts() {
        let kg = UncertainKG::<f64>::from_tsv_strs(
            "a\tr1\tb\t0.9\nc\tr2\tb\t0.3\nb\tr1\tc\t0.5\n",
            "",
            "",
        )
        .unwrap();
        let view = kg.view(Split::Train);
        let b = kg.entity_id("b").unwrap();
        let tails: Vec<_> = view.facts_with_tail(b).map(|f| f.head).collect();
        assert_eq!(tails.len(), 2);
        let r1 = kg.relation_id("r1").unwrap();
        assert_eq!(view.facts_with_relation(r1).count(), 2);
    }
}
