//! Graph-shrinking inference.
//!
//! A conjunct's query graph is annotated with one state vector per variable
//! node and a scalar accumulator for fully grounded contributions. Four
//! equivalence-preserving transformations shrink it until only the free
//! node remains:
//!
//! 1. constant-node removal: every edge at a constant folds into the
//!    neighboring variable's state vector (O(|E|) per edge);
//! 2. self-loop removal: a loop on `z` folds the relation matrix diagonal
//!    into `C_z`;
//! 3. leaf removal: all parallel atoms between leaf `u` and neighbor `v`
//!    combine cellwise into one matrix `M`, then
//!    `C_v(o) <- C_v(o) ⊗ max_s [C_u(s) ⊗ M(s, o)]`;
//! 4. cycle enumeration: when no leaf remains, one existential on the
//!    shortest cycle is substituted by every entity and the results ⊕-fold.
//!
//! When the free variable itself is the only leaf, the subgraph without it
//! is solved first with its neighbor as the answer variable, then joined
//! back. Disjuncts combine by elementwise ⊕.
//!
//! Every value entering a state vector passes through
//! [`crate::semiring::atom_value`], whose grid makes all sums exact; the
//! final utilities are therefore independent of elimination order and
//! bit-identical to the brute-force oracle.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::confidence::ConfidenceBackend;
use crate::kg::{EntityId, RelationId};
use crate::query::{build_query_graph, NodeRole, SoftConjunctiveQuery, SoftQuery};
use crate::scalar::Scalar;
use crate::semiring::{
    self, atom_value, max_plus_join, prune_state, DefaultSparseMatrix, JoinStrategy, StateVector,
    UtilityVector,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InferenceError {
    #[error("no cycle to enumerate; the graph still has a leaf or is solved")]
    NoCycle,
    #[error("cycle enumeration budget of {budget} substitutions exceeded")]
    EnumerationBudget { budget: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig<S> {
    /// Matrix build threshold: raw confidences below it are not stored.
    /// Disabled by default; this is an approximation knob.
    pub delta1: Option<S>,
    /// State pruning threshold applied to the eliminated side before each
    /// join. Disabled by default.
    pub delta2: Option<S>,
    /// Cap on the total number of entity substitutions spent on cycles.
    pub enumeration_budget: u64,
    pub join_strategy: JoinStrategy,
}

impl<S> Default for InferenceConfig<S> {
    fn default() -> Self {
        Self {
            delta1: None,
            delta2: None,
            enumeration_budget: 1_000_000,
            join_strategy: JoinStrategy::Auto,
        }
    }
}

/// One transformation step, for `--emit-trace` debugging.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub step: usize,
    pub action: &'static str,
    pub node: Option<usize>,
    pub entity: Option<usize>,
    pub edges_removed: usize,
    /// Entries above the semiring zero in the updated state vector.
    pub nnz: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedEdge<S> {
    pub head: usize,
    pub tail: usize,
    pub relation: RelationId,
    pub alpha: S,
    pub beta: S,
    pub negated: bool,
}

#[derive(Debug, Clone)]
struct NodeSlot<S> {
    role: NodeRole,
    state: Option<StateVector<S>>,
    alive: bool,
}

/// A soft query graph plus per-variable state vectors and the scalar
/// accumulator. Transformations only remove nodes and edges.
#[derive(Debug, Clone)]
pub struct AnnotatedQueryGraph<S> {
    n_entities: usize,
    nodes: Vec<NodeSlot<S>>,
    edges: Vec<(AnnotatedEdge<S>, bool)>,
    free: Option<usize>,
    scalar: S,
}

impl<S: Scalar> AnnotatedQueryGraph<S> {
    pub fn from_conjunct(conj: &SoftConjunctiveQuery<S>, n_entities: usize) -> Self {
        let graph = build_query_graph(conj);
        let nodes = graph
            .nodes
            .iter()
            .map(|&role| NodeSlot {
                role,
                state: role
                    .is_variable()
                    .then(|| StateVector::unit(n_entities)),
                alive: true,
            })
            .collect::<Vec<_>>();
        let free = graph.nodes.iter().position(|&r| r == NodeRole::Free);
        let edges = graph
            .edges
            .iter()
            .map(|e| {
                (
                    AnnotatedEdge {
                        head: e.head,
                        tail: e.tail,
                        relation: e.relation,
                        alpha: e.alpha,
                        beta: e.beta,
                        negated: e.negated,
                    },
                    true,
                )
            })
            .collect();
        Self {
            n_entities,
            nodes,
            edges,
            free,
            scalar: S::zero(),
        }
    }

    pub fn num_entities(&self) -> usize {
        self.n_entities
    }

    pub fn scalar(&self) -> S {
        self.scalar
    }

    pub fn free_node(&self) -> Option<usize> {
        self.free
    }

    pub fn node_role(&self, node: usize) -> NodeRole {
        self.nodes[node].role
    }

    pub fn is_alive(&self, node: usize) -> bool {
        self.nodes[node].alive
    }

    pub fn state(&self, node: usize) -> Option<&StateVector<S>> {
        self.nodes[node].state.as_ref()
    }

    pub fn alive_edges(&self) -> impl Iterator<Item = (usize, &AnnotatedEdge<S>)> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, (_, alive))| *alive)
            .map(|(i, (e, _))| (i, e))
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive)
            .map(|(i, _)| i)
    }

    /// Distinct alive neighbors, parallel edges collapsed, self-loops
    /// excluded.
    pub fn neighbors(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (_, e) in self.alive_edges() {
            if e.head == node && e.tail != node {
                out.insert(e.tail);
            } else if e.tail == node && e.head != node {
                out.insert(e.head);
            }
        }
        out
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].alive && self.neighbors(node).len() == 1
    }

    fn kill_node(&mut self, node: usize) {
        debug_assert!(
            !self
                .alive_edges()
                .any(|(_, e)| e.head == node || e.tail == node),
            "node removed while edges remain"
        );
        self.nodes[node].alive = false;
        self.nodes[node].state = None;
    }

    fn mul_scalar(&mut self, v: S) {
        self.scalar = semiring::mul(self.scalar, v);
    }
}

type MatrixCache<S> = Mutex<HashMap<(RelationId, bool), Arc<DefaultSparseMatrix<S>>>>;

/// The inference engine: a backend, a configuration, and a cache of
/// per-relation matrices (both orientations). Answering is a pure function
/// of the query; the engine is safe to share across threads.
pub struct Engine<S, B> {
    backend: B,
    config: InferenceConfig<S>,
    cache: MatrixCache<S>,
}

/// Utilities plus diagnostics of one answering run.
#[derive(Debug, Clone)]
pub struct InferenceOutcome<S> {
    pub utilities: UtilityVector<S>,
    pub trace: Vec<TraceEvent>,
    /// Upper bound on the utility deviation introduced by delta2 pruning
    /// (0 when pruning never dropped anything).
    pub prune_bound: S,
}

struct RunState<S> {
    trace: Vec<TraceEvent>,
    prune_bound: S,
    budget: u64,
}

impl<S: Scalar> RunState<S> {
    fn new(budget: u64) -> Self {
        Self {
            trace: Vec::new(),
            prune_bound: S::zero(),
            budget,
        }
    }

    fn push(&mut self, action: &'static str, node: Option<usize>, entity: Option<usize>, edges_removed: usize, nnz: Option<usize>) {
        let step = self.trace.len();
        self.trace.push(TraceEvent {
            step,
            action,
            node,
            entity,
            edges_removed,
            nnz,
        });
    }
}

impl<S: Scalar, B: ConfidenceBackend<S>> Engine<S, B> {
    pub fn new(backend: B, config: InferenceConfig<S>) -> Self {
        Self {
            backend,
            config,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn config(&self) -> &InferenceConfig<S> {
        &self.config
    }

    /// Raw confidence matrix for a relation, cached per orientation.
    pub fn matrix(&self, r: RelationId, transposed: bool) -> Arc<DefaultSparseMatrix<S>> {
        let mut cache = self.cache.lock().expect("matrix cache lock");
        if let Some(m) = cache.get(&(r, transposed)) {
            return m.clone();
        }
        let base = match cache.get(&(r, false)) {
            Some(m) => m.clone(),
            None => {
                let m = Arc::new(self.backend.relation_matrix(r, self.config.delta1));
                cache.insert((r, false), m.clone());
                m
            }
        };
        if !transposed {
            return base;
        }
        let t = Arc::new(base.transpose());
        cache.insert((r, true), t.clone());
        t
    }

    /// Atom-valued matrix with rows indexing `row_node`: direct orientation
    /// for edges `(row_node, r, col_node)`, transposed otherwise.
    fn atom_matrix(&self, edge: &AnnotatedEdge<S>, row_node: usize) -> DefaultSparseMatrix<S> {
        let transposed = edge.head != row_node;
        self.matrix(edge.relation, transposed)
            .map_values(|p| atom_value(p, edge.alpha, edge.beta, edge.negated))
    }

    /// Fold `atom_value` of one matrix column into a state vector.
    fn fold_column(
        &self,
        state: &mut StateVector<S>,
        matrix: &DefaultSparseMatrix<S>,
        column: usize,
        alpha: S,
        beta: S,
        negated: bool,
    ) {
        let col = matrix.column(column);
        let mut k = 0usize;
        let default = atom_value(matrix.default_value(), alpha, beta, negated);
        for s in 0..matrix.size() {
            let v = if k < col.len() && col[k].0 as usize == s {
                k += 1;
                atom_value(col[k - 1].1, alpha, beta, negated)
            } else {
                default
            };
            state.mul_assign_at(s, v);
        }
    }

    /// Fold every edge at a constant node into its neighbor (or the scalar
    /// accumulator when both endpoints are constants), then delete the
    /// constant nodes.
    pub fn remove_constant_nodes(&self, g: &mut AnnotatedQueryGraph<S>) {
        let mut run = RunState::new(0);
        self.remove_constant_nodes_run(g, &mut run);
    }

    fn remove_constant_nodes_run(&self, g: &mut AnnotatedQueryGraph<S>, run: &mut RunState<S>) {
        for node in 0..g.nodes.len() {
            if !g.nodes[node].alive {
                continue;
            }
            let NodeRole::Const(entity) = g.nodes[node].role else {
                continue;
            };
            let incident: Vec<usize> = g
                .alive_edges()
                .filter(|(_, e)| e.head == node || e.tail == node)
                .map(|(i, _)| i)
                .collect();
            let mut removed = 0usize;
            for edge_idx in incident {
                let edge = g.edges[edge_idx].0;
                let head_role = g.nodes[edge.head].role;
                let tail_role = g.nodes[edge.tail].role;
                match (head_role, tail_role) {
                    (NodeRole::Const(h), NodeRole::Const(t)) => {
                        let m = self.matrix(edge.relation, false);
                        let v = atom_value(m.get(h, t), edge.alpha, edge.beta, edge.negated);
                        g.mul_scalar(v);
                    }
                    (NodeRole::Const(_), _) => {
                        // values P(entity, r, s): row `entity` = column of
                        // the transposed matrix
                        let m = self.matrix(edge.relation, true);
                        let var = edge.tail;
                        let mut state = g.nodes[var].state.take().expect("variable state");
                        self.fold_column(&mut state, &m, entity, edge.alpha, edge.beta, edge.negated);
                        g.nodes[var].state = Some(state);
                    }
                    (_, NodeRole::Const(_)) => {
                        // values P(s, r, entity): column of the direct matrix
                        let m = self.matrix(edge.relation, false);
                        let var = edge.head;
                        let mut state = g.nodes[var].state.take().expect("variable state");
                        self.fold_column(&mut state, &m, entity, edge.alpha, edge.beta, edge.negated);
                        g.nodes[var].state = Some(state);
                    }
                    _ => unreachable!("edge at a constant node"),
                }
                g.edges[edge_idx].1 = false;
                removed += 1;
            }
            g.kill_node(node);
            run.push("remove-constant", Some(node), None, removed, None);
        }
    }

    /// Fold self-loops on variable nodes through the matrix diagonal.
    pub fn remove_self_loops(&self, g: &mut AnnotatedQueryGraph<S>) {
        let mut run = RunState::new(0);
        self.remove_self_loops_run(g, &mut run);
    }

    fn remove_self_loops_run(&self, g: &mut AnnotatedQueryGraph<S>, run: &mut RunState<S>) {
        for node in 0..g.nodes.len() {
            if !g.nodes[node].alive || !g.nodes[node].role.is_variable() {
                continue;
            }
            let loops: Vec<usize> = g
                .alive_edges()
                .filter(|(_, e)| e.head == node && e.tail == node)
                .map(|(i, _)| i)
                .collect();
            if loops.is_empty() {
                continue;
            }
            let mut removed = 0usize;
            for edge_idx in loops {
                let edge = g.edges[edge_idx].0;
                let m = self.matrix(edge.relation, false);
                let mut state = g.nodes[node].state.take().expect("variable state");
                for s in 0..g.n_entities {
                    let v = atom_value(m.get(s, s), edge.alpha, edge.beta, edge.negated);
                    state.mul_assign_at(s, v);
                }
                g.nodes[node].state = Some(state);
                g.edges[edge_idx].1 = false;
                removed += 1;
            }
            let nnz = g.nodes[node].state.as_ref().map(StateVector::nnz);
            run.push("remove-self-loop", Some(node), None, removed, nnz);
        }
    }

    /// Remove one leaf variable node by joining it into its neighbor.
    /// Panics if `leaf` is not an alive non-free leaf.
    pub fn remove_leaf(&self, g: &mut AnnotatedQueryGraph<S>, leaf: usize) {
        let mut run = RunState::new(0);
        self.remove_leaf_run(g, leaf, &mut run);
    }

    fn remove_leaf_run(&self, g: &mut AnnotatedQueryGraph<S>, leaf: usize, run: &mut RunState<S>) {
        assert!(g.is_leaf(leaf), "node {leaf} is not a leaf");
        assert!(Some(leaf) != g.free, "the free variable is not eliminated by joins");
        let neighbor = *g
            .neighbors(leaf)
            .iter()
            .next()
            .expect("leaf has one neighbor");
        let parallel: Vec<usize> = g
            .alive_edges()
            .filter(|(_, e)| {
                (e.head == leaf && e.tail == neighbor) || (e.head == neighbor && e.tail == leaf)
            })
            .map(|(i, _)| i)
            .collect();
        let mut effective: Option<DefaultSparseMatrix<S>> = None;
        for &edge_idx in &parallel {
            let m = self.atom_matrix(&g.edges[edge_idx].0, leaf);
            effective = Some(match effective {
                None => m,
                Some(acc) => acc.combine_mul(&m),
            });
        }
        let effective = effective.expect("leaf has at least one edge");

        let c_u = g.nodes[leaf].state.take().expect("leaf state");
        let pruned = prune_state(&c_u, self.config.delta2);
        self.note_pruning(&c_u, &effective, run);
        let c_v = g.nodes[neighbor].state.take().expect("neighbor state");
        let joined = max_plus_join(&pruned, &effective, &c_v, self.config.join_strategy);
        g.nodes[neighbor].state = Some(joined);
        for edge_idx in parallel.iter() {
            g.edges[*edge_idx].1 = false;
        }
        g.kill_node(leaf);
        let nnz = g.nodes[neighbor].state.as_ref().map(StateVector::nnz);
        run.push("remove-leaf", Some(leaf), None, parallel.len(), nnz);
    }

    fn note_pruning(
        &self,
        c_u: &StateVector<S>,
        m: &DefaultSparseMatrix<S>,
        run: &mut RunState<S>,
    ) {
        let Some(delta2) = self.config.delta2 else {
            return;
        };
        let Some(largest_pruned) = c_u.max_below(delta2) else {
            return;
        };
        let mut m_max = m.default_value();
        for c in 0..m.size() {
            for &(_, v) in m.column(c) {
                m_max = semiring::add(m_max, v);
            }
        }
        if m_max > semiring::zero_bar() {
            let contribution = largest_pruned + m_max;
            if contribution > S::zero() {
                run.prune_bound = run.prune_bound + contribution;
            } else {
                // dropping a negative contribution can still lower a column
                // that had no better candidate; bound by its magnitude
                run.prune_bound = run.prune_bound + contribution.abs();
            }
        }
    }

    /// Fold isolated non-free variable nodes (⊕ over their state) into the
    /// scalar accumulator.
    fn fold_isolated(&self, g: &mut AnnotatedQueryGraph<S>, run: &mut RunState<S>) {
        for node in 0..g.nodes.len() {
            if !g.nodes[node].alive || Some(node) == g.free || !g.nodes[node].role.is_variable() {
                continue;
            }
            if g.neighbors(node).is_empty()
                && !g
                    .alive_edges()
                    .any(|(_, e)| e.head == node || e.tail == node)
            {
                let state = g.nodes[node].state.take().expect("variable state");
                let folded = state.fold_add();
                g.mul_scalar(folded);
                g.kill_node(node);
                run.push("fold-isolated", Some(node), None, 0, None);
            }
        }
    }

    /// Enumerate one existential node on the shortest cycle, substituting
    /// every entity and ⊕-combining the recursive answers.
    pub fn enumerate_cycle(
        &self,
        g: &AnnotatedQueryGraph<S>,
    ) -> Result<UtilityVector<S>, InferenceError> {
        let mut run = RunState::new(self.config.enumeration_budget);
        self.enumerate_cycle_run(g, &mut run)
    }

    fn enumerate_cycle_run(
        &self,
        g: &AnnotatedQueryGraph<S>,
        run: &mut RunState<S>,
    ) -> Result<UtilityVector<S>, InferenceError> {
        let cycle = shortest_cycle(g).ok_or(InferenceError::NoCycle)?;
        // never enumerate the answer variable, including an existential
        // standing in as the answer variable of a subquery
        let node = cycle
            .iter()
            .copied()
            .filter(|&n| Some(n) != g.free && g.nodes[n].role.is_variable())
            .min()
            .expect("a cycle contains at least two non-answer variables");

        let mut acc = UtilityVector::all_zero_bar(g.n_entities);
        for entity in 0..g.n_entities {
            if run.budget == 0 {
                return Err(InferenceError::EnumerationBudget {
                    budget: self.config.enumeration_budget,
                });
            }
            run.budget -= 1;
            let offset = g.nodes[node]
                .state
                .as_ref()
                .expect("existential state")
                .get(entity);
            run.push("enumerate", Some(node), Some(entity), 0, None);
            if offset == semiring::zero_bar() {
                continue;
            }
            let mut sub = g.clone();
            sub.nodes[node].role = NodeRole::Const(entity);
            sub.nodes[node].state = None;
            sub.mul_scalar(offset);
            let part = self.solve_run(&mut sub, run)?;
            acc.add_assign(&part);
        }
        Ok(acc)
    }

    fn solve_run(
        &self,
        g: &mut AnnotatedQueryGraph<S>,
        run: &mut RunState<S>,
    ) -> Result<UtilityVector<S>, InferenceError> {
        self.remove_constant_nodes_run(g, run);
        self.remove_self_loops_run(g, run);
        let free = g.free.expect("conjunct has a free node");
        loop {
            self.fold_isolated(g, run);
            if g.alive_edges().next().is_none() {
                let mut result = g.nodes[free]
                    .state
                    .clone()
                    .expect("free node has a state vector");
                result.mul_assign_scalar(g.scalar);
                return Ok(result);
            }

            // cheapest leaf first: smallest nnz, then lowest node index
            let leaf = g
                .alive_nodes()
                .filter(|&n| n != free && g.is_leaf(n))
                .min_by_key(|&n| (g.nodes[n].state.as_ref().map_or(0, StateVector::nnz), n));
            if let Some(leaf) = leaf {
                self.remove_leaf_run(g, leaf, run);
                continue;
            }

            if g.is_leaf(free) {
                // solve the subgraph without the free variable first, with
                // its neighbor as the answer variable, then join back
                let neighbor = *g.neighbors(free).iter().next().expect("free leaf neighbor");
                let mut sub = g.clone();
                let incident: Vec<usize> = sub
                    .alive_edges()
                    .filter(|(_, e)| e.head == free || e.tail == free)
                    .map(|(i, _)| i)
                    .collect();
                for i in &incident {
                    sub.edges[*i].1 = false;
                }
                sub.kill_node(free);
                sub.free = Some(neighbor);
                run.push("solve-subquery", Some(free), None, 0, None);
                let w = self.solve_run(&mut sub, run)?;

                let mut effective: Option<DefaultSparseMatrix<S>> = None;
                for &edge_idx in &incident {
                    let m = self.atom_matrix(&g.edges[edge_idx].0, neighbor);
                    effective = Some(match effective {
                        None => m,
                        Some(acc) => acc.combine_mul(&m),
                    });
                }
                let effective = effective.expect("free leaf has at least one edge");
                let pruned = prune_state(&w, self.config.delta2);
                self.note_pruning(&w, &effective, run);
                let c_free = g.nodes[free].state.take().expect("free state");
                let joined =
                    max_plus_join(&pruned, &effective, &c_free, self.config.join_strategy);
                run.push("join-free-leaf", Some(free), None, incident.len(), Some(joined.nnz()));
                // the subquery absorbed the scalar accumulator already
                return Ok(joined);
            }

            return self.enumerate_cycle_run(g, run);
        }
    }

    /// Utility vector of one conjunct.
    pub fn answer_conjunctive(
        &self,
        conj: &SoftConjunctiveQuery<S>,
    ) -> Result<UtilityVector<S>, InferenceError> {
        Ok(self.answer_conjunctive_full(conj)?.utilities)
    }

    pub fn answer_conjunctive_full(
        &self,
        conj: &SoftConjunctiveQuery<S>,
    ) -> Result<InferenceOutcome<S>, InferenceError> {
        let mut g = AnnotatedQueryGraph::from_conjunct(conj, self.backend.num_entities());
        let mut run = RunState::new(self.config.enumeration_budget);
        let utilities = self.solve_run(&mut g, &mut run)?;
        Ok(InferenceOutcome {
            utilities,
            trace: run.trace,
            prune_bound: run.prune_bound,
        })
    }

    /// Utility vector of a query: elementwise ⊕ over its disjuncts.
    pub fn answer_query(&self, query: &SoftQuery<S>) -> Result<UtilityVector<S>, InferenceError> {
        Ok(self.answer_query_full(query)?.utilities)
    }

    pub fn answer_query_full(
        &self,
        query: &SoftQuery<S>,
    ) -> Result<InferenceOutcome<S>, InferenceError> {
        let mut acc: Option<UtilityVector<S>> = None;
        let mut trace = Vec::new();
        let mut prune_bound = S::zero();
        for conj in &query.disjuncts {
            let outcome = self.answer_conjunctive_full(conj)?;
            trace.extend(outcome.trace);
            prune_bound = prune_bound + outcome.prune_bound;
            acc = Some(match acc {
                None => outcome.utilities,
                Some(mut a) => {
                    a.add_assign(&outcome.utilities);
                    a
                }
            });
        }
        Ok(InferenceOutcome {
            utilities: acc.expect("query has at least one disjunct"),
            trace,
            prune_bound,
        })
    }
}

/// Shortest cycle (node set) in the collapsed simple graph of alive nodes,
/// found by BFS from every node; deterministic tie-breaking by scan order.
fn shortest_cycle<S: Scalar>(g: &AnnotatedQueryGraph<S>) -> Option<Vec<usize>> {
    let nodes: Vec<usize> = g.alive_nodes().collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for &root in &nodes {
        let mut depth: HashMap<usize, usize> = HashMap::new();
        let mut parent: HashMap<usize, usize> = HashMap::new();
        depth.insert(root, 0);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in g.neighbors(u) {
                if !depth.contains_key(&v) {
                    depth.insert(v, depth[&u] + 1);
                    parent.insert(v, u);
                    queue.push_back(v);
                } else if parent.get(&u) != Some(&v) && parent.get(&v) != Some(&u) {
                    let len = depth[&u] + depth[&v] + 1;
                    if best.as_ref().is_none_or(|(b, _)| len < *b) {
                        let mut cycle: BTreeSet<usize> = BTreeSet::new();
                        let mut walk = u;
                        cycle.insert(walk);
                        while let Some(&p) = parent.get(&walk) {
                            cycle.insert(p);
                            walk = p;
                        }
                        walk = v;
                        cycle.insert(walk);
                        while let Some(&p) = parent.get(&walk) {
                            cycle.insert(p);
                            walk = p;
                        }
                        best = Some((len, cycle.into_iter().collect()));
                    }
                }
            }
        }
    }
    best.map(|(_, cycle)| cycle)
}

/// Entities with utility above the semiring zero, sorted by value
/// descending, ties broken by ascending entity index.
pub fn rank_answers<S: Scalar>(utilities: &UtilityVector<S>) -> Vec<(EntityId, S)> {
    let mut out: Vec<(EntityId, S)> = utilities
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > semiring::zero_bar())
        .map(|(i, &v)| (i, v))
        .collect();
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("utilities are never NaN")
            .then(a.0.cmp(&b.0))
    });
    out
}

/// Answer output rows: `query_id<TAB>entity<TAB>utility`, one line per
/// ranked answer, semiring-zero entities omitted.
pub fn write_predictions<S: Scalar>(
    mut w: impl Write,
    query_id: &str,
    utilities: &UtilityVector<S>,
    entity_name: impl Fn(EntityId) -> String,
) -> std::io::Result<()> {
    for (entity, value) in rank_answers(utilities) {
        writeln!(w, "{query_id}\t{}\t{value}", entity_name(entity))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::lookup_backend;
    use crate::kg::{Split, UncertainKG};
    use crate::oracle::{brute_force_utility, OracleConfig};
    use crate::query::RawQuery;

    const NEG_INF: f64 = f64::NEG_INFINITY;

    fn kg() -> Arc<UncertainKG<f64>> {
        Arc::new(
            UncertainKG::from_tsv_strs(
                "a\tr1\tb\t0.9\nb\tr2\tc\t0.6\na\tr1\tc\t0.4\nc\tr2\td\t0.8\nd\tr1\ta\t0.3\nb\tr1\tb\t0.7\n",
                "",
                "",
            )
            .unwrap(),
        )
    }

    fn engine() -> Engine<f64, crate::confidence::LookupBackend<f64>> {
        Engine::new(lookup_backend(kg(), Split::Train), InferenceConfig::default())
    }

    fn query(text: &str) -> SoftQuery<f64> {
        RawQuery::parse_text(text).unwrap().resolve(&kg()).unwrap()
    }

    fn oracle(q: &SoftQuery<f64>) -> UtilityVector<f64> {
        brute_force_utility(q, &lookup_backend(kg(), Split::Train), &OracleConfig::default())
            .unwrap()
    }

    #[test]
    fn one_hop_is_a_matrix_row() {
        let e = engine();
        let q = query("(a, r1, y, 0, 1)");
        let u = e.answer_query(&q).unwrap();
        assert_eq!(u, oracle(&q));
        assert_eq!(u.get(1), crate::semiring::atom_value(0.9, 0.0, 1.0, false));
        assert_eq!(u.get(0), 0.0); // absent fact, alpha = 0 keeps numeric 0
    }

    #[test]
    fn constant_removal_folds_grounded_atoms_into_the_scalar() {
        let e = engine();
        let q = query("(a, r1, b, 0, 2) & (a, r1, y, 0, 1)");
        let mut g = AnnotatedQueryGraph::from_conjunct(&q.disjuncts[0], kg().num_entities());
        e.remove_constant_nodes(&mut g);
        let expected = crate::semiring::atom_value(0.9, 0.0, 2.0, false);
        assert_eq!(g.scalar(), expected);
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn two_hop_matches_oracle() {
        let e = engine();
        let q = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn intersection_matches_oracle() {
        let e = engine();
        let q = query("(a, r1, y, 0, 1) & (b, r2, y, 0.5, 2)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn existential_leaf_with_unit_state_matches_oracle() {
        let e = engine();
        let q = query("EXISTS x1 . (a, r1, y, 0, 1) & (x1, r2, y, 0, 1)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn self_loop_folds_the_diagonal() {
        let e = engine();
        // b has the only self fact (b, r1, b, 0.7)
        let q = query("EXISTS x1 . (x1, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
        // threshold above every diagonal entry kills everything
        let killed = query("EXISTS x1 . (x1, r1, x1, 0.95, 1) & (x1, r2, y, 0, 1)");
        let u = e.answer_query(&killed).unwrap();
        assert_eq!(u, oracle(&killed));
        assert_eq!(u.nnz(), 0);
    }

    #[test]
    fn self_loop_on_free_variable() {
        let e = engine();
        let q = query("(y, r1, y, 0, 1) & (a, r1, y, 0, 1)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn negated_atom_matches_oracle() {
        let e = engine();
        let q = query("!(a, r1, y, 0, 1) & (b, r2, y, 0, 1)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn multi_edge_combines_cellwise() {
        let e = engine();
        let q = query("(a, r1, y, 0, 1) & (a, r2, y, 0, 0.5)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn union_is_elementwise_max() {
        let e = engine();
        let q1 = query("(a, r1, y, 0, 1)");
        let q2 = query("(b, r2, y, 0, 1)");
        let union = query("(a, r1, y, 0, 1) | (b, r2, y, 0, 1)");
        let (u1, u2, uu) = (
            e.answer_query(&q1).unwrap(),
            e.answer_query(&q2).unwrap(),
            e.answer_query(&union).unwrap(),
        );
        for i in 0..kg().num_entities() {
            assert_eq!(uu.get(i), u1.get(i).max(u2.get(i)));
        }
        // duplicated disjunct changes nothing
        let doubled = query("(a, r1, y, 0, 1) | (a, r1, y, 0, 1)");
        assert_eq!(e.answer_query(&doubled).unwrap(), u1);
    }

    #[test]
    fn alpha_killing_every_atom_gives_all_zero_bar() {
        let e = engine();
        let q = query("(a, r1, y, 0.99, 1)");
        let u = e.answer_query(&q).unwrap();
        assert_eq!(u.nnz(), 0);
    }

    #[test]
    fn free_leaf_subquery_path() {
        // y hangs off x1, and x1 caps a triangle: the free variable is the
        // only leaf, forcing the subquery route; the triangle then needs
        // enumeration inside the subsolve
        let e = engine();
        let q = query(
            "EXISTS x1, x2, x3 . (x1, r1, y, 0, 1) & (x1, r1, x2, 0, 1) & (x2, r2, x3, 0, 1) & (x3, r1, x1, 0, 1)",
        );
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn triangle_enumeration_matches_oracle() {
        let e = engine();
        let q = query(
            "EXISTS x1, x2 . (y, r1, x1, 0, 1) & (x1, r2, x2, 0, 1) & (x2, r1, y, 0, 1) & (a, r1, y, 0, 1)",
        );
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn two_linked_cycles_need_nested_enumeration() {
        let e = engine();
        let q = query(
            "EXISTS x1, x2, x3, x4 . (y, r1, x1, 0, 1) & (x1, r2, x2, 0, 1) & (x2, r1, y, 0, 1) \
             & (x2, r2, x3, 0, 1) & (x3, r1, x4, 0, 0.5) & (x4, r2, x2, 0, 1)",
        );
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn enumerate_cycle_rejects_acyclic_graphs() {
        let e = engine();
        let q = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let g = AnnotatedQueryGraph::from_conjunct(&q.disjuncts[0], kg().num_entities());
        assert_eq!(e.enumerate_cycle(&g).unwrap_err(), InferenceError::NoCycle);
    }

    #[test]
    fn zero_budget_on_cyclic_query_errors() {
        let backend = lookup_backend(kg(), Split::Train);
        let e = Engine::new(
            backend,
            InferenceConfig {
                enumeration_budget: 0,
                ..Default::default()
            },
        );
        let q = query(
            "EXISTS x1, x2 . (y, r1, x1, 0, 1) & (x1, r2, x2, 0, 1) & (x2, r1, y, 0, 1)",
        );
        let err = e.answer_query(&q).unwrap_err();
        assert_eq!(err, InferenceError::EnumerationBudget { budget: 0 });
    }

    #[test]
    fn disconnected_existential_component_becomes_a_scalar() {
        let e = engine();
        let q = query("EXISTS x1, x2 . (c, r2, y, 0, 1) & (x1, r1, x2, 0, 1)");
        assert_eq!(e.answer_query(&q).unwrap(), oracle(&q));
    }

    #[test]
    fn rank_answers_orders_and_breaks_ties() {
        let u = UtilityVector::from_values(vec![0.9, NEG_INF, 0.6]);
        assert_eq!(rank_answers(&u), vec![(0, 0.9), (2, 0.6)]);
        let empty = UtilityVector::<f64>::all_zero_bar(3);
        assert!(rank_answers(&empty).is_empty());
        let tie = UtilityVector::from_values(vec![0.5, 0.5]);
        assert_eq!(rank_answers(&tie), vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn predictions_tsv_omits_zero_bar() {
        let u = UtilityVector::from_values(vec![0.5, NEG_INF]);
        let mut buf = Vec::new();
        write_predictions(&mut buf, "q0", &u, |e| format!("e{e}")).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "q0\te0\t0.5\n");
    }

    #[test]
    fn trace_records_transformations() {
        let e = engine();
        let q = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let outcome = e.answer_query_full(&q).unwrap();
        let actions: Vec<&str> = outcome.trace.iter().map(|t| t.action).collect();
        assert!(actions.contains(&"remove-constant"));
        assert!(actions.contains(&"remove-leaf"));
    }

    #[test]
    fn delta1_drops_low_confidence_matrix_cells() {
        let backend = lookup_backend(kg(), Split::Train);
        let e = Engine::new(
            backend,
            InferenceConfig {
                delta1: Some(0.5),
                ..Default::default()
            },
        );
        // (a, r1, c, 0.4) falls below the build threshold and reads as 0
        let q = query("(a, r1, y, 0.3, 1)");
        let u = e.answer_query(&q).unwrap();
        let c = 2; // entity index of "c"
        assert_eq!(u.get(c), NEG_INF); // 0 < alpha kills it
        let b = 1;
        assert!(u.get(b) > 0.0); // 0.9 survives the threshold
    }

    #[test]
    fn delta2_pruning_reports_a_bound() {
        let backend = lookup_backend(kg(), Split::Train);
        let exact = engine().answer_query(&query(
            "EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)",
        ))
        .unwrap();
        let e = Engine::new(
            backend,
            InferenceConfig {
                delta2: Some(0.5),
                ..Default::default()
            },
        );
        let q = query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let outcome = e.answer_query_full(&q).unwrap();
        for i in 0..kg().num_entities() {
            let (a, b) = (exact.get(i), outcome.utilities.get(i));
            let deviation = if a == b { 0.0 } else { (a - b).abs() };
            assert!(
                deviation <= outcome.prune_bound + 1e-12,
                "entity {i}: deviation {deviation} exceeds bound {}",
                outcome.prune_bound
            );
        }
    }
}
