//! Soft query graphs: the multigraph induced by one conjunct's atoms.
//!
//! One node per distinct term, one edge per atom (parallel edges are
//! preserved). Leaf classification collapses parallel edges: a node is a
//! leaf iff its neighbor set has size one.

use std::collections::BTreeSet;

use crate::kg::{EntityId, RelationId};
use crate::scalar::Scalar;

use super::{SoftConjunctiveQuery, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Const(EntityId),
    Exist(u32),
    Free,
}

impl NodeRole {
    pub fn is_variable(self) -> bool {
        !matches!(self, NodeRole::Const(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge<S> {
    /// Node index of the atom's head.
    pub head: usize,
    /// Node index of the atom's tail.
    pub tail: usize,
    pub relation: RelationId,
    pub alpha: S,
    pub beta: S,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftQueryGraph<S> {
    pub nodes: Vec<NodeRole>,
    pub edges: Vec<GraphEdge<S>>,
}

/// Structural diagnostics used to route inference (leaf elimination vs.
/// cycle enumeration). Acyclicity is judged on the simple graph with
/// parallel edges collapsed; self-loops are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diagnostics {
    pub acyclic: bool,
    pub connected: bool,
    pub has_self_loop: bool,
    pub free_present: bool,
}

pub fn build_query_graph<S: Scalar>(conj: &SoftConjunctiveQuery<S>) -> SoftQueryGraph<S> {
    let mut nodes: Vec<NodeRole> = Vec::new();
    let node_of = |nodes: &mut Vec<NodeRole>, term: Term| -> usize {
        let role = match term {
            Term::Const(e) => NodeRole::Const(e),
            Term::Free => NodeRole::Free,
            Term::Exist(i) => NodeRole::Exist(i),
        };
        match nodes.iter().position(|&n| n == role) {
            Some(i) => i,
            None => {
                nodes.push(role);
                nodes.len() - 1
            }
        }
    };
    let mut edges = Vec::with_capacity(conj.atoms.len());
    for atom in &conj.atoms {
        let head = node_of(&mut nodes, atom.head);
        let tail = node_of(&mut nodes, atom.tail);
        edges.push(GraphEdge {
            head,
            tail,
            relation: atom.relation,
            alpha: atom.alpha,
            beta: atom.beta,
            negated: atom.negated,
        });
    }
    SoftQueryGraph { nodes, edges }
}

impl<S: Scalar> SoftQueryGraph<S> {
    /// Distinct neighbors of a node, parallel edges collapsed, self-loops
    /// excluded.
    pub fn neighbors(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for e in &self.edges {
            if e.head == node && e.tail != node {
                out.insert(e.tail);
            } else if e.tail == node && e.head != node {
                out.insert(e.head);
            }
        }
        out
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.neighbors(node).len() == 1
    }

    pub fn validate(&self) -> Diagnostics {
        let n = self.nodes.len();
        let has_self_loop = self.edges.iter().any(|e| e.head == e.tail);
        let free_present = self.nodes.contains(&NodeRole::Free);

        // union-find over the collapsed simple graph
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut simple: BTreeSet<(usize, usize)> = BTreeSet::new();
        for e in &self.edges {
            if e.head != e.tail {
                simple.insert((e.head.min(e.tail), e.head.max(e.tail)));
            }
        }
        let mut acyclic = true;
        for (a, b) in simple {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                acyclic = false;
            } else {
                parent[ra] = rb;
            }
        }
        let components: BTreeSet<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        Diagnostics {
            acyclic,
            connected: components.len() <= 1,
            has_self_loop,
            free_present,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{RawQuery, SoftQuery};
    use crate::kg::UncertainKG;

    fn resolve(text: &str) -> SoftQuery<f64> {
        let kg = UncertainKG::from_tsv_strs(
            "c\tr1\ta\t0.5\nc1\tr1\ta\t0.5\nc2\tr2\ta\t0.5\nc\tr2\tb\t0.5\n",
            "",
            "",
        )
        .unwrap();
        RawQuery::parse_text(text).unwrap().resolve(&kg).unwrap()
    }

    #[test]
    fn intersection_graph_shape() {
        let q = resolve("(c1, r1, y, 0, 1) & (c2, r2, y, 0, 1)");
        let g = build_query_graph(&q.disjuncts[0]);
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
        let y = g.nodes.iter().position(|&n| n == NodeRole::Free).unwrap();
        assert_eq!(g.neighbors(y).len(), 2);
        assert!(!g.is_leaf(y));
        let d = g.validate();
        assert!(d.acyclic && d.connected && !d.has_self_loop && d.free_present);
    }

    #[test]
    fn multi_edge_collapses_to_one_neighbor() {
        let q = resolve("(c, r1, y, 0, 1) & (c, r2, y, 0, 1)");
        let g = build_query_graph(&q.disjuncts[0]);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 2);
        // parallel edges still count as a single neighbor
        assert!(g.is_leaf(0) && g.is_leaf(1));
        assert!(g.validate().acyclic);
    }

    #[test]
    fn self_loop_is_reported_separately() {
        let q = resolve("EXISTS x1 . (x1, r1, x1, 0, 1) & (x1, r2, y, 0, 1)");
        let g = build_query_graph(&q.disjuncts[0]);
        let d = g.validate();
        assert!(d.has_self_loop);
        assert!(d.acyclic);
    }

    #[test]
    fn triangle_is_cyclic() {
        let q = resolve(
            "EXISTS x1, x2 . (y, r1, x1, 0, 1) & (x1, r1, x2, 0, 1) & (x2, r1, y, 0, 1)",
        );
        let g = build_query_graph(&q.disjuncts[0]);
        let d = g.validate();
        assert!(!d.acyclic);
        assert!(d.connected);
    }

    #[test]
    fn disconnected_component_is_flagged() {
        let q = resolve("EXISTS x1, x2 . (x1, r1, x2, 0, 1) & (c, r1, y, 0, 1)");
        let g = build_query_graph(&q.disjuncts[0]);
        assert!(!g.validate().connected);
    }

    #[test]
    fn edge_count_matches_atom_count() {
        for text in [
            "(c, r1, y, 0, 1)",
            "(c, r1, y, 0, 1) & (c, r2, y, 0.5, 2) & !(c1, r1, y, 0, 1)",
            "EXISTS x1 . (c, r1, x1, 0, 1) & (x1, r2, y, 0, 1)",
        ] {
            let q = resolve(text);
            let g = build_query_graph(&q.disjuncts[0]);
            assert_eq!(g.edges.len(), q.disjuncts[0].atoms.len());
        }
    }
}
