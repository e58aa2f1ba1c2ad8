//! Soft queries: disjunctions of soft conjunctive queries.
//!
//! An atom `(h, r, t, alpha, beta)` (optionally negated) relates two terms
//! through relation `r` with necessity `alpha` and importance `beta`. Each
//! conjunct has exactly one free variable `y` and existentials `x1..xN`;
//! disjunction appears only at the top level, so every query is in DNF by
//! construction and no normalizer exists.
//!
//! Queries have two representations: the name-based [`RawQuery`] (what the
//! text DSL and the canonical JSON form parse into) and the index-based
//! [`SoftQuery`] bound to a KG vocabulary.

mod graph;
mod parse;

pub use graph::{build_query_graph, Diagnostics, GraphEdge, NodeRole, SoftQueryGraph};

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, RelationId, UncertainKG};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QueryError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("invalid variable name `{0}` (existentials are x1..xN)")]
    InvalidVariable(String),
    #[error("alpha out of range: {0}")]
    AlphaRange(f64),
    #[error("beta out of range: {0}")]
    BetaRange(f64),
    #[error("the free variable y does not appear in any atom")]
    FreeVariableMissing,
    #[error("query has no disjuncts")]
    EmptyQuery,
    #[error("disjunct has no atoms")]
    EmptyDisjunct,
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("query is not valid JSON: {0}")]
    Json(String),
}

/// A term of an atom: an entity constant, the free variable, or an
/// existential variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(EntityId),
    Free,
    Exist(u32),
}

impl Term {
    pub fn is_variable(self) -> bool {
        !matches!(self, Term::Const(_))
    }
}

/// A soft atomic formula bound to KG indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftAtom<S> {
    pub head: Term,
    pub relation: RelationId,
    pub tail: Term,
    pub alpha: S,
    pub beta: S,
    pub negated: bool,
}

impl<S: Scalar> SoftAtom<S> {
    /// Validated construction; snaps `beta` onto the importance grid.
    pub fn new(
        head: Term,
        relation: RelationId,
        tail: Term,
        alpha: S,
        beta: S,
        negated: bool,
    ) -> Result<Self, QueryError> {
        if !(S::zero()..=S::one()).contains(&alpha) {
            return Err(QueryError::AlphaRange(alpha.to_f64_lossy()));
        }
        if beta <= S::zero() || !beta.is_finite() {
            return Err(QueryError::BetaRange(beta.to_f64_lossy()));
        }
        Ok(Self {
            head,
            relation,
            tail,
            alpha,
            beta: beta.snap_beta(),
            negated,
        })
    }

    pub fn terms(&self) -> [Term; 2] {
        [self.head, self.tail]
    }
}

/// One conjunct: existential variables plus a multiset of atoms sharing the
/// free variable `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftConjunctiveQuery<S> {
    pub existentials: Vec<u32>,
    pub atoms: Vec<SoftAtom<S>>,
}

impl<S: Scalar> SoftConjunctiveQuery<S> {
    pub fn new(existentials: Vec<u32>, atoms: Vec<SoftAtom<S>>) -> Result<Self, QueryError> {
        if atoms.is_empty() {
            return Err(QueryError::EmptyDisjunct);
        }
        let mut free_seen = false;
        for atom in &atoms {
            for term in atom.terms() {
                match term {
                    Term::Free => free_seen = true,
                    Term::Exist(i) if !existentials.contains(&i) => {
                        return Err(QueryError::UndeclaredVariable(format!("x{i}")));
                    }
                    _ => {}
                }
            }
        }
        if !free_seen {
            return Err(QueryError::FreeVariableMissing);
        }
        Ok(Self {
            existentials,
            atoms,
        })
    }
}

/// A soft query in DNF: a non-empty disjunction of conjuncts.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftQuery<S> {
    pub disjuncts: Vec<SoftConjunctiveQuery<S>>,
}

impl<S: Scalar> SoftQuery<S> {
    pub fn new(disjuncts: Vec<SoftConjunctiveQuery<S>>) -> Result<Self, QueryError> {
        if disjuncts.is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        Ok(Self { disjuncts })
    }

    pub fn single(conjunct: SoftConjunctiveQuery<S>) -> Self {
        Self {
            disjuncts: vec![conjunct],
        }
    }

    /// Apply `f` to every atom's alpha, leaving everything else unchanged.
    pub fn map_alpha(&self, f: impl Fn(S) -> S) -> Self {
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| SoftConjunctiveQuery {
                existentials: d.existentials.clone(),
                atoms: d
                    .atoms
                    .iter()
                    .map(|a| SoftAtom {
                        alpha: f(a.alpha),
                        ..*a
                    })
                    .collect(),
            })
            .collect();
        Self { disjuncts }
    }

    pub fn atom_count(&self) -> usize {
        self.disjuncts.iter().map(|d| d.atoms.len()).sum()
    }

    /// Name-based form for printing and serialization.
    pub fn to_raw(&self, kg: &UncertainKG<S>) -> RawQuery {
        RawQuery {
            disjuncts: self
                .disjuncts
                .iter()
                .map(|d| RawConjunct {
                    existentials: d.existentials.iter().map(|i| format!("x{i}")).collect(),
                    atoms: d
                        .atoms
                        .iter()
                        .map(|a| RawAtom {
                            h: term_name(a.head, kg),
                            r: kg.relation_name(a.relation).to_owned(),
                            t: term_name(a.tail, kg),
                            alpha: a.alpha.to_f64_lossy(),
                            beta: a.beta.to_f64_lossy(),
                            neg: a.negated,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

fn term_name<S: Scalar>(term: Term, kg: &UncertainKG<S>) -> String {
    match term {
        Term::Const(e) => kg.entity_name(e).to_owned(),
        Term::Free => "y".to_owned(),
        Term::Exist(i) => format!("x{i}"),
    }
}

/// Name-based atom as it appears in the canonical JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAtom {
    pub h: String,
    pub r: String,
    pub t: String,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub neg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConjunct {
    #[serde(default)]
    pub existentials: Vec<String>,
    pub atoms: Vec<RawAtom>,
}

/// Name-based query; the common currency of the text DSL, the JSON form,
/// and dataset records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawQuery {
    pub disjuncts: Vec<RawConjunct>,
}

/// Classification of a raw term string under the variable conventions:
/// `y` is free, `x<digits>` is existential, anything else is a constant.
fn classify_term(name: &str) -> RawTerm<'_> {
    if name == "y" {
        return RawTerm::Free;
    }
    if let Some(digits) = name.strip_prefix('x') {
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(i) = digits.parse::<u32>() {
                return RawTerm::Exist(i);
            }
        }
    }
    RawTerm::Const(name)
}

enum RawTerm<'a> {
    Const(&'a str),
    Free,
    Exist(u32),
}

impl RawQuery {
    /// Parse the text DSL. See the crate README for the grammar.
    pub fn parse_text(text: &str) -> Result<Self, QueryError> {
        let raw = parse::parse(text)?;
        raw.validate()?;
        Ok(raw)
    }

    /// Parse the canonical JSON form.
    pub fn parse_json(text: &str) -> Result<Self, QueryError> {
        let raw: RawQuery =
            serde_json::from_str(text).map_err(|e| QueryError::Json(e.to_string()))?;
        raw.validate()?;
        Ok(raw)
    }

    /// Accept either surface form: JSON if the input starts with `{`.
    pub fn parse_any(text: &str) -> Result<Self, QueryError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    /// Canonical text rendering; `parse_text` of the output reproduces the
    /// query.
    pub fn to_text(&self) -> String {
        parse::print(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("raw queries serialize")
    }

    /// Structural validation shared by all surface forms.
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.disjuncts.is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        for disjunct in &self.disjuncts {
            if disjunct.atoms.is_empty() {
                return Err(QueryError::EmptyDisjunct);
            }
            let mut declared = Vec::new();
            for name in &disjunct.existentials {
                match classify_term(name) {
                    RawTerm::Exist(i) => declared.push(i),
                    _ => return Err(QueryError::InvalidVariable(name.clone())),
                }
            }
            let mut free_seen = false;
            for atom in &disjunct.atoms {
                if !(0.0..=1.0).contains(&atom.alpha) {
                    return Err(QueryError::AlphaRange(atom.alpha));
                }
                if atom.beta <= 0.0 || !atom.beta.is_finite() {
                    return Err(QueryError::BetaRange(atom.beta));
                }
                for name in [&atom.h, &atom.t] {
                    match classify_term(name) {
                        RawTerm::Free => free_seen = true,
                        RawTerm::Exist(i) if !declared.contains(&i) => {
                            return Err(QueryError::UndeclaredVariable(name.clone()));
                        }
                        _ => {}
                    }
                }
            }
            if !free_seen {
                return Err(QueryError::FreeVariableMissing);
            }
        }
        Ok(())
    }

    /// Bind names to KG indices.
    pub fn resolve<S: Scalar>(&self, kg: &UncertainKG<S>) -> Result<SoftQuery<S>, QueryError> {
        self.validate()?;
        let mut disjuncts = Vec::with_capacity(self.disjuncts.len());
        for disjunct in &self.disjuncts {
            let existentials = disjunct
                .existentials
                .iter()
                .map(|name| match classify_term(name) {
                    RawTerm::Exist(i) => Ok(i),
                    _ => Err(QueryError::InvalidVariable(name.clone())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut atoms = Vec::with_capacity(disjunct.atoms.len());
            for atom in &disjunct.atoms {
                let resolve_term = |name: &str| -> Result<Term, QueryError> {
                    Ok(match classify_term(name) {
                        RawTerm::Free => Term::Free,
                        RawTerm::Exist(i) => Term::Exist(i),
                        RawTerm::Const(n) => Term::Const(
                            kg.entity_id(n)
                                .map_err(|_| QueryError::UnknownEntity(n.to_owned()))?,
                        ),
                    })
                };
                let relation = kg
                    .relation_id(&atom.r)
                    .map_err(|_| QueryError::UnknownRelation(atom.r.clone()))?;
                atoms.push(SoftAtom::new(
                    resolve_term(&atom.h)?,
                    relation,
                    resolve_term(&atom.t)?,
                    S::from_f64_lossy(atom.alpha),
                    S::from_f64_lossy(atom.beta),
                    atom.neg,
                )?);
            }
            disjuncts.push(SoftConjunctiveQuery::new(existentials, atoms)?);
        }
        SoftQuery::new(disjuncts)
    }
}
