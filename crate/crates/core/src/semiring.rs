//! The tropical (max, +, -inf) semiring and its vector/matrix carriers.
//!
//! `mul` (semiring ⊗) is numeric addition, `add` (semiring ⊕) is max, and
//! the semiring zero is `-inf`: it absorbs under ⊗ and is the identity of ⊕.
//! The ⊗-identity is numeric `0`. `NaN` never enters this algebra: finite
//! values and `-inf` are closed under both operations because `+inf` cannot
//! be produced.
//!
//! [`atom_value`] is the only gate from probability space into semiring
//! space. It snaps the confidence onto a fixed binary grid (see
//! [`crate::scalar::Scalar`]) so that every finite semiring value is an
//! exact multiple of one grid step; sums of such values do not round, which
//! is what makes the engine's answers independent of summation order and
//! bit-identical to the brute-force oracle.
//!
//! Matrices are stored as exceptions over a uniform default value. Positive
//! atoms with `alpha = 0` have default `0`, thresholded positive atoms have
//! default `-inf`, and negated atoms have default `beta` (absent facts
//! satisfy the negation), so both mostly-empty and mostly-full matrices are
//! cheap.

use std::collections::BTreeMap;
use std::io::Write;

use crate::scalar::Scalar;

/// The semiring zero (⊕-identity, ⊗-absorbing): `-inf`.
#[inline]
pub fn zero_bar<S: Scalar>() -> S {
    S::neg_infinity()
}

/// Semiring ⊕: max.
#[inline]
pub fn add<S: Scalar>(a: S, b: S) -> S {
    if a >= b {
        a
    } else {
        b
    }
}

/// Semiring ⊗: numeric addition; `-inf` absorbs.
#[inline]
pub fn mul<S: Scalar>(a: S, b: S) -> S {
    a + b
}

/// Thresholding: `p` if `p >= alpha`, else the semiring zero.
#[inline]
pub fn threshold<S: Scalar>(p: S, alpha: S) -> S {
    if p >= alpha {
        p
    } else {
        zero_bar()
    }
}

/// Value of a soft atom given the raw confidence `p`.
///
/// Positive atoms contribute `beta * [p]_alpha`, negated ones
/// `beta * [1 - p]_alpha`. The confidence is grid-snapped before the
/// threshold test and `beta` is grid-snapped too (a no-op for betas built
/// through [`crate::query::SoftAtom::new`], which already snapped).
#[inline]
pub fn atom_value<S: Scalar>(p: S, alpha: S, beta: S, negated: bool) -> S {
    let q = if negated { S::one() - p } else { p };
    let q = q.snap_confidence();
    if q >= alpha {
        beta.snap_beta() * q
    } else {
        zero_bar()
    }
}

/// Dense per-entity vector of semiring values.
///
/// Used both for the per-variable state vectors maintained during inference
/// and for final utility vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<S> {
    values: Vec<S>,
}

/// Per-entity utility of a query; same carrier as [`StateVector`].
pub type UtilityVector<S> = StateVector<S>;

impl<S: Scalar> StateVector<S> {
    /// All entries at the ⊗-identity (numeric zero). This is the initial
    /// state of every variable: no constraint recorded yet.
    pub fn unit(len: usize) -> Self {
        Self {
            values: vec![S::zero(); len],
        }
    }

    /// All entries at the semiring zero.
    pub fn all_zero_bar(len: usize) -> Self {
        Self {
            values: vec![zero_bar(); len],
        }
    }

    pub fn from_values(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> S {
        self.values[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: S) {
        self.values[i] = v;
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// ⊗-accumulate `v` into entry `i`.
    #[inline]
    pub fn mul_assign_at(&mut self, i: usize, v: S) {
        self.values[i] = mul(self.values[i], v);
    }

    /// ⊗-accumulate a scalar into every entry.
    pub fn mul_assign_scalar(&mut self, v: S) {
        for x in &mut self.values {
            *x = mul(*x, v);
        }
    }

    /// Elementwise ⊕ with another vector.
    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.len(), other.len(), "state vector length mismatch");
        for (x, &y) in self.values.iter_mut().zip(&other.values) {
            *x = add(*x, y);
        }
    }

    /// Number of entries above the semiring zero.
    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v > zero_bar()).count()
    }

    /// ⊕ over all entries (ascending index).
    pub fn fold_add(&self) -> S {
        let mut acc = zero_bar();
        for &v in &self.values {
            acc = add(acc, v);
        }
        acc
    }

    /// Entries below `delta2` (and not already at the semiring zero in
    /// effect) are replaced by the semiring zero; `None` disables pruning.
    pub fn pruned(&self, delta2: Option<S>) -> Self {
        match delta2 {
            None => self.clone(),
            Some(d) => Self {
                values: self
                    .values
                    .iter()
                    .map(|&v| if v < d { zero_bar() } else { v })
                    .collect(),
            },
        }
    }

    /// Largest finite entry strictly below `delta2`, if pruning would drop
    /// anything. Feeds the pruning-deviation sanity bound.
    pub fn max_below(&self, delta2: S) -> Option<S> {
        let mut best: Option<S> = None;
        for &v in &self.values {
            if v > zero_bar() && v < delta2 {
                best = Some(match best {
                    Some(b) => add(b, v),
                    None => v,
                });
            }
        }
        best
    }
}

/// Alias matching the operation vocabulary: prune a state vector.
pub fn prune_state<S: Scalar>(c: &StateVector<S>, delta2: Option<S>) -> StateVector<S> {
    c.pruned(delta2)
}

/// Square matrix stored as exceptions over a uniform default value.
///
/// Exceptions are stored per column, sorted by row, and never equal the
/// default (canonical form). Iteration order is therefore deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultSparseMatrix<S> {
    n: usize,
    default: S,
    cols: Vec<Vec<(u32, S)>>,
}

impl<S: Scalar> DefaultSparseMatrix<S> {
    /// All cells at `default`.
    pub fn uniform(n: usize, default: S) -> Self {
        Self {
            n,
            default,
            cols: vec![Vec::new(); n],
        }
    }

    /// Build from `(row, col, value)` entries. Values equal to the default
    /// are dropped; duplicate cells must agree.
    pub fn from_entries(
        n: usize,
        default: S,
        entries: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Self {
        let mut cols: Vec<BTreeMap<u32, S>> = vec![BTreeMap::new(); n];
        for (r, c, v) in entries {
            assert!(r < n && c < n, "matrix entry out of range");
            if v != default {
                let prev = cols[c].insert(r as u32, v);
                assert!(
                    prev.is_none() || prev == Some(v),
                    "conflicting values for one matrix cell"
                );
            }
        }
        Self {
            n,
            default,
            cols: cols
                .into_iter()
                .map(|m| m.into_iter().collect())
                .collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn default_value(&self) -> S {
        self.default
    }

    /// Stored exceptions of one column, sorted by row.
    pub fn column(&self, c: usize) -> &[(u32, S)] {
        &self.cols[c]
    }

    pub fn stored_len(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        let col = &self.cols[c];
        match col.binary_search_by_key(&(r as u32), |e| e.0) {
            Ok(i) => col[i].1,
            Err(_) => self.default,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.stored_len());
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                entries.push((c, r as usize, v));
            }
        }
        Self::from_entries(self.n, self.default, entries)
    }

    /// Apply `f` to every cell (stored and default) and re-canonicalize.
    pub fn map_values(&self, f: impl Fn(S) -> S) -> Self {
        let new_default = f(self.default);
        let mut out = Self::uniform(self.n, new_default);
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                let w = f(v);
                if w != new_default {
                    out.cols[c].push((r, w));
                }
            }
        }
        out
    }

    /// Cellwise ⊗ of two matrices (multi-edge combination). Defaults
    /// combine too; exceptions live on the union of stored positions.
    pub fn combine_mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matrix shape mismatch");
        let default = mul(self.default, other.default);
        let mut out = Self::uniform(self.n, default);
        for c in 0..self.n {
            let (a, b) = (&self.cols[c], &other.cols[c]);
            let (mut i, mut j) = (0, 0);
            let col = &mut out.cols[c];
            while i < a.len() || j < b.len() {
                let (r, v) = match (a.get(i), b.get(j)) {
                    (Some(&(ra, va)), Some(&(rb, vb))) if ra == rb => {
                        i += 1;
                        j += 1;
                        (ra, mul(va, vb))
                    }
                    (Some(&(ra, va)), Some(&(rb, _))) if ra < rb => {
                        i += 1;
                        (ra, mul(va, other.default))
                    }
                    (Some(_), Some(&(rb, vb))) => {
                        j += 1;
                        (rb, mul(self.default, vb))
                    }
                    (Some(&(ra, va)), None) => {
                        i += 1;
                        (ra, mul(va, other.default))
                    }
                    (None, Some(&(rb, vb))) => {
                        j += 1;
                        (rb, mul(self.default, vb))
                    }
                    (None, None) => unreachable!(),
                };
                if v != default {
                    col.push((r, v));
                }
            }
        }
        out
    }

    /// Materialize row-major dense cells; debugging and reference paths only.
    pub fn densify(&self) -> Vec<S> {
        let mut out = vec![self.default; self.n * self.n];
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                out[r as usize * self.n + c] = v;
            }
        }
        out
    }

    /// Debug dump: `#default=<value>` header then `row<TAB>col<TAB>value`
    /// lines in column-major stored order.
    pub fn dump_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "#default={}", self.default)?;
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                writeln!(w, "{r}\t{c}\t{v}")?;
            }
        }
        Ok(())
    }
}

/// Lazy view of `M +_r b_row +_c b_col`: row-wise and column-wise addition
/// are never materialized as dense matrices, only consumed cellwise or by
/// the join kernel.
#[derive(Clone, Copy)]
pub struct ShiftedMatrix<'a, S> {
    matrix: &'a DefaultSparseMatrix<S>,
    row: Option<&'a StateVector<S>>,
    col: Option<&'a StateVector<S>>,
}

/// `(M +_r b)(s, o) = M(s, o) ⊗ b(s)`.
pub fn row_add<'a, S: Scalar>(
    m: &'a DefaultSparseMatrix<S>,
    b: &'a StateVector<S>,
) -> ShiftedMatrix<'a, S> {
    assert_eq!(m.size(), b.len(), "matrix/vector shape mismatch");
    ShiftedMatrix {
        matrix: m,
        row: Some(b),
        col: None,
    }
}

/// `(M +_c b)(s, o) = M(s, o) ⊗ b(o)`.
pub fn col_add<'a, S: Scalar>(
    m: &'a DefaultSparseMatrix<S>,
    b: &'a StateVector<S>,
) -> ShiftedMatrix<'a, S> {
    assert_eq!(m.size(), b.len(), "matrix/vector shape mismatch");
    ShiftedMatrix {
        matrix: m,
        row: None,
        col: Some(b),
    }
}

impl<'a, S: Scalar> ShiftedMatrix<'a, S> {
    pub fn row_add(mut self, b: &'a StateVector<S>) -> Self {
        assert!(self.row.is_none(), "row shift already applied");
        assert_eq!(self.matrix.size(), b.len(), "matrix/vector shape mismatch");
        self.row = Some(b);
        self
    }

    pub fn col_add(mut self, b: &'a StateVector<S>) -> Self {
        assert!(self.col.is_none(), "column shift already applied");
        assert_eq!(self.matrix.size(), b.len(), "matrix/vector shape mismatch");
        self.col = Some(b);
        self
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        let mut v = self.matrix.get(r, c);
        if let Some(b) = self.row {
            v = mul(v, b.get(r));
        }
        if let Some(b) = self.col {
            v = mul(v, b.get(c));
        }
        v
    }

    /// Per-column ⊕ over all rows: the core of leaf removal.
    pub fn column_max(&self) -> StateVector<S> {
        max_plus_join_with(
            self.row,
            self.matrix,
            self.col,
            JoinStrategy::Auto,
        )
    }
}

/// Join evaluation strategy. `Auto` picks the dense loop for small vocab
/// sizes and the sorted-scan sparse path otherwise; all strategies produce
/// identical bits because max over a fixed value set is order-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JoinStrategy {
    #[default]
    Auto,
    Dense,
    Sparse,
}

const DENSE_JOIN_LIMIT: usize = 1024;

/// `C_v'(o) = C_v(o) ⊗ max_s [C_u(s) ⊗ M(s, o)]`, honoring the matrix
/// default for unstored cells.
pub fn max_plus_join<S: Scalar>(
    c_u: &StateVector<S>,
    m: &DefaultSparseMatrix<S>,
    c_v: &StateVector<S>,
    strategy: JoinStrategy,
) -> StateVector<S> {
    assert_eq!(c_u.len(), m.size(), "join shape mismatch");
    assert_eq!(c_v.len(), m.size(), "join shape mismatch");
    max_plus_join_with(Some(c_u), m, Some(c_v), strategy)
}

fn max_plus_join_with<S: Scalar>(
    c_u: Option<&StateVector<S>>,
    m: &DefaultSparseMatrix<S>,
    c_v: Option<&StateVector<S>>,
    strategy: JoinStrategy,
) -> StateVector<S> {
    let n = m.size();
    let row_val = |s: usize| c_u.map_or(S::zero(), |v| v.get(s));
    let dense = match strategy {
        JoinStrategy::Dense => true,
        JoinStrategy::Sparse => false,
        JoinStrategy::Auto => n <= DENSE_JOIN_LIMIT,
    };

    let mut out = Vec::with_capacity(n);
    if dense {
        for o in 0..n {
            let mut best = zero_bar();
            let col = m.column(o);
            let mut k = 0usize;
            for s in 0..n {
                let cell = if k < col.len() && col[k].0 as usize == s {
                    let v = col[k].1;
                    k += 1;
                    v
                } else {
                    m.default_value()
                };
                best = add(best, mul(row_val(s), cell));
            }
            out.push(best);
        }
    } else {
        // Rows of C_u sorted by value descending (index ascending on ties):
        // the best unstored row for a column is the first sorted row not
        // present in that column's exception list.
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (row_val(a as usize), row_val(b as usize));
            vb.partial_cmp(&va)
                .expect("semiring values are never NaN")
                .then(a.cmp(&b))
        });
        let d = m.default_value();
        for o in 0..n {
            let col = m.column(o);
            let mut best = zero_bar();
            for &(s, v) in col {
                best = add(best, mul(row_val(s as usize), v));
            }
            if d > zero_bar() && col.len() < n {
                for &s in &order {
                    if col.binary_search_by_key(&s, |e| e.0).is_err() {
                        best = add(best, mul(row_val(s as usize), d));
                        break;
                    }
                }
            }
            out.push(best);
        }
    }

    if let Some(cv) = c_v {
        for (o, b) in out.iter_mut().enumerate() {
            *b = mul(cv.get(o), *b);
        }
    }
    StateVector::from_values(out)
}
