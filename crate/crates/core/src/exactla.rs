//! Exact sparse linear algebra: an incrementally maintained echelon basis
//! with optional combination tracking.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::field::Field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinAlgError {
    #[error("coordinate {coord} outside dimension {dim}")]
    DimensionMismatch { coord: usize, dim: usize },
}

/// A sparse vector: strictly increasing coordinates, no stored zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseVector<E> {
    entries: Vec<(usize, E)>,
}

impl<E> Default for SparseVector<E> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<E: Clone> SparseVector<E> {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Sorts, merges repeated coordinates and drops zeros.
    pub fn from_entries<F: Field<Elem = E>>(field: &F, mut entries: Vec<(usize, E)>) -> Self {
        entries.sort_unstable_by_key(|(c, _)| *c);
        let mut out: Vec<(usize, E)> = Vec::with_capacity(entries.len());
        for (c, v) in entries {
            match out.last_mut() {
                Some((lc, lv)) if *lc == c => field.add_assign(lv, &v),
                _ => {
                    if let Some((_, lv)) = out.last() {
                        if field.is_zero(lv) {
                            out.pop();
                        }
                    }
                    out.push((c, v));
                }
            }
        }
        if let Some((_, lv)) = out.last() {
            if field.is_zero(lv) {
                out.pop();
            }
        }
        Self { entries: out }
    }

    pub fn unit<F: Field<Elem = E>>(field: &F, coord: usize) -> Self {
        Self { entries: vec![(coord, field.one())] }
    }

    pub fn entries(&self) -> &[(usize, E)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(usize, E)> {
        self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, coord: usize) -> Option<&E> {
        self.entries
            .binary_search_by_key(&coord, |(c, _)| *c)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn leading(&self) -> Option<&(usize, E)> {
        self.entries.first()
    }

    pub fn scale<F: Field<Elem = E>>(&self, field: &F, c: &E) -> Self {
        if field.is_zero(c) {
            return Self::zero();
        }
        Self { entries: self.entries.iter().map(|(i, v)| (*i, field.mul(c, v))).collect() }
    }

    /// `sum_i c_i * v_i`
    pub fn linear_combination<'a, F: Field<Elem = E>>(
        field: &F,
        terms: impl IntoIterator<Item = (&'a E, &'a SparseVector<E>)>,
    ) -> Self
    where
        E: 'a,
    {
        let mut all = Vec::new();
        for (c, v) in terms {
            if field.is_zero(c) {
                continue;
            }
            all.extend(v.entries.iter().map(|(i, x)| (*i, field.mul(c, x))));
        }
        Self::from_entries(field, all)
    }

    /// `self + c * other`
    pub fn add_scaled<F: Field<Elem = E>>(&self, field: &F, c: &E, other: &Self) -> Self {
        if field.is_zero(c) {
            return self.clone();
        }
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
            let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
            if take_a {
                out.push(a[i].clone());
                i += 1;
            } else if take_b {
                out.push((b[j].0, field.mul(c, &b[j].1)));
                j += 1;
            } else {
                let mut v = a[i].1.clone();
                field.add_mul_assign(&mut v, c, &b[j].1);
                if !field.is_zero(&v) {
                    out.push((a[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        Self { entries: out }
    }

    pub fn max_coord(&self) -> Option<usize> {
        self.entries.last().map(|(c, _)| *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Absorbed,
    Extended { pivot: usize },
}

/// Result of a membership query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Membership<E> {
    /// `v = sum c_i * row_i`; `rows` lists `(row index, c_i)` and `tags` the
    /// same combination expressed over the tags of inserted vectors (empty
    /// when tracking is off).
    Combination { rows: Vec<(usize, E)>, tags: SparseVector<E> },
    /// The nonzero remainder of `v` after reduction by the basis.
    Residue(SparseVector<E>),
}

/// A remainder and the `(row, coefficient)` pairs subtracted to reach it.
type Reduction<E> = (SparseVector<E>, Vec<(usize, E)>);

#[derive(Debug, Clone)]
struct Row<E> {
    vector: SparseVector<E>,
    /// This row as a combination of tagged input vectors.
    combo: SparseVector<E>,
}

impl<E: Clone> Row<E> {
    fn pivot(&self) -> usize {
        self.vector.entries[0].0
    }
}

const DENSE_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone)]
enum PivotIndex {
    Dense(Vec<u32>),
    Sparse(HashMap<usize, u32>),
}

impl PivotIndex {
    fn new(dim: usize) -> Self {
        if dim <= DENSE_LIMIT {
            PivotIndex::Dense(vec![u32::MAX; dim])
        } else {
            PivotIndex::Sparse(HashMap::new())
        }
    }

    fn get(&self, coord: usize) -> Option<usize> {
        match self {
            PivotIndex::Dense(v) => match v[coord] {
                u32::MAX => None,
                r => Some(r as usize),
            },
            PivotIndex::Sparse(m) => m.get(&coord).map(|r| *r as usize),
        }
    }

    fn set(&mut self, coord: usize, row: usize) {
        match self {
            PivotIndex::Dense(v) => v[coord] = row as u32,
            PivotIndex::Sparse(m) => {
                m.insert(coord, row as u32);
            }
        }
    }
}

/// Scratch space for reducing one vector.
enum Accumulator<E> {
    Dense { values: Vec<Option<E>>, touched: Vec<usize> },
    Sparse(HashMap<usize, E>),
}

impl<E: Clone> Accumulator<E> {
    fn new(dim: usize) -> Self {
        if dim <= DENSE_LIMIT {
            Accumulator::Dense { values: vec![None; dim], touched: Vec::new() }
        } else {
            Accumulator::Sparse(HashMap::new())
        }
    }

    fn get(&self, c: usize) -> Option<&E> {
        match self {
            Accumulator::Dense { values, .. } => values[c].as_ref(),
            Accumulator::Sparse(m) => m.get(&c),
        }
    }

    fn add<F: Field<Elem = E>>(&mut self, field: &F, c: usize, x: E) {
        match self {
            Accumulator::Dense { values, touched } => match &mut values[c] {
                Some(v) => field.add_assign(v, &x),
                slot => {
                    *slot = Some(x);
                    touched.push(c);
                }
            },
            Accumulator::Sparse(m) => match m.entry(c) {
                std::collections::hash_map::Entry::Occupied(mut e) => field.add_assign(e.get_mut(), &x),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(x);
                }
            },
        }
    }

    fn into_sparse<F: Field<Elem = E>>(self, field: &F) -> SparseVector<E> {
        let mut entries: Vec<(usize, E)> = match self {
            Accumulator::Dense { mut values, touched } => touched
                .into_iter()
                .filter_map(|c| values[c].take().map(|v| (c, v)))
                .collect(),
            Accumulator::Sparse(m) => m.into_iter().collect(),
        };
        entries.retain(|(_, v)| !field.is_zero(v));
        entries.sort_unstable_by_key(|(c, _)| *c);
        SparseVector { entries }
    }
}

/// Echelon basis of a subspace of `F^dim`.
///
/// Every row has its pivot entry equal to 1 and distinct rows have distinct
/// pivots; a row has no entries left of its pivot. Rows are stored in
/// insertion order. By default the basis is kept fully reduced: no row has
/// an entry in another row's pivot column. A basis built with
/// [`EchelonBasis::semi_reduced`] skips that back substitution, which is
/// cheaper when the ambient dimension is large;
/// [`EchelonBasis::to_reduced`] recovers the reduced form.
#[derive(Debug, Clone)]
pub struct EchelonBasis<F: Field> {
    field: F,
    dim: usize,
    rows: Vec<Row<F::Elem>>,
    pivots: PivotIndex,
    tracking: bool,
    reduced: bool,
}

impl<F: Field> EchelonBasis<F> {
    pub fn new(field: F, dim: usize) -> Self {
        Self { field, dim, rows: Vec::new(), pivots: PivotIndex::new(dim), tracking: false, reduced: true }
    }

    /// Stops maintaining full reduction on insert.
    ///
    /// # Panics
    /// If the basis is not empty.
    pub fn semi_reduced(self) -> Self {
        assert!(self.rows.is_empty(), "mode can only change on an empty basis");
        Self { reduced: false, ..self }
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    /// A basis that records, for each row, the combination of tagged inputs
    /// that produced it.
    pub fn with_tracking(field: F, dim: usize) -> Self {
        Self { tracking: true, ..Self::new(field, dim) }
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.dim
    }

    pub fn is_tracking(&self) -> bool {
        self.tracking
    }

    /// Rows in insertion order.
    pub fn rows(&self) -> impl ExactSizeIterator<Item = &SparseVector<F::Elem>> {
        self.rows.iter().map(|r| &r.vector)
    }

    pub fn row(&self, i: usize) -> &SparseVector<F::Elem> {
        &self.rows[i].vector
    }

    /// Combination of tags producing row `i` (empty without tracking).
    pub fn row_combination(&self, i: usize) -> &SparseVector<F::Elem> {
        &self.rows[i].combo
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(Row::pivot)
    }

    fn check(&self, v: &SparseVector<F::Elem>) -> Result<(), LinAlgError> {
        match v.max_coord() {
            Some(c) if c >= self.dim => Err(LinAlgError::DimensionMismatch { coord: c, dim: self.dim }),
            _ => Ok(()),
        }
    }

    /// Reduces `v`, returning the residue (zero at every pivot) and the
    /// coefficients `(row, c)` with `v = residue + sum c * row`.
    fn reduce_tracked(&self, v: &SparseVector<F::Elem>) -> Reduction<F::Elem> {
        let f = &self.field;
        if self.reduced {
            let coeffs: Vec<(usize, F::Elem)> = v
                .entries
                .iter()
                .filter_map(|(c, x)| self.pivots.get(*c).map(|r| (r, x.clone())))
                .collect();
            if coeffs.is_empty() {
                return (v.clone(), coeffs);
            }
            let mut acc = Accumulator::new(self.dim);
            for (c, x) in &v.entries {
                acc.add(f, *c, x.clone());
            }
            for (r, x) in &coeffs {
                let m = f.neg(x);
                for (c, y) in &self.rows[*r].vector.entries {
                    acc.add(f, *c, f.mul(&m, y));
                }
            }
            return (acc.into_sparse(f), coeffs);
        }
        let mut acc = Accumulator::new(self.dim);
        let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
        for (c, x) in &v.entries {
            if self.pivots.get(*c).is_some() {
                heap.push(Reverse(*c));
            }
            acc.add(f, *c, x.clone());
        }
        let mut coeffs = Vec::new();
        while let Some(Reverse(c)) = heap.pop() {
            while heap.peek() == Some(&Reverse(c)) {
                heap.pop();
            }
            let Some(x) = acc.get(c).cloned() else { continue };
            if f.is_zero(&x) {
                continue;
            }
            let r = self.pivots.get(c).expect("only pivot columns are queued");
            let m = f.neg(&x);
            for (c2, y) in &self.rows[r].vector.entries {
                if *c2 != c && self.pivots.get(*c2).is_some() {
                    heap.push(Reverse(*c2));
                }
                acc.add(f, *c2, f.mul(&m, y));
            }
            coeffs.push((r, x));
        }
        (acc.into_sparse(f), coeffs)
    }

    fn tag_combination(&self, coeffs: &[(usize, F::Elem)]) -> SparseVector<F::Elem> {
        if !self.tracking {
            return SparseVector::zero();
        }
        SparseVector::linear_combination(
            &self.field,
            coeffs.iter().map(|(i, c)| (c, &self.rows[*i].combo)),
        )
    }

    /// Inserts an untagged vector.
    pub fn insert(&mut self, v: &SparseVector<F::Elem>) -> Result<InsertOutcome, LinAlgError> {
        self.insert_tagged(v, usize::MAX)
    }

    /// Inserts `v`, remembering it under `tag` when tracking is on.
    pub fn insert_tagged(
        &mut self,
        v: &SparseVector<F::Elem>,
        tag: usize,
    ) -> Result<InsertOutcome, LinAlgError> {
        self.check(v)?;
        let (residue, coeffs) = self.reduce_tracked(v);
        let Some((pivot, lead)) = residue.leading().cloned() else {
            return Ok(InsertOutcome::Absorbed);
        };
        let f = self.field.clone();
        let inv = f.inv(&lead).expect("leading entry is nonzero");
        let vector = residue.scale(&f, &inv);
        let combo = if self.tracking {
            // residue = v - sum c_i row_i
            let tag_part = SparseVector::from_entries(&f, vec![(tag, f.one())]);
            let used = self.tag_combination(&coeffs);
            tag_part.add_scaled(&f, &f.neg(&f.one()), &used).scale(&f, &inv)
        } else {
            SparseVector::zero()
        };
        if self.reduced {
            for row in &mut self.rows {
                if let Some(y) = row.vector.get(pivot).cloned() {
                    let m = f.neg(&y);
                    row.vector = row.vector.add_scaled(&f, &m, &vector);
                    if self.tracking {
                        row.combo = row.combo.add_scaled(&f, &m, &combo);
                    }
                }
            }
        }
        self.pivots.set(pivot, self.rows.len());
        self.rows.push(Row { vector, combo });
        Ok(InsertOutcome::Extended { pivot })
    }

    /// Decides whether `v` lies in the span, returning the combination or the
    /// reduced remainder.
    pub fn membership(&self, v: &SparseVector<F::Elem>) -> Result<Membership<F::Elem>, LinAlgError> {
        self.check(v)?;
        let (residue, coeffs) = self.reduce_tracked(v);
        if !residue.is_zero() {
            return Ok(Membership::Residue(residue));
        }
        let tags = self.tag_combination(&coeffs);
        Ok(Membership::Combination { rows: coeffs, tags })
    }

    /// Reduces `v` against the basis.
    pub fn reduce(&self, v: &SparseVector<F::Elem>) -> Result<SparseVector<F::Elem>, LinAlgError> {
        self.check(v)?;
        Ok(self.reduce_tracked(v).0)
    }

    /// The same span in reduced row echelon form, rows sorted by pivot.
    pub fn to_reduced(&self) -> Self {
        let f = &self.field;
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.rows[i].pivot()));
        if self.reduced {
            let mut out = Self { rows: Vec::new(), pivots: PivotIndex::new(self.dim), ..self.clone() };
            for (k, i) in order.into_iter().rev().enumerate() {
                out.pivots.set(self.rows[i].pivot(), k);
                out.rows.push(self.rows[i].clone());
            }
            return out;
        }
        // back substitution from the largest pivot down
        let mut out = Self { rows: Vec::new(), pivots: PivotIndex::new(self.dim), ..self.clone() };
        for i in order {
            let row = &self.rows[i];
            let (residue, coeffs) = out.reduce_tail(&row.vector, row.pivot());
            let combo = if self.tracking {
                let mut c = row.combo.clone();
                for (r, x) in &coeffs {
                    c = c.add_scaled(f, &f.neg(x), &out.rows[*r].combo);
                }
                c
            } else {
                SparseVector::zero()
            };
            out.pivots.set(row.pivot(), out.rows.len());
            out.rows.push(Row { vector: residue, combo });
        }
        out.rows.reverse();
        let n = out.rows.len();
        out.pivots = PivotIndex::new(self.dim);
        for (i, r) in out.rows.iter().enumerate() {
            out.pivots.set(r.pivot(), i);
        }
        debug_assert_eq!(n, self.rows.len());
        out.reduced = true;
        out
    }

    /// Clears every pivot column of `v` other than `keep`, using rows that
    /// are already fully reduced.
    fn reduce_tail(&self, v: &SparseVector<F::Elem>, keep: usize) -> Reduction<F::Elem> {
        let f = &self.field;
        let coeffs: Vec<(usize, F::Elem)> = v
            .entries
            .iter()
            .filter(|(c, _)| *c != keep)
            .filter_map(|(c, x)| self.pivots.get(*c).map(|r| (r, x.clone())))
            .collect();
        let neg: Vec<F::Elem> = coeffs.iter().map(|(_, x)| f.neg(x)).collect();
        let one = f.one();
        let residue = SparseVector::linear_combination(
            f,
            std::iter::once((&one, v)).chain(coeffs.iter().zip(&neg).map(|((r, _), x)| (x, &self.rows[*r].vector))),
        );
        (residue, coeffs)
    }
}

/// Rank of a list of vectors.
pub fn rank<F: Field>(field: &F, dim: usize, vectors: &[SparseVector<F::Elem>]) -> Result<usize, LinAlgError> {
    let mut basis = EchelonBasis::new(field.clone(), dim);
    for v in vectors {
        basis.insert(v)?;
        if basis.is_full() {
            break;
        }
    }
    Ok(basis.rank())
}
