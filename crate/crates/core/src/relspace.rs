//! Trace vectors in the canonical class basis, the relation space spanned by
//! the reduced path sums, and decomposability decisions with certificates.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::exactla::{EchelonBasis, InsertOutcome, LinAlgError, Membership, SparseVector};
use crate::field::Field;
use crate::sigma::{enumerate_triples_with, sigma_lin, MultilinearTriple, RawTraceSum, TripleFilter};
use crate::words::{enumerate_basis, CanonicalTraceWord, Letter, Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("expected degree {expected}, found a term of degree {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

/// The sorted canonical classes of degree `d`; a class's position is its
/// coordinate.
#[derive(Debug, Clone)]
pub struct ClassIndex {
    d: usize,
    classes: Vec<CanonicalTraceWord>,
}

impl ClassIndex {
    pub fn new(d: usize) -> Self {
        Self { d, classes: enumerate_basis(d) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn coord(&self, class: &CanonicalTraceWord) -> Option<usize> {
        self.classes.binary_search(class).ok()
    }

    pub fn class(&self, coord: usize) -> &CanonicalTraceWord {
        &self.classes[coord]
    }

    pub fn classes(&self) -> &[CanonicalTraceWord] {
        &self.classes
    }
}

/// A linear combination of canonical trace classes of a fixed degree.
#[derive(Debug, Clone)]
pub struct TraceVector<F: Field> {
    field: F,
    d: usize,
    entries: BTreeMap<CanonicalTraceWord, F::Elem>,
}

impl<F: Field> TraceVector<F> {
    pub fn zero(field: F, d: usize) -> Self {
        Self { field, d, entries: BTreeMap::new() }
    }

    /// `tr(x1 x2 ... xd)`
    pub fn identity(field: F, d: usize) -> Self {
        let mut v = Self::zero(field, d);
        let one = v.field.one();
        v.add_word(&Word::identity(d), &one).expect("identity word is multilinear");
        v
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &BTreeMap<CanonicalTraceWord, F::Elem> {
        &self.entries
    }

    pub fn get(&self, class: &CanonicalTraceWord) -> Option<&F::Elem> {
        self.entries.get(class)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `c * tr(w)` for a word multilinear in `d`.
    pub fn add_word(&mut self, w: &Word, c: &F::Elem) -> Result<(), RelationError> {
        if w.len() != self.d {
            return Err(RelationError::DegreeMismatch { expected: self.d, found: w.len() });
        }
        let class = crate::words::canonical_class(w, self.d)?;
        self.add_class(class, c);
        Ok(())
    }

    pub fn add_class(&mut self, class: CanonicalTraceWord, c: &F::Elem) {
        if self.field.is_zero(c) {
            return;
        }
        let f = &self.field;
        match self.entries.entry(class) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = f.add(e.get(), c);
                if f.is_zero(&s) {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: &F::Elem, other: &Self) -> Result<Self, RelationError> {
        if other.d != self.d {
            return Err(RelationError::DegreeMismatch { expected: self.d, found: other.d });
        }
        let mut out = self.clone();
        for (class, x) in &other.entries {
            out.add_class(class.clone(), &self.field.mul(c, x));
        }
        Ok(out)
    }

    pub fn scale(&self, c: &F::Elem) -> Self {
        let mut out = Self::zero(self.field.clone(), self.d);
        for (class, x) in &self.entries {
            out.add_class(class.clone(), &self.field.mul(c, x));
        }
        out
    }

    /// Sum of all coefficients. Rotation and involution relations have
    /// coefficient sum zero, so this is well defined on classes.
    pub fn sum_of_coefficients(&self) -> F::Elem {
        let mut s = self.field.zero();
        for x in self.entries.values() {
            self.field.add_assign(&mut s, x);
        }
        s
    }

    /// The functional valuing a class at 1 when all of its letters carry the
    /// same decoration and at 0 otherwise.
    pub fn gamma(&self) -> F::Elem {
        let mut s = self.field.zero();
        for (class, x) in &self.entries {
            if class.is_uniformly_decorated() {
                self.field.add_assign(&mut s, x);
            }
        }
        s
    }

    /// Toggles the decoration of the letters in `mask` in every class.
    pub fn flip(&self, mask: u64) -> Self {
        let mut out = Self::zero(self.field.clone(), self.d);
        for (class, x) in &self.entries {
            out.add_class(class.flip(mask), x);
        }
        out
    }

    /// Substitutes `x_k -> x_k + sign * x_k^T` for every `k`, i.e. sums
    /// `sign^(#flipped) * flip(mask)` over all `2^d` masks.
    pub fn substitute_pm(&self, sign: i8) -> Self {
        let f = &self.field;
        let mut out = Self::zero(f.clone(), self.d);
        for mask in 0u64..1 << self.d {
            let negative = sign < 0 && mask.count_ones() % 2 == 1;
            for (class, x) in &self.entries {
                let c = if negative { f.neg(x) } else { x.clone() };
                out.add_class(class.flip(mask), &c);
            }
        }
        out
    }

    pub fn to_sparse(&self, index: &ClassIndex) -> SparseVector<F::Elem> {
        let entries = self
            .entries
            .iter()
            .map(|(class, x)| (index.coord(class).expect("class belongs to the index"), x.clone()))
            .collect();
        SparseVector::from_entries(&self.field, entries)
    }

    pub fn from_sparse(field: F, index: &ClassIndex, v: &SparseVector<F::Elem>) -> Self {
        let mut out = Self::zero(field, index.d());
        for (c, x) in v.entries() {
            out.add_class(index.class(*c).clone(), x);
        }
        out
    }
}

impl<F: Field> PartialEq for TraceVector<F> {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.entries == other.entries
    }
}

impl<F: Field> Eq for TraceVector<F> {}

impl<F: Field> fmt::Display for TraceVector<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("0");
        }
        for (i, (class, x)) in self.entries.iter().enumerate() {
            let s = self.field.render(x);
            let (neg, mag) = match s.strip_prefix('-') {
                Some(m) => (true, m.to_string()),
                None => (false, s),
            };
            match (i, neg) {
                (0, false) => write!(f, "{mag}*tr({class})")?,
                (0, true) => write!(f, "-{mag}*tr({class})")?,
                (_, false) => write!(f, " + {mag}*tr({class})")?,
                (_, true) => write!(f, " - {mag}*tr({class})")?,
            }
        }
        Ok(())
    }
}

/// Maps every raw term to its canonical class and sums in the field.
pub fn reduce<F: Field>(field: &F, d: usize, raw: &RawTraceSum) -> Result<TraceVector<F>, RelationError> {
    let mut out = TraceVector::zero(field.clone(), d);
    for (c, w) in &raw.terms {
        out.add_word(w, &field.from_i64(*c))?;
    }
    Ok(out)
}

/// `sum over decorations delta of sign^(#T in delta) tr(x1^delta1 ... xd^deltad)`,
/// the multilinear image of `tr((X1 + sign X1^T) ... (Xd + sign Xd^T))`.
pub fn expand_pm<F: Field>(field: &F, d: usize, sign: i8) -> TraceVector<F> {
    TraceVector::identity(field.clone(), d).substitute_pm(sign)
}

/// Number of raw terms of [`expand_pm`] before reduction.
pub fn expand_pm_term_count(d: usize) -> usize {
    1 << d
}

/// `tr(x1^delta1 ... xd^deltad)` for a decoration mask.
pub fn decorated_identity(d: usize, mask: u64) -> Word {
    Word::new(
        (1..=d as u16)
            .map(|k| Letter { index: k, starred: mask >> (k - 1) & 1 == 1 })
            .collect(),
    )
    .expect("d >= 1")
}

pub fn sum_of_coefficients<F: Field>(f: &TraceVector<F>) -> F::Elem {
    f.sum_of_coefficients()
}

pub fn gamma<F: Field>(f: &TraceVector<F>) -> F::Elem {
    f.gamma()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationOptions {
    /// Restrict generators to undecorated triples.
    pub plain_triples_only: bool,
    /// Record generator combinations for certificates.
    pub track_certificates: bool,
    /// Triples reduced per parallel batch.
    pub batch_size: usize,
}

impl Default for RelationOptions {
    fn default() -> Self {
        Self { plain_triples_only: false, track_certificates: true, batch_size: 2048 }
    }
}

/// A generator that extended the relation basis.
#[derive(Debug, Clone)]
pub struct GeneratorRecord<F: Field> {
    pub triple: MultilinearTriple,
    pub reduced: TraceVector<F>,
}

/// The span of the reduced type-(c) generators for `(n, d)` in the class
/// basis of degree `d`.
#[derive(Debug, Clone)]
pub struct RelationSpace<F: Field> {
    n: usize,
    d: usize,
    field: F,
    classes: ClassIndex,
    basis: EchelonBasis<F>,
    generators: Vec<GeneratorRecord<F>>,
    triples_consumed: usize,
    options: RelationOptions,
}

/// Reduced generator of a triple in class coordinates.
pub fn reduced_generator<F: Field>(field: &F, triple: &MultilinearTriple) -> TraceVector<F> {
    reduce(field, triple.degree(), &sigma_lin(triple)).expect("generators are multilinear")
}

/// Builds the relation space for `n x n` matrices in degree `d`. Stops early
/// once the span is the whole class space.
pub fn relation_span<F: Field>(field: &F, n: usize, d: usize, options: RelationOptions) -> RelationSpace<F> {
    let classes = ClassIndex::new(d);
    let basis = if options.track_certificates {
        EchelonBasis::with_tracking(field.clone(), classes.len())
    } else {
        EchelonBasis::new(field.clone(), classes.len())
    };
    let mut space = RelationSpace {
        n,
        d,
        field: field.clone(),
        classes,
        basis,
        generators: Vec::new(),
        triples_consumed: 0,
        options,
    };
    let filter = TripleFilter { plain_only: options.plain_triples_only, sorted_labels: false };
    let mut stream = enumerate_triples_with(n, d, filter).peekable();
    let batch_size = options.batch_size.max(1);
    while stream.peek().is_some() && !space.is_saturated() {
        let batch: Vec<MultilinearTriple> = stream.by_ref().take(batch_size).collect();
        let reduced: Vec<SparseVector<F::Elem>> = batch
            .par_iter()
            .map(|t| reduced_generator(field, t).to_sparse(&space.classes))
            .collect();
        for (triple, v) in batch.into_iter().zip(reduced) {
            space.triples_consumed += 1;
            space.absorb(triple, v);
            if space.is_saturated() {
                break;
            }
        }
    }
    space
}

impl<F: Field> RelationSpace<F> {
    fn absorb(&mut self, triple: MultilinearTriple, v: SparseVector<F::Elem>) {
        let tag = self.generators.len();
        let outcome = self.basis.insert_tagged(&v, tag).expect("coordinates are class indices");
        if let InsertOutcome::Extended { .. } = outcome {
            if self.options.track_certificates {
                let reduced = TraceVector::from_sparse(self.field.clone(), &self.classes, &v);
                self.generators.push(GeneratorRecord { triple, reduced });
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn classes(&self) -> &ClassIndex {
        &self.classes
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn basis_size(&self) -> usize {
        self.classes.len()
    }

    /// `|classes| - rank`: the dimension of the space of indecomposable
    /// multilinear invariants of degree `d`.
    pub fn quotient_dim(&self) -> usize {
        self.basis_size() - self.rank()
    }

    pub fn is_saturated(&self) -> bool {
        self.basis.is_full()
    }

    pub fn triples_consumed(&self) -> usize {
        self.triples_consumed
    }

    pub fn generators(&self) -> &[GeneratorRecord<F>] {
        &self.generators
    }

    pub fn options(&self) -> RelationOptions {
        self.options
    }

    pub fn echelon(&self) -> &EchelonBasis<F> {
        &self.basis
    }

    /// Reduced echelon rows as trace vectors, in pivot order.
    pub fn rows(&self) -> Vec<TraceVector<F>> {
        self.basis
            .to_reduced()
            .rows()
            .map(|r| TraceVector::from_sparse(self.field.clone(), &self.classes, r))
            .collect()
    }

    /// Decides whether `target` lies in the relation space.
    pub fn decide(&self, target: &TraceVector<F>) -> Result<Decision<F>, RelationError> {
        if target.d() != self.d {
            return Err(RelationError::DegreeMismatch { expected: self.d, found: target.d() });
        }
        let v = target.to_sparse(&self.classes);
        match self.basis.membership(&v)? {
            Membership::Combination { tags, .. } => {
                let terms = tags
                    .entries()
                    .iter()
                    .map(|(tag, c)| CertificateTerm {
                        coefficient: c.clone(),
                        triple: self.generators[*tag].triple.clone(),
                    })
                    .collect();
                Ok(Decision::Decomposable { terms })
            }
            Membership::Residue(r) => Ok(Decision::Indecomposable {
                residue: TraceVector::from_sparse(self.field.clone(), &self.classes, &r),
                coefficient_sum: target.sum_of_coefficients(),
                gamma: target.gamma(),
            }),
        }
    }

    /// Checks a decision against this space: a combination must replay to
    /// the target, and a residue must extend the basis.
    pub fn verify(&self, target: &TraceVector<F>, decision: &Decision<F>) -> bool {
        match decision {
            Decision::Decomposable { terms } => {
                if terms.iter().any(|t| !self.admits(&t.triple)) {
                    return false;
                }
                replay(&self.field, self.d, terms) == *target
            }
            Decision::Indecomposable { residue, .. } => {
                let Ok(diff) = target.add_scaled(&self.field.neg(&self.field.one()), residue) else {
                    return false;
                };
                let mut extended = self.basis.clone();
                let in_span = matches!(
                    self.basis.membership(&diff.to_sparse(&self.classes)),
                    Ok(Membership::Combination { .. })
                );
                in_span
                    && matches!(
                        extended.insert(&residue.to_sparse(&self.classes)),
                        Ok(InsertOutcome::Extended { .. })
                    )
            }
        }
    }

    /// Whether the triple is one of this space's generators.
    pub fn admits(&self, triple: &MultilinearTriple) -> bool {
        triple.degree() == self.d
            && triple.t() + 2 * triple.r() > self.n
            && (!self.options.plain_triples_only || triple.is_plain())
    }
}

#[derive(Debug, Clone)]
pub struct CertificateTerm<F: Field> {
    pub coefficient: F::Elem,
    pub triple: MultilinearTriple,
}

#[derive(Debug, Clone)]
pub enum Decision<F: Field> {
    /// The target equals `sum coefficient * reduce(sigma_lin(triple))`.
    Decomposable { terms: Vec<CertificateTerm<F>> },
    /// The target is not in the span; `residue` is its reduction by the
    /// echelon basis. The functional values of the target ride along.
    Indecomposable { residue: TraceVector<F>, coefficient_sum: F::Elem, gamma: F::Elem },
}

impl<F: Field> Decision<F> {
    pub fn is_decomposable(&self) -> bool {
        matches!(self, Decision::Decomposable { .. })
    }
}

/// Expands a generator combination back into a trace vector.
pub fn replay<F: Field>(field: &F, d: usize, terms: &[CertificateTerm<F>]) -> TraceVector<F> {
    let mut acc = TraceVector::zero(field.clone(), d);
    for t in terms {
        let g = reduced_generator(field, &t.triple);
        acc = acc.add_scaled(&t.coefficient, &g).expect("generator degree matches");
    }
    acc
}

/// Functional values over a stream of generators.
#[derive(Debug, Clone)]
pub struct SweepReport<F: Field> {
    pub n: usize,
    pub d: usize,
    pub generators: usize,
    pub nonzero_sums: usize,
    pub nonzero_gammas: usize,
    /// First generator with a nonzero coefficient sum, with that sum.
    pub first_nonzero_sum: Option<(MultilinearTriple, F::Elem)>,
    pub first_nonzero_gamma: Option<(MultilinearTriple, F::Elem)>,
}

/// Evaluates the coefficient sum and the uniform-decoration functional on
/// every generator produced by the filter.
pub fn functional_sweep<F: Field>(field: &F, n: usize, d: usize, filter: TripleFilter) -> SweepReport<F> {
    let mut report = SweepReport {
        n,
        d,
        generators: 0,
        nonzero_sums: 0,
        nonzero_gammas: 0,
        first_nonzero_sum: None,
        first_nonzero_gamma: None,
    };
    let mut stream = enumerate_triples_with(n, d, filter).peekable();
    while stream.peek().is_some() {
        let batch: Vec<MultilinearTriple> = stream.by_ref().take(4096).collect();
        let values: Vec<(F::Elem, F::Elem)> = batch
            .par_iter()
            .map(|t| {
                let g = reduced_generator(field, t);
                (g.sum_of_coefficients(), g.gamma())
            })
            .collect();
        for (triple, (sum, gam)) in batch.into_iter().zip(values) {
            report.generators += 1;
            if !field.is_zero(&sum) {
                report.nonzero_sums += 1;
                if report.first_nonzero_sum.is_none() {
                    report.first_nonzero_sum = Some((triple.clone(), sum));
                }
            }
            if !field.is_zero(&gam) {
                report.nonzero_gammas += 1;
                if report.first_nonzero_gamma.is_none() {
                    report.first_nonzero_gamma = Some((triple, gam));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};

    fn word(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn raw(terms: &[(i64, &str)]) -> RawTraceSum {
        RawTraceSum { terms: terms.iter().map(|(c, w)| (*c, word(w))).collect() }
    }

    #[test]
    fn reduce_examples() {
        let q = Rationals;
        assert!(reduce(&q, 2, &raw(&[(1, "x1 x2"), (-1, "x2 x1")])).unwrap().is_zero());
        let v = reduce(&q, 2, &raw(&[(1, "x1 x2'"), (1, "x2 x1'")])).unwrap();
        assert_eq!(v.to_string(), "2*tr(x1 x2')");
        let f3 = PrimeField::new(3).unwrap();
        assert!(reduce(&f3, 2, &raw(&[(3, "x1 x2")])).unwrap().is_zero());
        assert_eq!(
            reduce(&q, 2, &raw(&[(1, "x1 x2"), (1, "x1")])),
            Err(RelationError::DegreeMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn functional_examples() {
        let q = Rationals;
        assert_eq!(TraceVector::identity(q, 5).sum_of_coefficients(), q.one());
        let g = reduced_generator(&q, &MultilinearTriple::plain_letters(3, 0));
        assert_eq!(g.sum_of_coefficients(), q.from_i64(-2));
        let g = reduced_generator(&q, &MultilinearTriple::plain_letters(1, 1));
        assert_eq!(g.sum_of_coefficients(), q.zero());
        assert_eq!(g.gamma(), q.from_i64(-1));
        let uniform = reduce(&q, 2, &raw(&[(1, "x1' x2'")])).unwrap();
        assert_eq!(uniform.gamma(), q.one());
        let mixed = reduce(&q, 2, &raw(&[(1, "x1 x2'")])).unwrap();
        assert_eq!(mixed.gamma(), q.zero());
    }

    #[test]
    fn expansion_examples() {
        let q = Rationals;
        assert!(expand_pm(&q, 1, -1).is_zero());
        for d in 1..=6 {
            assert_eq!(expand_pm(&q, d, 1).sum_of_coefficients(), q.from_i64(1 << d));
            let expected = if d % 2 == 0 { 2 } else { 0 };
            assert_eq!(expand_pm(&q, d, -1).gamma(), q.from_i64(expected));
        }
    }

    #[test]
    fn trivial_spans() {
        let q = Rationals;
        let s = relation_span(&q, 1, 2, RelationOptions::default());
        assert_eq!(s.rank(), 2);
        assert!(s.is_saturated());
        for d in 1..=4 {
            let s = relation_span(&q, d, d, RelationOptions::default());
            assert_eq!(s.rank(), 0);
            assert_eq!(s.triples_consumed(), 0);
        }
    }

    #[test]
    fn generator_decides_decomposable_with_one_term() {
        let f = PrimeField::new(3).unwrap();
        let space = relation_span(&f, 2, 3, RelationOptions::default());
        for triple in crate::sigma::enumerate_triples(2, 3).step_by(7) {
            let g = reduced_generator(&f, &triple);
            let decision = space.decide(&g).unwrap();
            assert!(decision.is_decomposable(), "{triple}");
            assert!(space.verify(&g, &decision));
        }
        let first = &space.generators()[0];
        match space.decide(&first.reduced).unwrap() {
            Decision::Decomposable { terms } => {
                assert_eq!(terms.len(), 1);
                assert_eq!(terms[0].triple, first.triple);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let q = Rationals;
        let space = relation_span(&q, 1, 2, RelationOptions::default());
        assert_eq!(
            space.decide(&TraceVector::identity(q, 3)).unwrap_err(),
            RelationError::DegreeMismatch { expected: 2, found: 3 }
        );
    }

    #[test]
    fn tampered_certificates_fail_verification() {
        let q = Rationals;
        let space = relation_span(&q, 2, 3, RelationOptions::default());
        let target = reduced_generator(&q, &"u=[x2] v=[x1'] w=[x3]".parse().unwrap());
        let decision = space.decide(&target).unwrap();
        assert!(space.verify(&target, &decision));
        let Decision::Decomposable { mut terms } = decision else { panic!() };
        terms[0].coefficient = q.add(&terms[0].coefficient, &q.one());
        assert!(!space.verify(&target, &Decision::Decomposable { terms }));
    }

    #[test]
    fn display_uses_signed_coefficients() {
        let f = PrimeField::new(5).unwrap();
        let v = reduce(&f, 3, &sigma_lin(&MultilinearTriple::plain_letters(1, 1))).unwrap();
        assert_eq!(
            v.to_string(),
            "-1*tr(x1 x2 x3) + 1*tr(x1 x2 x3') + 1*tr(x1 x2' x3) - 1*tr(x1 x2' x3')"
        );
    }
}
