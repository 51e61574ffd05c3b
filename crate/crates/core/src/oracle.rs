//! Semantic ground truth by evaluation.
//!
//! A multilinear invariant of degree `d` is determined by its values on
//! tuples `(B_{b_1}, ..., B_{b_d})` of basis matrices of the slot space, so
//! the vector of those values is a faithful coordinatization. Decomposable
//! multilinear invariants are spanned by products of traces over set
//! partitions with at least two blocks; deciding decomposability is then an
//! exact rank question. Nothing here touches the path sums or the relation
//! engine.
//!
//! Slot bases, in index order:
//! - general: `E_ij` at index `i * n + j`;
//! - symmetric: for `i <= j` in row-major order, `E_ii` or `E_ij + E_ji`;
//! - skew: for `i < j` in row-major order, `E_ij - E_ji`.
//!
//! The coordinate of a tuple is `sum_k b_k * m^(k-1)` with `m` the slot
//! basis size, so slot 1 is the least significant digit.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::Rng;
use thiserror::Error;

use crate::exactla::{EchelonBasis, InsertOutcome, Membership, SparseVector};
use crate::field::Field;
use crate::relspace::TraceVector;
use crate::words::{classes_on, CanonicalTraceWord, Letter, Word};

/// Default ceiling on the number of evaluation coordinates, `9^7`.
pub const DEFAULT_MAX_DIMENSION: u128 = 4_782_969;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("evaluation space needs {required} coordinates, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("expected {expected} matrices of size {n}x{n}, got {got}")]
    DimensionMismatch { expected: usize, n: usize, got: usize },
    #[error("matrix for x{0} is not in the {1} space")]
    WrongSpace(usize, Flavor),
    #[error("unknown flavor {0:?}")]
    UnknownFlavor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flavor {
    General,
    Symmetric,
    Skew,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::General => "general",
            Flavor::Symmetric => "symmetric",
            Flavor::Skew => "skew",
        })
    }
}

impl FromStr for Flavor {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Flavor::General),
            "symmetric" | "sym" => Ok(Flavor::Symmetric),
            "skew" | "antisym" => Ok(Flavor::Skew),
            _ => Err(OracleError::UnknownFlavor(s.to_string())),
        }
    }
}

/// One sparse entry `(row, col, value)` of a basis matrix.
type Entry = (usize, usize, i64);

/// The basis of one slot's matrix space, with row-indexed lookup tables for
/// plain and transposed letters.
#[derive(Debug, Clone)]
pub struct SlotBasis {
    n: usize,
    flavor: Flavor,
    elements: Vec<Vec<Entry>>,
    // by_row[starred][row] = (basis index, column, value)
    by_row: [Vec<Vec<(usize, usize, i64)>>; 2],
}

impl SlotBasis {
    pub fn new(n: usize, flavor: Flavor) -> Self {
        let mut elements = Vec::new();
        match flavor {
            Flavor::General => {
                for i in 0..n {
                    for j in 0..n {
                        elements.push(vec![(i, j, 1)]);
                    }
                }
            }
            Flavor::Symmetric => {
                for i in 0..n {
                    for j in i..n {
                        if i == j {
                            elements.push(vec![(i, i, 1)]);
                        } else {
                            elements.push(vec![(i, j, 1), (j, i, 1)]);
                        }
                    }
                }
            }
            Flavor::Skew => {
                for i in 0..n {
                    for j in i + 1..n {
                        elements.push(vec![(i, j, 1), (j, i, -1)]);
                    }
                }
            }
        }
        let mut plain = vec![Vec::new(); n];
        let mut transposed = vec![Vec::new(); n];
        for (b, entries) in elements.iter().enumerate() {
            for &(i, j, v) in entries {
                plain[i].push((b, j, v));
                transposed[j].push((b, i, v));
            }
        }
        Self { n, flavor, elements, by_row: [plain, transposed] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, b: usize) -> &[Entry] {
        &self.elements[b]
    }

    /// Number of coordinates for `d` slots.
    pub fn dimension(&self, d: usize) -> u128 {
        (self.len() as u128).pow(d as u32)
    }

    pub fn decode(&self, d: usize, mut coord: usize) -> Vec<usize> {
        let m = self.len();
        (0..d)
            .map(|_| {
                let b = coord % m;
                coord /= m;
                b
            })
            .collect()
    }

    /// Raw integer values of `tr(w)` on all basis tuples for the slots of
    /// `w`, as `(partial coordinate, value)` with no repeated coordinates.
    fn word_entries(&self, w: &Word) -> Vec<(usize, i64)> {
        let letters = w.letters();
        let weights: Vec<usize> =
            letters.iter().map(|l| self.len().pow(l.index as u32 - 1)).collect();
        let mut out = Vec::new();
        for start in 0..self.n {
            self.walk(letters, &weights, 0, start, start, 0, 1, &mut out);
        }
        merge_i64(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        letters: &[Letter],
        weights: &[usize],
        pos: usize,
        start: usize,
        row: usize,
        coord: usize,
        value: i64,
        out: &mut Vec<(usize, i64)>,
    ) {
        if pos == letters.len() {
            if row == start {
                out.push((coord, value));
            }
            return;
        }
        let table = &self.by_row[letters[pos].starred as usize][row];
        for &(b, col, v) in table {
            self.walk(letters, weights, pos + 1, start, col, coord + b * weights[pos], value * v, out);
        }
    }
}

fn merge_i64(mut entries: Vec<(usize, i64)>) -> Vec<(usize, i64)> {
    entries.sort_unstable_by_key(|(c, _)| *c);
    let mut out: Vec<(usize, i64)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match out.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|(_, v)| *v != 0);
    out
}

/// Entrywise product of block evaluations over disjoint slot sets.
fn product_entries(blocks: &[Vec<(usize, i64)>]) -> Vec<(usize, i64)> {
    let mut acc = vec![(0usize, 1i64)];
    for block in blocks {
        let mut next = Vec::with_capacity(acc.len() * block.len());
        for &(c, v) in &acc {
            for &(c2, v2) in block {
                next.push((c + c2, v * v2));
            }
        }
        acc = next;
    }
    merge_i64(acc)
}

/// Coefficient vector over all basis tuples.
pub type EvalVector<E> = SparseVector<E>;

/// A product of traces over a set partition of `{1..d}` into at least two
/// blocks, with one canonical trace word per block.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionProduct {
    blocks: Vec<CanonicalTraceWord>,
}

impl PartitionProduct {
    pub fn blocks(&self) -> &[CanonicalTraceWord] {
        &self.blocks
    }
}

impl fmt::Display for PartitionProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|b| format!("tr({b})")).collect();
        f.write_str(&parts.join("*"))
    }
}

/// Set partitions of `{1..d}`, blocks sorted by least element, in
/// restricted-growth-string order.
pub fn set_partitions(d: usize) -> Vec<Vec<Vec<u16>>> {
    fn grow(k: usize, d: usize, rgs: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<Vec<u16>>>) {
        if k == d {
            let blocks = max + 1;
            let mut parts = vec![Vec::new(); blocks];
            for (i, &b) in rgs.iter().enumerate() {
                parts[b].push(i as u16 + 1);
            }
            out.push(parts);
            return;
        }
        for b in 0..=max + 1 {
            rgs.push(b);
            grow(k + 1, d, rgs, max.max(b), out);
            rgs.pop();
        }
    }
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut rgs = vec![0];
    grow(1, d, &mut rgs, 0, &mut out);
    out
}

/// All trace products over set partitions with at least two blocks.
pub fn partition_products(d: usize) -> Vec<PartitionProduct> {
    let mut out = Vec::new();
    for partition in set_partitions(d) {
        if partition.len() < 2 {
            continue;
        }
        let choices: Vec<Vec<CanonicalTraceWord>> = partition.iter().map(|b| classes_on(b)).collect();
        for blocks in choices.into_iter().multi_cartesian_product() {
            out.push(PartitionProduct { blocks });
        }
    }
    out
}

/// Evaluation of a trace vector of degree `d`.
pub fn coeff_vector<F: Field>(field: &F, basis: &SlotBasis, f: &TraceVector<F>) -> EvalVector<F::Elem> {
    let mut all = Vec::new();
    for (class, c) in f.entries() {
        for (coord, v) in basis.word_entries(class.word()) {
            all.push((coord, field.mul(c, &field.from_i64(v))));
        }
    }
    SparseVector::from_entries(field, all)
}

pub fn word_vector<F: Field>(field: &F, basis: &SlotBasis, w: &Word) -> EvalVector<F::Elem> {
    let entries = basis.word_entries(w).into_iter().map(|(c, v)| (c, field.from_i64(v))).collect();
    SparseVector::from_entries(field, entries)
}

/// Evaluation of a product of traces of words on disjoint letter sets.
pub fn product_vector<F: Field>(field: &F, basis: &SlotBasis, words: &[&Word]) -> EvalVector<F::Elem> {
    let blocks: Vec<Vec<(usize, i64)>> = words.iter().map(|w| basis.word_entries(w)).collect();
    let entries = product_entries(&blocks).into_iter().map(|(c, v)| (c, field.from_i64(v))).collect();
    SparseVector::from_entries(field, entries)
}

pub fn partition_product_vector<F: Field>(
    field: &F,
    basis: &SlotBasis,
    p: &PartitionProduct,
) -> EvalVector<F::Elem> {
    let words: Vec<&Word> = p.blocks.iter().map(|b| b.word()).collect();
    product_vector(field, basis, &words)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decomposable,
    Indecomposable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Decomposable => "decomposable",
            Verdict::Indecomposable => "indecomposable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub verdict: Verdict,
    /// Rank of all trace words together with the decomposables.
    pub invariant_span_rank: usize,
    pub decomposable_span_rank: usize,
    /// Number of evaluation coordinates.
    pub dimension: u128,
}

impl OracleOutcome {
    /// Dimension of the indecomposable quotient.
    pub fn quotient_dim(&self) -> usize {
        self.invariant_span_rank - self.decomposable_span_rank
    }
}

fn checked_basis(n: usize, d: usize, flavor: Flavor, budget: u128) -> Result<SlotBasis, OracleError> {
    let basis = SlotBasis::new(n, flavor);
    let required = basis.dimension(d);
    if required > budget || required > usize::MAX as u128 {
        return Err(OracleError::BudgetExceeded { required, budget });
    }
    Ok(basis)
}

/// Span of the decomposable multilinear invariants of degree `d`.
pub fn decomposable_span<F: Field>(
    field: &F,
    basis: &SlotBasis,
    d: usize,
) -> EchelonBasis<F> {
    let dim = basis.dimension(d) as usize;
    let mut span = EchelonBasis::new(field.clone(), dim).semi_reduced();
    for p in partition_products(d) {
        span.insert(&partition_product_vector(field, basis, &p)).expect("coordinates in range");
    }
    span
}

/// Decides decomposability of `f` in the invariant algebra of the flavor by
/// exact rank over all basis tuples.
pub fn oracle_decide<F: Field>(
    field: &F,
    f: &TraceVector<F>,
    n: usize,
    flavor: Flavor,
    budget: u128,
) -> Result<OracleOutcome, OracleError> {
    let d = f.d();
    let basis = checked_basis(n, d, flavor, budget)?;
    let mut span = decomposable_span(field, &basis, d);
    let decomposable_span_rank = span.rank();
    let target = coeff_vector(field, &basis, f);
    let verdict = match span.membership(&target).expect("coordinates in range") {
        Membership::Combination { .. } => Verdict::Decomposable,
        Membership::Residue(_) => Verdict::Indecomposable,
    };
    for class in crate::words::enumerate_basis(d) {
        span.insert(&word_vector(field, &basis, class.word())).expect("coordinates in range");
    }
    Ok(OracleOutcome {
        verdict,
        invariant_span_rank: span.rank(),
        decomposable_span_rank,
        dimension: basis.dimension(d),
    })
}

/// Dimension of the indecomposable quotient in degree `d`, with both ranks.
pub fn oracle_quotient<F: Field>(
    field: &F,
    n: usize,
    d: usize,
    flavor: Flavor,
    budget: u128,
) -> Result<OracleOutcome, OracleError> {
    oracle_decide(field, &TraceVector::identity(field.clone(), d), n, flavor, budget)
}

/// Products of traces of undecorated words over set partitions with at least
/// two blocks: one cyclic order per block, starting at the block's least
/// index. Every flip orbit of partition products contains one of these.
pub fn plain_partition_products(d: usize) -> Vec<Vec<Word>> {
    let mut out = Vec::new();
    for partition in set_partitions(d) {
        if partition.len() < 2 {
            continue;
        }
        let choices: Vec<Vec<Word>> = partition.iter().map(|b| plain_cycles(b)).collect();
        out.extend(choices.into_iter().multi_cartesian_product());
    }
    out
}

/// Undecorated words on `indices` up to rotation, each starting with the
/// first index.
pub fn plain_cycles(indices: &[u16]) -> Vec<Word> {
    let (first, rest) = indices.split_first().expect("nonempty block");
    let k = rest.len();
    rest.iter()
        .copied()
        .permutations(k)
        .map(|p| {
            let letters = std::iter::once(*first).chain(p).map(Letter::plain).collect();
            Word::new(letters).expect("nonempty")
        })
        .collect()
}

/// Coordinates folded by the symmetries of general-flavor invariants:
/// simultaneous relabelling of matrix indices and, per character, the
/// transpose of single slots.
///
/// Each slot `E_ij` is normalized to `i <= j`, recording in `mask` the slots
/// that were transposed and in `diagonal` the slots with `i == j`. Only
/// normalized tuples that are least among their relabellings are kept.
struct FoldedCoords {
    n: usize,
    d: usize,
    pairs: usize,
    // for general basis index b: (normalized pair, transposed, diagonal)
    slot: Vec<(usize, bool, bool)>,
    // relabel[pi][pair] = normalized pair of the relabelled pair
    relabel: Vec<Vec<usize>>,
    codes: std::collections::HashMap<u64, u32>,
}

#[derive(Debug, Clone, Copy)]
struct FoldedEntry {
    code: u32,
    mask: u32,
    diagonal: u32,
    value: i64,
}

impl FoldedCoords {
    fn new(n: usize, d: usize) -> Self {
        let mut pair_index = vec![vec![usize::MAX; n]; n];
        let mut pairs = 0;
        for i in 0..n {
            for j in i..n {
                pair_index[i][j] = pairs;
                pair_index[j][i] = pairs;
                pairs += 1;
            }
        }
        let slot = (0..n * n).map(|b| (pair_index[b / n][b % n], b / n > b % n, b / n == b % n)).collect();
        let mut pair_list = vec![(0, 0); pairs];
        for i in 0..n {
            for j in i..n {
                pair_list[pair_index[i][j]] = (i, j);
            }
        }
        let relabel = (0..n)
            .permutations(n)
            .map(|pi| pair_list.iter().map(|&(i, j)| pair_index[pi[i]][pi[j]]).collect())
            .collect();
        Self { n, d, pairs, slot, relabel, codes: Default::default() }
    }

    fn code_of(&self, digits: &[usize]) -> u64 {
        digits.iter().rev().fold(0u64, |acc, &p| acc * self.pairs as u64 + p as u64)
    }

    /// Folds raw general-flavor entries, dropping tuples that are not least
    /// among their relabellings.
    fn fold(&mut self, raw: &[(usize, i64)]) -> Vec<FoldedEntry> {
        let m = self.n * self.n;
        let mut digits = vec![0usize; self.d];
        let mut out = Vec::new();
        for &(coord, value) in raw {
            let (mut c, mut mask, mut diagonal) = (coord, 0u32, 0u32);
            for (k, digit) in digits.iter_mut().enumerate() {
                let (pair, transposed, diag) = self.slot[c % m];
                c /= m;
                *digit = pair;
                mask |= (transposed as u32) << k;
                diagonal |= (diag as u32) << k;
            }
            let code = self.code_of(&digits);
            let least = self.relabel.iter().all(|table| {
                let image: Vec<usize> = digits.iter().map(|&p| table[p]).collect();
                self.code_of(&image) >= code
            });
            if least {
                let next = self.codes.len() as u32;
                let code = *self.codes.entry(code).or_insert(next);
                out.push(FoldedEntry { code, mask, diagonal, value });
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.codes.len()
    }
}

/// Component of character `s` of a folded vector, in the local coordinates
/// `local` (grown on demand).
fn component_vector<F: Field>(
    field: &F,
    entries: &[FoldedEntry],
    s: u32,
    local: &mut [u32],
    next: &mut u32,
) -> SparseVector<F::Elem> {
    let mut out = Vec::new();
    for e in entries {
        if e.diagonal & s != 0 {
            continue;
        }
        let slot = &mut local[e.code as usize];
        if *slot == u32::MAX {
            *slot = *next;
            *next += 1;
        }
        let v = if (e.mask & s).count_ones() % 2 == 1 { -e.value } else { e.value };
        out.push((*slot as usize, field.from_i64(v)));
    }
    SparseVector::from_entries(field, out)
}

/// General-flavor decision computed one flip character at a time on
/// coordinates folded by index relabelling. Agrees with [`oracle_decide`] in
/// the general flavor and reaches larger degrees.
pub fn oracle_decide_isotypic<F: Field>(
    field: &F,
    f: &TraceVector<F>,
    n: usize,
    budget: u128,
) -> Result<OracleOutcome, OracleError> {
    let d = f.d();
    assert!(d <= 32, "degree {d} is beyond the supported range");
    let basis = checked_basis(n, d, Flavor::General, budget)?;
    let mut folded = FoldedCoords::new(n, d);
    let products: Vec<Vec<FoldedEntry>> = plain_partition_products(d)
        .iter()
        .map(|words| {
            let blocks: Vec<Vec<(usize, i64)>> = words.iter().map(|w| basis.word_entries(w)).collect();
            folded.fold(&product_entries(&blocks))
        })
        .collect();
    let words: Vec<Vec<FoldedEntry>> =
        plain_cycles(&(1..=d as u16).collect::<Vec<_>>()).iter().map(|w| folded.fold(&basis.word_entries(w))).collect();
    // the target may carry arbitrary coefficients, so fold it over the field
    let mut target_terms: Vec<(F::Elem, Vec<FoldedEntry>)> = Vec::new();
    for (class, c) in f.entries() {
        target_terms.push((c.clone(), folded.fold(&basis.word_entries(class.word()))));
    }
    let total = folded.len();
    let mut outcome = OracleOutcome {
        verdict: Verdict::Decomposable,
        invariant_span_rank: 0,
        decomposable_span_rank: 0,
        dimension: basis.dimension(d),
    };
    for s in 0..1u32 << d {
        let mut local = vec![u32::MAX; total];
        let mut next = 0u32;
        let p: Vec<_> = products.iter().map(|e| component_vector(field, e, s, &mut local, &mut next)).collect();
        let w: Vec<_> = words.iter().map(|e| component_vector(field, e, s, &mut local, &mut next)).collect();
        let parts: Vec<(F::Elem, SparseVector<F::Elem>)> = target_terms
            .iter()
            .map(|(c, e)| (c.clone(), component_vector(field, e, s, &mut local, &mut next)))
            .collect();
        let target = SparseVector::linear_combination(field, parts.iter().map(|(c, v)| (c, v)));
        let mut span = EchelonBasis::new(field.clone(), next as usize).semi_reduced();
        for v in &p {
            span.insert(v).expect("coordinates in range");
        }
        outcome.decomposable_span_rank += span.rank();
        if let Membership::Residue(_) = span.membership(&target).expect("coordinates in range") {
            outcome.verdict = Verdict::Indecomposable;
        }
        for v in &w {
            span.insert(v).expect("coordinates in range");
        }
        outcome.invariant_span_rank += span.rank();
    }
    Ok(outcome)
}

/// The full polarization of `sigma_{n+1}`:
/// `sum over pi in S_{n+1} of sgn(pi) prod over cycles c of tr(prod_{i in c} x_i)`.
/// With `corrupt`, the sign of the identity permutation's term is flipped.
pub fn polarization_vector<F: Field>(field: &F, n: usize, corrupt: bool) -> EvalVector<F::Elem> {
    let d = n + 1;
    let basis = SlotBasis::new(n, Flavor::General);
    let mut all = Vec::new();
    for perm in (0..d).permutations(d) {
        let cycles = cycles_of(&perm);
        let mut sign = if (d - cycles.len()) % 2 == 0 { 1 } else { -1 };
        if corrupt && cycles.len() == d {
            sign = -sign;
        }
        let words: Vec<Word> = cycles
            .iter()
            .map(|c| Word::new(c.iter().map(|&i| Letter::plain(i as u16 + 1)).collect()).unwrap())
            .collect();
        let blocks: Vec<Vec<(usize, i64)>> = words.iter().map(|w| basis.word_entries(w)).collect();
        for (coord, v) in product_entries(&blocks) {
            all.push((coord, field.from_i64(sign * v)));
        }
    }
    SparseVector::from_entries(field, all)
}

fn cycles_of(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut cycles = Vec::new();
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            cycle.push(i);
            i = perm[i];
        }
        cycles.push(cycle);
    }
    cycles
}

/// Passes when the polarized characteristic-polynomial identity vanishes on
/// `n x n` matrices in the field's characteristic.
pub fn polarization_sanity<F: Field>(field: &F, n: usize) -> bool {
    polarization_vector(field, n, false).is_zero()
}

/// Dense `n x n` matrix for point evaluations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix<E> {
    n: usize,
    data: Vec<E>,
}

impl<E: Clone + PartialEq> DenseMatrix<E> {
    pub fn from_fn<F: Field<Elem = E>>(_field: &F, n: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// The `b`-th basis matrix of a slot space.
    pub fn basis_element<F: Field<Elem = E>>(field: &F, basis: &SlotBasis, b: usize) -> Self {
        let mut m = Self::from_fn(field, basis.n(), |_, _| field.zero());
        for &(i, j, v) in basis.element(b) {
            m.data[i * basis.n() + j] = field.from_i64(v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &E {
        &self.data[i * self.n + j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        Self { n, data: (0..n * n).map(|k| self.data[(k % n) * n + k / n].clone()).collect() }
    }

    pub fn mul<F: Field<Elem = E>>(&self, field: &F, other: &Self) -> Self {
        let n = self.n;
        Self::from_fn(field, n, |i, j| {
            let mut s = field.zero();
            for k in 0..n {
                field.add_mul_assign(&mut s, self.get(i, k), other.get(k, j));
            }
            s
        })
    }

    pub fn trace<F: Field<Elem = E>>(&self, field: &F) -> E {
        let mut s = field.zero();
        for i in 0..self.n {
            field.add_assign(&mut s, self.get(i, i));
        }
        s
    }

    fn in_space<F: Field<Elem = E>>(&self, field: &F, flavor: Flavor) -> bool {
        let t = self.transpose();
        match flavor {
            Flavor::General => true,
            Flavor::Symmetric => t == *self,
            Flavor::Skew => t.data.iter().zip(&self.data).all(|(a, b)| field.is_zero(&field.add(a, b))),
        }
    }
}

/// Trace of the product of the letters' values; `matrices[k - 1]` is the
/// value of `x_k`. A starred letter evaluates to the transpose, which is the
/// matrix itself in the symmetric flavor and its negative in the skew one.
pub fn eval_trace_word<F: Field>(
    field: &F,
    w: &Word,
    matrices: &[DenseMatrix<F::Elem>],
    flavor: Flavor,
) -> Result<F::Elem, OracleError> {
    let needed = w.letters().iter().map(|l| l.index as usize).max().unwrap_or(0);
    let n = matrices.first().map_or(0, DenseMatrix::n);
    if matrices.len() < needed || matrices.iter().any(|m| m.n() != n) {
        return Err(OracleError::DimensionMismatch { expected: needed, n, got: matrices.len() });
    }
    for (k, m) in matrices.iter().enumerate() {
        if !m.in_space(field, flavor) {
            return Err(OracleError::WrongSpace(k + 1, flavor));
        }
    }
    let mut acc: Option<DenseMatrix<F::Elem>> = None;
    for l in w.letters() {
        let m = &matrices[l.index as usize - 1];
        let value = if !l.starred {
            m.clone()
        } else {
            match flavor {
                Flavor::General => m.transpose(),
                Flavor::Symmetric => m.clone(),
                Flavor::Skew => DenseMatrix { n, data: m.data.iter().map(|x| field.neg(x)).collect() },
            }
        };
        acc = Some(match acc {
            None => value,
            Some(a) => a.mul(field, &value),
        });
    }
    Ok(acc.expect("words are nonempty").trace(field))
}

/// Evaluates a trace vector at a matrix tuple.
pub fn evaluate<F: Field>(
    field: &F,
    f: &TraceVector<F>,
    matrices: &[DenseMatrix<F::Elem>],
    flavor: Flavor,
) -> Result<F::Elem, OracleError> {
    let mut s = field.zero();
    for (class, c) in f.entries() {
        let v = eval_trace_word(field, class.word(), matrices, flavor)?;
        field.add_mul_assign(&mut s, c, &v);
    }
    Ok(s)
}

/// A random tuple of `d` matrices in the flavor's space with entries drawn
/// from `-bound..=bound`.
pub fn random_tuple<F: Field, R: Rng>(
    field: &F,
    n: usize,
    d: usize,
    flavor: Flavor,
    bound: i64,
    rng: &mut R,
) -> Vec<DenseMatrix<F::Elem>> {
    (0..d)
        .map(|_| {
            let raw: Vec<i64> = (0..n * n).map(|_| rng.gen_range(-bound..=bound)).collect();
            DenseMatrix::from_fn(field, n, |i, j| {
                let a = raw[i * n + j];
                let b = raw[j * n + i];
                field.from_i64(match flavor {
                    Flavor::General => a,
                    Flavor::Symmetric => a + b,
                    Flavor::Skew => a - b,
                })
            })
        })
        .collect()
}

/// Coordinates of a matrix of the flavor's space in the slot basis.
pub fn slot_coordinates<F: Field>(basis: &SlotBasis, m: &DenseMatrix<F::Elem>) -> Vec<F::Elem> {
    // every basis element has a distinct leading entry with value 1
    (0..basis.len())
        .map(|b| {
            let (i, j, _) = basis.element(b)[0];
            m.get(i, j).clone()
        })
        .collect()
}

/// Evaluates a multilinear invariant from its coefficient vector:
/// `sum over tuples of v[b] * prod_k coord_k(b_k)`.
pub fn evaluate_coefficients<F: Field>(
    field: &F,
    basis: &SlotBasis,
    d: usize,
    v: &EvalVector<F::Elem>,
    matrices: &[DenseMatrix<F::Elem>],
) -> F::Elem {
    let coords: Vec<Vec<F::Elem>> = matrices.iter().map(|m| slot_coordinates::<F>(basis, m)).collect();
    let mut s = field.zero();
    for (c, x) in v.entries() {
        let mut term = x.clone();
        for (k, b) in basis.decode(d, *c).into_iter().enumerate() {
            term = field.mul(&term, &coords[k][b]);
        }
        field.add_assign(&mut s, &term);
    }
    s
}

/// Outcome of comparing the coordinatization with direct evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaithfulnessReport {
    pub samples: usize,
    /// Samples where the two evaluations differ.
    pub mismatches: usize,
    /// Samples with a nonzero value.
    pub nonzero_samples: usize,
    pub vector_is_zero: bool,
}

impl FaithfulnessReport {
    /// Evaluations agree, and the vector vanishes iff every sample does.
    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.vector_is_zero == (self.nonzero_samples == 0)
    }
}

/// Evaluates `f` on `samples` random tuples both directly and through its
/// coefficient vector.
pub fn faithfulness_check<F: Field, R: Rng>(
    field: &F,
    f: &TraceVector<F>,
    n: usize,
    flavor: Flavor,
    samples: usize,
    rng: &mut R,
) -> FaithfulnessReport {
    let d = f.d();
    let basis = SlotBasis::new(n, flavor);
    let v = coeff_vector(field, &basis, f);
    let mut report =
        FaithfulnessReport { samples, mismatches: 0, nonzero_samples: 0, vector_is_zero: v.is_zero() };
    for _ in 0..samples {
        let tuple = random_tuple(field, n, d, flavor, 1 << 20, rng);
        let direct = evaluate(field, f, &tuple, flavor).expect("tuple matches the flavor");
        if direct != evaluate_coefficients(field, &basis, d, &v, &tuple) {
            report.mismatches += 1;
        }
        if !field.is_zero(&direct) {
            report.nonzero_samples += 1;
        }
    }
    report
}

/// Inserts every vector and reports how many extended the span.
pub fn extend_count<F: Field>(span: &mut EchelonBasis<F>, vectors: &[EvalVector<F::Elem>]) -> usize {
    vectors
        .iter()
        .filter(|v| matches!(span.insert(v), Ok(InsertOutcome::Extended { .. })))
        .count()
}
