use std::collections::HashSet;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use oinv_core::exactla::{EchelonBasis, InsertOutcome, Membership, SparseVector};
use oinv_core::oracle::{
    coeff_vector, evaluate, faithfulness_check, random_tuple, Flavor, SlotBasis,
};
use oinv_core::relspace::{
    expand_pm, reduce, reduced_generator, relation_span, replay, Decision, RelationOptions, TraceVector,
};
use oinv_core::sigma::{enumerate_triples, omega, sigma_lin, MultilinearTriple, Slot, Vertex};
use oinv_core::words::{canonical_class, enumerate_basis, involute, rotate, Letter, Word};
use oinv_core::{Field, PrimeField, Rationals};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn multilinear_word() -> impl Strategy<Value = Word> {
    (1usize..=8)
        .prop_flat_map(|d| (Just((1..=d as u16).collect::<Vec<_>>()).prop_shuffle(), 0u64..1 << d))
        .prop_map(|(order, mask)| {
            let letters = order.iter().enumerate().map(|(k, &i)| Letter { index: i, starred: mask >> k & 1 == 1 });
            Word::new(letters.collect()).unwrap()
        })
}

/// A triple with `t + 2r <= max` built from a random letter order, cut
/// points and decoration.
fn triple(max: usize) -> impl Strategy<Value = MultilinearTriple> {
    (1..=max)
        .prop_flat_map(move |t| (Just(t), 0..=(max - t) / 2))
        .prop_flat_map(move |(t, r)| {
            let k = t + 2 * r;
            (Just(t), Just(r), k..=max)
        })
        .prop_flat_map(|(t, r, d)| {
            let k = t + 2 * r;
            (
                Just((t, r)),
                Just((1..=d as u16).collect::<Vec<_>>()).prop_shuffle(),
                proptest::sample::subsequence((1..d).collect::<Vec<_>>(), k - 1),
                0u64..1 << d,
            )
        })
        .prop_map(|((t, r), order, cuts, mask)| {
            let bounds: Vec<usize> =
                std::iter::once(0).chain(cuts.iter().copied()).chain(std::iter::once(order.len())).collect();
            let mut words: Vec<Word> = bounds
                .windows(2)
                .map(|b| {
                    Word::new(
                        order[b[0]..b[1]]
                            .iter()
                            .map(|&index| Letter { index, starred: mask >> (index - 1) & 1 == 1 })
                            .collect(),
                    )
                    .unwrap()
                })
                .collect();
            let w = words.split_off(t + r);
            let v = words.split_off(t);
            MultilinearTriple::new(words, v, w).unwrap()
        })
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

fn random_vector<F: Field>(field: &F, d: usize, rng: &mut impl Rng) -> TraceVector<F> {
    let mut v = TraceVector::zero(field.clone(), d);
    for class in enumerate_basis(d) {
        if rng.gen_bool(0.4) {
            v.add_class(class, &field.from_i64(rng.gen_range(-4..=4)));
        }
    }
    v
}

proptest! {
    #[test]
    fn canonical_class_is_invariant(w in multilinear_word(), k in 0usize..8) {
        let d = w.len();
        let c = canonical_class(&w, d).unwrap();
        prop_assert_eq!(&canonical_class(&rotate(&w, k % d), d).unwrap(), &c);
        prop_assert_eq!(&canonical_class(&involute(&w), d).unwrap(), &c);
        prop_assert!(enumerate_basis(d).contains(&c));
    }

    #[test]
    fn closed_paths_are_valid(t in triple(7)) {
        let paths = omega(&t);
        if t.r() == 0 {
            prop_assert_eq!(paths.len() as i64, factorial(t.t() - 1));
        }
        for p in &paths {
            let first = p.arrows[0];
            prop_assert!(first.label.slot == Slot::U && first.label.position == 0 && !first.label.transposed);
            prop_assert!(p.arrows.windows(2).all(|a| a[0].tail == a[1].head));
            prop_assert_eq!(p.arrows.last().unwrap().tail, first.head);
            let pairs: HashSet<_> = p.labels().map(|l| (l.slot, l.position)).collect();
            prop_assert_eq!(pairs.len(), t.t() + 2 * t.r());
            prop_assert_eq!(p.arrows.len(), pairs.len());
            if t.r() == 0 {
                prop_assert!(p.arrows.iter().all(|a| a.head == Vertex::One));
            }
        }
    }

    #[test]
    fn coefficient_sum_closed_form(t in triple(7)) {
        let sum = sigma_lin(&t).coefficient_sum();
        if t.r() == 0 {
            prop_assert_eq!(sum.abs(), factorial(t.t() - 1));
        } else {
            prop_assert_eq!(sum, 0);
        }
    }

    #[test]
    fn generators_decide_decomposable(seed in any::<u64>()) {
        let f = PrimeField::new(5).unwrap();
        let space = relation_span(&f, 2, 4, RelationOptions::default());
        let triples: Vec<_> = enumerate_triples(2, 4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut target = TraceVector::zero(f, 4);
        for _ in 0..3 {
            let g = reduced_generator(&f, &triples[rng.gen_range(0..triples.len())]);
            target = target.add_scaled(&f.from_i64(rng.gen_range(1..5)), &g).unwrap();
        }
        match space.decide(&target).unwrap() {
            Decision::Decomposable { terms } => prop_assert_eq!(replay(&f, 4, &terms), target),
            Decision::Indecomposable { .. } => prop_assert!(false, "generator combination not absorbed"),
        }
    }

    #[test]
    fn faithful_coordinates(seed in any::<u64>(), d in 1usize..=4, n in 1usize..=2, flavor in 0usize..3) {
        let flavor = [Flavor::General, Flavor::Symmetric, Flavor::Skew][flavor];
        let f = PrimeField::new(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = random_vector(&f, d, &mut rng);
        let report = faithfulness_check(&f, &target, n, flavor, 100, &mut rng);
        prop_assert!(report.passed(), "{:?}", report);
    }

    #[test]
    fn flavors_are_substitutions(seed in any::<u64>(), d in 1usize..=4, n in 2usize..=3) {
        let f = PrimeField::new(11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = random_vector(&f, d, &mut rng);
        let tuple = random_tuple(&f, n, d, Flavor::General, 50, &mut rng);
        for (sign, flavor) in [(1i8, Flavor::Symmetric), (-1, Flavor::Skew)] {
            let specialized: Vec<_> = tuple
                .iter()
                .map(|m| {
                    let t = m.transpose();
                    oinv_core::oracle::DenseMatrix::from_fn(&f, n, |i, j| {
                        let s = f.from_i64(sign as i64);
                        f.add(m.get(i, j), &f.mul(&s, t.get(i, j)))
                    })
                })
                .collect();
            let lhs = evaluate(&f, &target, &specialized, flavor).unwrap();
            let rhs = evaluate(&f, &target.substitute_pm(sign), &tuple, Flavor::General).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}

/// Rank by fraction-free (Bareiss) elimination over the integers.
fn bareiss_rank(mut m: Vec<Vec<BigInt>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| !m[r][c].is_zero()) else { continue };
        m.swap(rank, pivot);
        for r in rank + 1..rows {
            for k in c + 1..cols {
                m[r][k] = (&m[rank][c] * &m[r][k] - &m[r][c] * &m[rank][k]) / &prev;
            }
            m[r][c] = BigInt::zero();
        }
        prev = m[rank][c].clone();
        rank += 1;
    }
    rank
}

/// Rank by dense Gaussian elimination mod p.
fn dense_rank_mod(mut m: Vec<Vec<i64>>, p: i64) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| m[r][c].rem_euclid(p) != 0) else { continue };
        m.swap(rank, pivot);
        let inv = (1..p).find(|x| (m[rank][c] * x).rem_euclid(p) == 1).unwrap();
        for r in 0..m.len() {
            if r != rank {
                let factor = (m[r][c] * inv).rem_euclid(p);
                for k in 0..cols {
                    m[r][k] = (m[r][k] - factor * m[rank][k]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn small_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=7, 1usize..=7).prop_flat_map(|(r, c)| {
        proptest::collection::vec(proptest::collection::vec(prop_oneof![3 => Just(0i64), 2 => -3i64..=3], c), r)
    })
}

fn sparse<F: Field>(field: &F, row: &[i64]) -> SparseVector<F::Elem> {
    SparseVector::from_entries(field, row.iter().enumerate().map(|(i, &v)| (i, field.from_i64(v))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn echelon_rank_matches_dense_references(m in small_matrix()) {
        let cols = m[0].len();
        let big: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
        let mut q = EchelonBasis::new(Rationals, cols);
        let mut f7 = EchelonBasis::new(PrimeField::new(7).unwrap(), cols).semi_reduced();
        let f3 = PrimeField::new(3).unwrap();
        let mut b3 = EchelonBasis::with_tracking(f3, cols);
        for row in &m {
            q.insert(&sparse(&Rationals, row)).unwrap();
            f7.insert(&sparse(&PrimeField::new(7).unwrap(), row)).unwrap();
            b3.insert(&sparse(&f3, row)).unwrap();
        }
        prop_assert_eq!(q.rank(), bareiss_rank(big));
        prop_assert_eq!(f7.rank(), dense_rank_mod(m.clone(), 7));
        prop_assert_eq!(b3.rank(), dense_rank_mod(m.clone(), 3));
        for row in q.rows() {
            let lead = row.leading().unwrap();
            prop_assert!(lead.1.is_one());
            for other in q.rows() {
                if !std::ptr::eq(row, other) {
                    prop_assert!(other.get(lead.0).is_none());
                }
            }
        }
    }

    #[test]
    fn membership_iff_absorbed(m in small_matrix(), probe in proptest::collection::vec(-3i64..=3, 7)) {
        let f = PrimeField::new(5).unwrap();
        let cols = m[0].len();
        let mut basis = EchelonBasis::with_tracking(f, cols);
        for (i, row) in m.iter().enumerate() {
            basis.insert_tagged(&sparse(&f, row), i).unwrap();
        }
        let v = sparse(&f, &probe[..cols]);
        let member = basis.membership(&v).unwrap();
        if let Membership::Combination { tags, .. } = &member {
            let mut acc = SparseVector::zero();
            for (tag, c) in tags.entries() {
                acc = acc.add_scaled(&f, c, &sparse(&f, &m[*tag]));
            }
            prop_assert_eq!(&acc, &v);
        }
        let absorbed = matches!(basis.insert(&v).unwrap(), InsertOutcome::Absorbed);
        prop_assert_eq!(absorbed, matches!(member, Membership::Combination { .. }));
    }

    #[test]
    fn rank_ignores_row_order(m in small_matrix(), seed in any::<u64>()) {
        let f = PrimeField::new(3).unwrap();
        let cols = m[0].len();
        let mut shuffled = m.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let rank = |rows: &[Vec<i64>]| {
            let mut b = EchelonBasis::new(f, cols);
            rows.iter().for_each(|r| { b.insert(&sparse(&f, r)).unwrap(); });
            b
        };
        let (a, b) = (rank(&m), rank(&shuffled));
        prop_assert_eq!(a.rank(), b.rank());
        let (ra, rb) = (a.to_reduced(), b.to_reduced());
        prop_assert_eq!(ra.rows().collect::<Vec<_>>(), rb.rows().collect::<Vec<_>>());
    }
}

#[test]
fn basis_counts_match_brute_force() {
    for d in 1..=6 {
        let mut classes = HashSet::new();
        for order in (1..=d as u16).permutations(d) {
            for mask in 0..1u64 << d {
                let w = Word::new(order.iter().map(|&i| Letter { index: i, starred: mask >> (i - 1) & 1 == 1 }).collect())
                    .unwrap();
                // smallest member of the orbit, computed without the library canonicalizer
                let orbit = (0..d).flat_map(|k| {
                    let r = rotate(&w, k);
                    [involute(&r), r]
                });
                classes.insert(orbit.min().unwrap());
            }
        }
        assert_eq!(enumerate_basis(d).len(), classes.len(), "d = {d}");
        if d >= 3 {
            assert_eq!(classes.len() as i64, (1 << (d - 1)) * factorial(d - 1));
        }
    }
}

#[test]
fn gamma_closed_form_for_plain_triples() {
    for t in 1..=7 {
        for r in 0..=(7 - t) / 2 {
            let g = reduce(&Rationals, t + 2 * r, &sigma_lin(&MultilinearTriple::plain_letters(t, r))).unwrap().gamma();
            let expected = (if t % 2 == 0 { 1 } else { -1 }) * factorial(t + r - 1) * factorial(r);
            assert_eq!(g, BigRational::from_integer(expected.into()), "(t, r) = ({t}, {r})");
        }
    }
}

#[test]
fn rank_is_schedule_independent() {
    let f = PrimeField::new(3).unwrap();
    let reference = relation_span(&f, 3, 5, RelationOptions::default());
    for (threads, batch_size) in [(1, 1), (1, 4096), (2, 7), (3, 2048)] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let space = pool.install(|| relation_span(&f, 3, 5, RelationOptions { batch_size, ..RelationOptions::default() }));
        assert_eq!(space.rank(), reference.rank(), "threads {threads}, batch {batch_size}");
        assert_eq!(space.rows(), reference.rows());
    }
}

#[test]
fn skew_expansion_matches_skew_flavor() {
    // the general-flavor vector of expand_pm(d, -1) at a skew tuple equals
    // the skew-flavor vector of the plain word there
    for n in [2, 3] {
        let f = PrimeField::new(5).unwrap();
        let general = SlotBasis::new(n, Flavor::General);
        let skew = SlotBasis::new(n, Flavor::Skew);
        let expanded = coeff_vector(&f, &general, &expand_pm(&f, 2, -1));
        let plain = coeff_vector(&f, &skew, &TraceVector::identity(f, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for _ in 0..20 {
            let tuple = random_tuple(&f, n, 2, Flavor::Skew, 100, &mut rng);
            let lhs = oinv_core::oracle::evaluate_coefficients(&f, &general, 2, &expanded, &tuple);
            let rhs = oinv_core::oracle::evaluate_coefficients(&f, &skew, 2, &plain, &tuple);
            // X - X^T = 2X on skew matrices
            assert_eq!(lhs, f.mul(&f.from_i64(4), &rhs));
        }
    }
}

#[test]
fn bareiss_reference_is_sane() {
    let m = vec![vec![BigInt::from(2), BigInt::from(4)], vec![BigInt::from(1), BigInt::from(2)]];
    assert_eq!(bareiss_rank(m), 1);
    assert_eq!(dense_rank_mod(vec![vec![1, 2], vec![3, 1]], 5), 1);
}
