//! Relation spaces split by the characters of the flip group.
//!
//! The group `(Z/2)^d` acts on trace words by toggling the decoration of
//! chosen indices. The action commutes with rotation and involution, maps
//! `sigma_lin(T)` to `sigma_lin` of the flipped triple, and is diagonalizable
//! because the characteristic is odd. The relation space is therefore the
//! direct sum of its projections onto the character components, and each
//! projection is spanned by the projections of undecorated generators. A
//! target is decomposable iff each of its projections is.
//!
//! A character is named by a mask `s`; its value on a flip `m` is
//! `(-1)^|m & s|`. Component coordinates are flip orbits of classes whose
//! stabilizer lies in the kernel of the character, indexed by a chosen
//! representative.

use rayon::prelude::*;

use crate::exactla::{EchelonBasis, InsertOutcome, Membership, SparseVector};
use crate::field::Field;
use crate::relspace::{reduced_generator, ClassIndex, RelationOptions, TraceVector};
use crate::sigma::{enumerate_triples_with, MultilinearTriple, TripleFilter};

/// `(-1)^|mask & s|` as a sign bit: true when negative.
pub fn character_is_negative(s: u64, mask: u64) -> bool {
    (mask & s).count_ones() % 2 == 1
}

/// Flip orbits of the classes of degree `d`.
#[derive(Debug, Clone)]
pub struct FlipOrbits {
    d: usize,
    classes: ClassIndex,
    /// Orbit of each class.
    orbit_of: Vec<u32>,
    /// The flip taking the orbit representative to the class.
    mask_of: Vec<u64>,
    /// Stabilizer of each orbit representative.
    stabilizers: Vec<Vec<u64>>,
}

impl FlipOrbits {
    pub fn new(d: usize) -> Self {
        let classes = ClassIndex::new(d);
        let mut orbit_of = vec![u32::MAX; classes.len()];
        let mut mask_of = vec![0; classes.len()];
        let mut stabilizers = Vec::new();
        for c in 0..classes.len() {
            if orbit_of[c] != u32::MAX {
                continue;
            }
            let orbit = stabilizers.len() as u32;
            let rep = classes.class(c).clone();
            let mut stab = Vec::new();
            for m in 0..1u64 << d {
                let image = classes.coord(&rep.flip(m)).expect("flips preserve the class space");
                if image == c {
                    stab.push(m);
                }
                if orbit_of[image] == u32::MAX {
                    orbit_of[image] = orbit;
                    mask_of[image] = m;
                }
            }
            stabilizers.push(stab);
        }
        Self { d, classes, orbit_of, mask_of, stabilizers }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> &ClassIndex {
        &self.classes
    }

    pub fn orbit_count(&self) -> usize {
        self.stabilizers.len()
    }

    /// Number of characters, `2^d`.
    pub fn character_count(&self) -> usize {
        1 << self.d
    }

    /// Coordinates of the component of character `s`: for each orbit, its
    /// index in the component or `None` when the orbit does not contribute.
    pub fn component_coords(&self, s: u64) -> ComponentCoords {
        let mut next = 0u32;
        let index = self
            .stabilizers
            .iter()
            .map(|stab| {
                if stab.iter().any(|&m| character_is_negative(s, m)) {
                    u32::MAX
                } else {
                    next += 1;
                    next - 1
                }
            })
            .collect();
        ComponentCoords { character: s, index, dim: next as usize }
    }

    /// Projection onto the component of `coords`, from class coordinates.
    pub fn project<F: Field>(
        &self,
        field: &F,
        coords: &ComponentCoords,
        v: &SparseVector<F::Elem>,
    ) -> SparseVector<F::Elem> {
        let entries = v
            .entries()
            .iter()
            .filter_map(|(c, x)| {
                let i = coords.index[self.orbit_of[*c] as usize];
                (i != u32::MAX).then(|| {
                    let x = if character_is_negative(coords.character, self.mask_of[*c]) {
                        field.neg(x)
                    } else {
                        x.clone()
                    };
                    (i as usize, x)
                })
            })
            .collect();
        SparseVector::from_entries(field, entries)
    }
}

#[derive(Debug, Clone)]
pub struct ComponentCoords {
    character: u64,
    index: Vec<u32>,
    dim: usize,
}

impl ComponentCoords {
    pub fn character(&self) -> u64 {
        self.character
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone)]
pub struct Component<F: Field> {
    coords: ComponentCoords,
    basis: EchelonBasis<F>,
}

impl<F: Field> Component<F> {
    pub fn character(&self) -> u64 {
        self.coords.character
    }

    pub fn dim(&self) -> usize {
        self.coords.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn is_saturated(&self) -> bool {
        self.basis.rank() == self.coords.dim
    }
}

/// The relation space for `(n, d)` as a list of character components, built
/// from undecorated generators only.
#[derive(Debug, Clone)]
pub struct IsotypicSpace<F: Field> {
    n: usize,
    d: usize,
    field: F,
    orbits: FlipOrbits,
    components: Vec<Component<F>>,
    /// Generators that extended some component, referenced by certificates.
    generators: Vec<MultilinearTriple>,
    triples_consumed: usize,
}

/// Builds the component spaces, stopping once every component is full.
pub fn isotypic_relation_span<F: Field>(
    field: &F,
    n: usize,
    d: usize,
    options: RelationOptions,
) -> IsotypicSpace<F> {
    isotypic_relation_span_with(field, n, d, options, |_| {})
}

/// As [`isotypic_relation_span`], calling `on_batch` after every batch.
pub fn isotypic_relation_span_with<F: Field>(
    field: &F,
    n: usize,
    d: usize,
    options: RelationOptions,
    mut on_batch: impl FnMut(&IsotypicSpace<F>),
) -> IsotypicSpace<F> {
    let orbits = FlipOrbits::new(d);
    let components = (0..1u64 << d)
        .map(|s| {
            let coords = orbits.component_coords(s);
            let basis = if options.track_certificates {
                EchelonBasis::with_tracking(field.clone(), coords.dim)
            } else {
                EchelonBasis::new(field.clone(), coords.dim)
            };
            Component { coords, basis }
        })
        .collect();
    let mut space = IsotypicSpace {
        n,
        d,
        field: field.clone(),
        orbits,
        components,
        generators: Vec::new(),
        triples_consumed: 0,
    };
    let filter = TripleFilter { plain_only: true, sorted_labels: false };
    let mut stream = enumerate_triples_with(n, d, filter).peekable();
    let batch_size = options.batch_size.max(1);
    while stream.peek().is_some() && !space.is_saturated() {
        let batch: Vec<MultilinearTriple> = stream.by_ref().take(batch_size).collect();
        let classes = space.orbits.classes();
        let reduced: Vec<SparseVector<F::Elem>> = batch
            .par_iter()
            .map(|t| reduced_generator(field, t).to_sparse(classes))
            .collect();
        for (triple, v) in batch.into_iter().zip(reduced) {
            space.triples_consumed += 1;
            space.absorb(triple, &v);
            if space.is_saturated() {
                break;
            }
        }
        on_batch(&space);
    }
    space
}

impl<F: Field> IsotypicSpace<F> {
    fn absorb(&mut self, triple: MultilinearTriple, v: &SparseVector<F::Elem>) {
        let tag = self.generators.len();
        let mut used = false;
        for comp in self.components.iter_mut().filter(|c| !c.is_saturated()) {
            let p = self.orbits.project(&self.field, &comp.coords, v);
            if let InsertOutcome::Extended { .. } =
                comp.basis.insert_tagged(&p, tag).expect("coordinates are component indices")
            {
                used = true;
            }
        }
        if used {
            self.generators.push(triple);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> &[Component<F>] {
        &self.components
    }

    pub fn generators(&self) -> &[MultilinearTriple] {
        &self.generators
    }

    pub fn triples_consumed(&self) -> usize {
        self.triples_consumed
    }

    /// Total rank, equal to the rank of the undivided relation space.
    pub fn rank(&self) -> usize {
        self.components.iter().map(Component::rank).sum()
    }

    pub fn basis_size(&self) -> usize {
        self.orbits.classes().len()
    }

    pub fn quotient_dim(&self) -> usize {
        self.basis_size() - self.rank()
    }

    pub fn is_saturated(&self) -> bool {
        self.components.iter().all(Component::is_saturated)
    }

    /// Decides `target` component by component.
    pub fn decide(&self, target: &TraceVector<F>) -> Result<IsotypicDecision<F>, crate::relspace::RelationError> {
        if target.d() != self.d {
            return Err(crate::relspace::RelationError::DegreeMismatch { expected: self.d, found: target.d() });
        }
        let v = target.to_sparse(self.orbits.classes());
        let components = self
            .components
            .iter()
            .map(|comp| {
                let p = self.orbits.project(&self.field, &comp.coords, &v);
                let outcome = match comp.basis.membership(&p).expect("coordinates are component indices") {
                    Membership::Combination { tags, .. } => ComponentOutcome::Absorbed {
                        terms: tags.into_entries(),
                    },
                    Membership::Residue(r) => ComponentOutcome::Residue { nonzeros: r.nnz() },
                };
                (comp.character(), outcome)
            })
            .collect();
        Ok(IsotypicDecision { components })
    }

    /// Replays every absorbed component's certificate against the target.
    /// Needs certificate tracking.
    pub fn verify(&self, target: &TraceVector<F>, decision: &IsotypicDecision<F>) -> bool {
        let f = &self.field;
        let v = target.to_sparse(self.orbits.classes());
        decision.components.iter().all(|(s, outcome)| {
            let comp = &self.components[*s as usize];
            let expected = self.orbits.project(f, &comp.coords, &v);
            match outcome {
                ComponentOutcome::Absorbed { terms } => {
                    let projected: Vec<(F::Elem, SparseVector<F::Elem>)> = terms
                        .iter()
                        .map(|(g, c)| {
                            let gv = reduced_generator(f, &self.generators[*g]).to_sparse(self.orbits.classes());
                            (c.clone(), self.orbits.project(f, &comp.coords, &gv))
                        })
                        .collect();
                    let replay = SparseVector::linear_combination(f, projected.iter().map(|(c, p)| (c, p)));
                    replay == expected
                }
                ComponentOutcome::Residue { .. } => comp.basis.membership(&expected).is_ok_and(|m| matches!(m, Membership::Residue(_))),
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum ComponentOutcome<E> {
    /// The projection of the target is `sum c * projection(generator g)`.
    Absorbed { terms: Vec<(usize, E)> },
    /// The projection is not in the component span.
    Residue { nonzeros: usize },
}

#[derive(Debug, Clone)]
pub struct IsotypicDecision<F: Field> {
    /// Outcome per character, indexed by the character mask.
    pub components: Vec<(u64, ComponentOutcome<F::Elem>)>,
}

impl<F: Field> IsotypicDecision<F> {
    pub fn is_decomposable(&self) -> bool {
        self.components.iter().all(|(_, o)| matches!(o, ComponentOutcome::Absorbed { .. }))
    }

    /// Characters whose component does not absorb the target.
    pub fn obstructions(&self) -> impl Iterator<Item = u64> + '_ {
        self.components
            .iter()
            .filter(|(_, o)| matches!(o, ComponentOutcome::Residue { .. }))
            .map(|(s, _)| *s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};
    use crate::relspace::relation_span;

    #[test]
    fn orbit_sizes_add_up() {
        for d in 1..=5 {
            let o = FlipOrbits::new(d);
            let total: usize = (0..1u64 << d).map(|s| o.component_coords(s).dim()).sum();
            assert_eq!(total, o.classes().len(), "d = {d}");
        }
    }

    #[test]
    fn flip_action_is_free_from_degree_three() {
        for d in 3..=5 {
            let o = FlipOrbits::new(d);
            assert_eq!(o.orbit_count() << d, o.classes().len());
        }
    }

    #[test]
    fn matches_direct_span() {
        let f = PrimeField::new(3).unwrap();
        for (n, d) in [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)] {
            let direct = relation_span(&f, n, d, RelationOptions::default());
            let split = isotypic_relation_span(&f, n, d, RelationOptions::default());
            assert_eq!(direct.rank(), split.rank(), "n = {n}, d = {d}");
        }
        let q = Rationals;
        let direct = relation_span(&q, 2, 4, RelationOptions::default());
        let split = isotypic_relation_span(&q, 2, 4, RelationOptions::default());
        assert_eq!(direct.rank(), split.rank());
    }

    #[test]
    fn decisions_match_direct_and_replay() {
        let f = PrimeField::new(3).unwrap();
        let split = isotypic_relation_span(&f, 2, 4, RelationOptions::default());
        let direct = relation_span(&f, 2, 4, RelationOptions::default());
        for mask in [0u64, 1, 5, 15] {
            let mut target = TraceVector::zero(f, 4);
            target.add_word(&crate::relspace::decorated_identity(4, mask), &f.one()).unwrap();
            let a = split.decide(&target).unwrap();
            let b = direct.decide(&target).unwrap();
            assert_eq!(a.is_decomposable(), b.is_decomposable(), "mask {mask}");
            assert!(split.verify(&target, &a));
        }
    }
}
