//! Multilinear triples `(u, v, w)`, closed paths in the two-vertex quiver
//! built from them, and the signed path sums that generate the type-(c)
//! relations.
//!
//! Quiver layout, with `t = |u|` and `r = |v| = |w|`:
//!
//! ```text
//!   loops u_1 .. u_t          at vertex 1
//!   loops u_1^T .. u_t^T      at vertex 2
//!   v_j, v_j^T                vertex 1 -> vertex 2
//!   w_j, w_j^T                vertex 2 -> vertex 1
//! ```
//!
//! A path `a_1 a_2 ... a_s` composes when each arrow ends where the next one
//! starts. The closed paths counted here start with the plain loop `u_1`,
//! have length `t + 2r` and use every label exactly once, either plain or
//! transposed. Reading the labels along a path gives a word; a transposed
//! label contributes the involute of its word.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use thiserror::Error;

use crate::words::{Letter, Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TripleError {
    #[error("u must contain at least one word")]
    EmptyU,
    #[error("v and w must have the same length ({v} != {w})")]
    Unbalanced { v: usize, w: usize },
    #[error("the concatenation u v w is not multilinear")]
    NotMultilinear,
    #[error("malformed triple: {0}")]
    Syntax(String),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// The data `(u, v, w)` of a type-(c) generator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultilinearTriple {
    u: Vec<Word>,
    v: Vec<Word>,
    w: Vec<Word>,
}

impl MultilinearTriple {
    pub fn new(u: Vec<Word>, v: Vec<Word>, w: Vec<Word>) -> Result<Self, TripleError> {
        if u.is_empty() {
            return Err(TripleError::EmptyU);
        }
        if v.len() != w.len() {
            return Err(TripleError::Unbalanced { v: v.len(), w: w.len() });
        }
        let triple = Self { u, v, w };
        let all = triple.concatenation();
        if !all.is_multilinear_for(all.len()) {
            return Err(TripleError::NotMultilinear);
        }
        Ok(triple)
    }

    /// Triple of single plain letters `u = (x1..xt)`, `v = (x(t+1)..)`,
    /// `w = (..x(t+2r))`.
    pub fn plain_letters(t: usize, r: usize) -> Self {
        let letter = |k: usize| Word::new(vec![Letter::plain(k as u16)]).unwrap();
        Self {
            u: (1..=t).map(letter).collect(),
            v: (t + 1..=t + r).map(letter).collect(),
            w: (t + r + 1..=t + 2 * r).map(letter).collect(),
        }
    }

    pub fn u(&self) -> &[Word] {
        &self.u
    }

    pub fn v(&self) -> &[Word] {
        &self.v
    }

    pub fn w(&self) -> &[Word] {
        &self.w
    }

    pub fn t(&self) -> usize {
        self.u.len()
    }

    pub fn r(&self) -> usize {
        self.v.len()
    }

    /// Total number of letters, i.e. the degree of the generator.
    pub fn degree(&self) -> usize {
        self.words().map(Word::len).sum()
    }

    pub fn concatenation(&self) -> Word {
        Word::concat(self.words())
    }

    fn words(&self) -> impl Iterator<Item = &Word> {
        self.u.iter().chain(&self.v).chain(&self.w)
    }

    fn word_of(&self, label: ArrowLabel) -> Word {
        let w = match label.slot {
            Slot::U => &self.u[label.position],
            Slot::V => &self.v[label.position],
            Slot::W => &self.w[label.position],
        };
        if label.transposed {
            w.involute()
        } else {
            w.clone()
        }
    }

    /// Applies [`Word::flip`] to every word.
    pub fn flip(&self, mask: u64) -> Self {
        let f = |ws: &[Word]| ws.iter().map(|w| w.flip(mask)).collect();
        Self { u: f(&self.u), v: f(&self.v), w: f(&self.w) }
    }

    pub fn is_plain(&self) -> bool {
        self.words().all(|w| w.letters().iter().all(|l| !l.starred))
    }
}

impl fmt::Display for MultilinearTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |ws: &[Word]| ws.iter().map(|w| w.to_string()).join("|");
        write!(f, "u=[{}] v=[{}] w=[{}]", list(&self.u), list(&self.v), list(&self.w))
    }
}

impl FromStr for MultilinearTriple {
    type Err = TripleError;

    /// Parses `u=[x1|x2 x3'] v=[x4] w=[x5]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rest = s.trim_start();
        let mut parts: [Vec<Word>; 3] = Default::default();
        for (i, key) in ["u=[", "v=[", "w=["].iter().enumerate() {
            rest = rest
                .strip_prefix(key)
                .ok_or_else(|| TripleError::Syntax(format!("expected {key:?}")))?;
            let end = rest
                .find(']')
                .ok_or_else(|| TripleError::Syntax("missing ']'".into()))?;
            let body = &rest[..end];
            if !body.trim().is_empty() {
                for word in body.split('|') {
                    parts[i].push(word.parse()?);
                }
            }
            rest = rest[end + 1..].trim_start();
        }
        if !rest.is_empty() {
            return Err(TripleError::Syntax(format!("trailing input {rest:?}")));
        }
        let [u, v, w] = parts;
        Self::new(u, v, w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    U,
    V,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArrowLabel {
    pub slot: Slot,
    /// 0-based position inside `u`, `v` or `w`.
    pub position: usize,
    pub transposed: bool,
}

impl fmt::Display for ArrowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.slot {
            Slot::U => 'u',
            Slot::V => 'v',
            Slot::W => 'w',
        };
        write!(f, "{s}{}", self.position + 1)?;
        if self.transposed {
            f.write_str("^T")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    One,
    Two,
}

/// An arrow of the quiver. `head` is the vertex the arrow leaves and `tail`
/// the vertex it enters, so `a b` composes when `a.tail == b.head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuiverArrow {
    pub label: ArrowLabel,
    pub head: Vertex,
    pub tail: Vertex,
}

impl QuiverArrow {
    pub fn of(label: ArrowLabel) -> Self {
        let (head, tail) = match (label.slot, label.transposed) {
            (Slot::U, false) => (Vertex::One, Vertex::One),
            (Slot::U, true) => (Vertex::Two, Vertex::Two),
            (Slot::V, _) => (Vertex::One, Vertex::Two),
            (Slot::W, _) => (Vertex::Two, Vertex::One),
        };
        Self { label, head, tail }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedPath {
    pub arrows: Vec<QuiverArrow>,
    /// `(-1)^xi` with `xi = t + #(plain v arrows) + #(plain w arrows)`.
    pub sign: i8,
}

impl SignedPath {
    pub fn labels(&self) -> impl Iterator<Item = ArrowLabel> + '_ {
        self.arrows.iter().map(|a| a.label)
    }

    pub fn word(&self, triple: &MultilinearTriple) -> Word {
        let parts: Vec<Word> = self.labels().map(|l| triple.word_of(l)).collect();
        Word::concat(&parts)
    }
}

impl fmt::Display for SignedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.sign > 0 { "+" } else { "-" })?;
        for a in &self.arrows {
            write!(f, " {}", a.label)?;
        }
        Ok(())
    }
}

/// The closed-path set of a triple, in depth-first order (labels tried as
/// `u`, `v`, `w` by position, plain before transposed).
pub fn omega(triple: &MultilinearTriple) -> Vec<SignedPath> {
    let t = triple.t();
    let r = triple.r();
    let labels: Vec<(Slot, usize)> = (0..t)
        .map(|i| (Slot::U, i))
        .chain((0..r).map(|j| (Slot::V, j)))
        .chain((0..r).map(|j| (Slot::W, j)))
        .collect();
    let first = QuiverArrow::of(ArrowLabel { slot: Slot::U, position: 0, transposed: false });
    let mut out = Vec::new();
    let mut path = vec![first];
    extend_paths(&labels, 1, first.tail, &mut path, &mut out, t);
    out
}

fn extend_paths(
    labels: &[(Slot, usize)],
    used: u64,
    at: Vertex,
    path: &mut Vec<QuiverArrow>,
    out: &mut Vec<SignedPath>,
    t: usize,
) {
    if path.len() == labels.len() {
        if at == Vertex::One {
            let plain_crossings = path
                .iter()
                .filter(|a| a.label.slot != Slot::U && !a.label.transposed)
                .count();
            let sign = if (t + plain_crossings) % 2 == 0 { 1 } else { -1 };
            out.push(SignedPath { arrows: path.clone(), sign });
        }
        return;
    }
    for (i, &(slot, position)) in labels.iter().enumerate() {
        if used >> i & 1 == 1 {
            continue;
        }
        for transposed in [false, true] {
            let arrow = QuiverArrow::of(ArrowLabel { slot, position, transposed });
            if arrow.head != at {
                continue;
            }
            path.push(arrow);
            extend_paths(labels, used | 1 << i, arrow.tail, path, out, t);
            path.pop();
        }
    }
}

/// A formal integer combination of trace words, before reduction modulo
/// rotation and involution.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawTraceSum {
    pub terms: Vec<(i64, Word)>,
}

impl RawTraceSum {
    pub fn coefficient_sum(&self) -> i64 {
        self.terms.iter().map(|(c, _)| c).sum()
    }
}

impl fmt::Display for RawTraceSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (c, w)) in self.terms.iter().enumerate() {
            match (i, *c < 0) {
                (0, false) => write!(f, "{c}*tr({w})")?,
                (0, true) => write!(f, "-{}*tr({w})", -c)?,
                (_, false) => write!(f, " + {c}*tr({w})")?,
                (_, true) => write!(f, " - {}*tr({w})", -c)?,
            }
        }
        Ok(())
    }
}

/// The signed sum over closed paths, with equal words merged.
pub fn sigma_lin(triple: &MultilinearTriple) -> RawTraceSum {
    let mut acc: BTreeMap<Word, i64> = BTreeMap::new();
    for path in omega(triple) {
        *acc.entry(path.word(triple)).or_default() += path.sign as i64;
    }
    RawTraceSum { terms: acc.into_iter().filter(|(_, c)| *c != 0).map(|(w, c)| (c, w)).collect() }
}

/// Which triples [`enumerate_triples_with`] produces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TripleFilter {
    /// Only undecorated letters.
    pub plain_only: bool,
    /// Only the identity ordering of the letters `x1 .. xd` along `u v w`.
    /// Relabelling letters permutes generators, so this keeps one
    /// representative per relabelling orbit.
    pub sorted_labels: bool,
}

/// Shapes `(t, r)` with `t >= 1`, `n < t + 2r <= d`, in lexicographic order.
pub fn triple_shapes(n: usize, d: usize) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for t in 1..=d {
        for r in 0..=(d - t) / 2 {
            if t + 2 * r > n {
                shapes.push((t, r));
            }
        }
    }
    shapes
}

/// All multilinear triples of degree `d` with `|u| + 2|v| > n`.
pub fn enumerate_triples(n: usize, d: usize) -> impl Iterator<Item = MultilinearTriple> + Send {
    enumerate_triples_with(n, d, TripleFilter::default())
}

/// Lazily enumerates triples ordered by shape `(t, r)`, then by the ordering
/// of the letters and the cut points splitting it into words, then by the
/// decoration mask (bit `k - 1` stars `x_k`).
pub fn enumerate_triples_with(
    n: usize,
    d: usize,
    filter: TripleFilter,
) -> impl Iterator<Item = MultilinearTriple> + Send {
    assert!(d <= 16, "degree {d} is beyond the supported range");
    triple_shapes(n, d).into_iter().flat_map(move |(t, r)| {
        let k = t + 2 * r;
        let orders: Box<dyn Iterator<Item = Vec<u16>> + Send> = if filter.sorted_labels {
            Box::new(std::iter::once((1..=d as u16).collect()))
        } else {
            Box::new((1..=d as u16).permutations(d))
        };
        orders.flat_map(move |order| {
            (1..d).combinations(k - 1).flat_map(move |cuts| {
                let masks = if filter.plain_only { 0..1u64 } else { 0..1u64 << d };
                let order = order.clone();
                masks.map(move |mask| build_triple(&order, &cuts, mask, t, r))
            })
        })
    })
}

fn build_triple(order: &[u16], cuts: &[usize], mask: u64, t: usize, r: usize) -> MultilinearTriple {
    let bounds: Vec<usize> = std::iter::once(0)
        .chain(cuts.iter().copied())
        .chain(std::iter::once(order.len()))
        .collect();
    let mut words: Vec<Word> = bounds
        .windows(2)
        .map(|b| {
            let letters = order[b[0]..b[1]]
                .iter()
                .map(|&index| Letter { index, starred: mask >> (index - 1) & 1 == 1 })
                .collect();
            Word::new(letters).unwrap()
        })
        .collect();
    let w = words.split_off(t + r);
    let v = words.split_off(t);
    MultilinearTriple { u: words, v, w }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn omega_anchor_counts() {
        assert_eq!(omega(&MultilinearTriple::plain_letters(3, 0)).len(), 2);
        assert_eq!(omega(&MultilinearTriple::plain_letters(1, 1)).len(), 4);
        assert_eq!(omega(&MultilinearTriple::plain_letters(2, 1)).len(), 12);
    }

    #[test]
    fn omega_t1_r1_paths() {
        let got: Vec<String> =
            omega(&MultilinearTriple::plain_letters(1, 1)).iter().map(|p| p.to_string()).collect();
        assert_eq!(got, ["- u1 v1 w1", "+ u1 v1 w1^T", "+ u1 v1^T w1", "- u1 v1^T w1^T"]);
    }

    #[test]
    fn sigma_lin_examples() {
        assert_eq!(sigma_lin(&MultilinearTriple::plain_letters(2, 0)).to_string(), "1*tr(x1 x2)");
        assert_eq!(
            sigma_lin(&MultilinearTriple::plain_letters(3, 0)).to_string(),
            "-1*tr(x1 x2 x3) - 1*tr(x1 x3 x2)"
        );
        assert_eq!(
            sigma_lin(&MultilinearTriple::plain_letters(1, 1)).to_string(),
            "-1*tr(x1 x2 x3) + 1*tr(x1 x2 x3') + 1*tr(x1 x2' x3) - 1*tr(x1 x2' x3')"
        );
    }

    #[test]
    fn transposed_loops_contribute_involutes() {
        let t: MultilinearTriple = "u=[x1|x2 x3'] v=[x4] w=[x5]".parse().unwrap();
        let words: Vec<Word> = omega(&t).iter().map(|p| p.word(&t)).collect();
        assert!(words.contains(&word("x1 x4 x3 x2' x5")));
        assert!(words.contains(&word("x1 x2 x3' x4 x5")));
    }

    #[test]
    fn triple_text_round_trip() {
        let s = "u=[x1|x2 x3'] v=[x4] w=[x5]";
        let t: MultilinearTriple = s.parse().unwrap();
        assert_eq!(t.to_string(), s);
        let t: MultilinearTriple = "u=[x2|x1] v=[] w=[]".parse().unwrap();
        assert_eq!(t.to_string(), "u=[x2|x1] v=[] w=[]");
    }

    #[test]
    fn triple_validation() {
        assert_eq!("u=[] v=[] w=[]".parse::<MultilinearTriple>(), Err(TripleError::EmptyU));
        assert_eq!(
            "u=[x1] v=[x2] w=[]".parse::<MultilinearTriple>(),
            Err(TripleError::Unbalanced { v: 1, w: 0 })
        );
        assert_eq!(
            "u=[x1|x1'] v=[] w=[]".parse::<MultilinearTriple>(),
            Err(TripleError::NotMultilinear)
        );
        assert_eq!(
            "u=[x1|x3] v=[] w=[]".parse::<MultilinearTriple>(),
            Err(TripleError::NotMultilinear)
        );
        assert!(matches!("u=[x1] w=[]".parse::<MultilinearTriple>(), Err(TripleError::Syntax(_))));
    }

    #[test]
    fn triple_enumeration_shapes() {
        assert_eq!(enumerate_triples(3, 3).count(), 0);
        assert_eq!(triple_shapes(2, 3), vec![(1, 1), (3, 0)]);
        assert_eq!(triple_shapes(1, 2), vec![(2, 0)]);
        // 2 letter orders x 4 decorations, one cut
        assert_eq!(enumerate_triples(1, 2).count(), 8);
        let shapes: Vec<(usize, usize)> =
            enumerate_triples(2, 3).map(|t| (t.t(), t.r())).dedup().collect();
        assert_eq!(shapes, vec![(1, 1), (3, 0)]);
    }

    #[test]
    fn triple_enumeration_is_multilinear_and_unique() {
        let all: Vec<MultilinearTriple> = enumerate_triples(2, 4).collect();
        let unique: std::collections::BTreeSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
        for t in &all {
            assert!(t.concatenation().is_multilinear_for(4));
            assert!(t.t() + 2 * t.r() > 2);
        }
        let filter = TripleFilter { plain_only: true, sorted_labels: true };
        let reps: Vec<_> = enumerate_triples_with(2, 4, filter).collect();
        // shapes (1,1): C(3,2) cuts, (2,1): 1, (3,0): C(3,2), (4,0): 1
        assert_eq!(reps.len(), 3 + 1 + 3 + 1);
        assert!(reps.iter().all(|t| t.is_plain()));
    }
}
