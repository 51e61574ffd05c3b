//! Letters, decorated words and their canonical forms modulo cyclic rotation
//! and the transpose involution.
//!
//! Words are written `x1 x2' x3`: `x<k>` is the k-th generic matrix and a
//! trailing apostrophe marks its transpose. Words compare lexicographically on
//! `(index, starred)` pairs with the unstarred letter first, and the canonical
//! representative of a trace word is the smallest of its `2 * len` rotations
//! and involute-rotations under that order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("empty word")]
    Empty,
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("letter x{0} occurs more than once")]
    RepeatedIndex(u16),
    #[error("word is not multilinear for d = {d}")]
    NotMultilinear { d: usize },
    #[error("index x{index} out of range 1..={d}")]
    IndexOutOfRange { index: u16, d: usize },
}

/// The letter `x_k` or its transpose `x_k^T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub index: u16,
    pub starred: bool,
}

impl Letter {
    pub fn plain(index: u16) -> Self {
        Self { index, starred: false }
    }

    pub fn starred(index: u16) -> Self {
        Self { index, starred: true }
    }

    pub fn transposed(self) -> Self {
        Self { index: self.index, starred: !self.starred }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.index)?;
        if self.starred {
            f.write_str("'")?;
        }
        Ok(())
    }
}

/// A nonempty word in the letters `x_k`, `x_k^T`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Result<Self, WordError> {
        if letters.is_empty() {
            return Err(WordError::Empty);
        }
        Ok(Self(letters))
    }

    /// `x1 x2 ... xd`
    pub fn identity(d: usize) -> Self {
        Self((1..=d as u16).map(Letter::plain).collect())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reverses the word and toggles every star.
    pub fn involute(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.transposed()).collect())
    }

    /// Cyclic left rotation by `k` positions.
    pub fn rotate(&self, k: usize) -> Word {
        let mut letters = self.0.clone();
        letters.rotate_left(k % self.0.len());
        Word(letters)
    }

    /// Toggles the star of every letter whose index is in `mask` (bit `k - 1`
    /// for `x_k`).
    pub fn flip(&self, mask: u64) -> Word {
        Word(
            self.0
                .iter()
                .map(|l| if mask >> (l.index - 1) & 1 == 1 { l.transposed() } else { *l })
                .collect(),
        )
    }

    /// Bitmask of the indices that occur (bit `k - 1` for `x_k`).
    pub fn support(&self) -> u64 {
        self.0.iter().fold(0, |m, l| m | 1 << (l.index - 1))
    }

    /// Every index occurs at most once.
    pub fn has_distinct_indices(&self) -> bool {
        self.0.iter().map(|l| l.index).all_unique()
    }

    /// Every index `1..=d` occurs exactly once.
    pub fn is_multilinear_for(&self, d: usize) -> bool {
        self.0.len() == d
            && self.has_distinct_indices()
            && self.0.iter().all(|l| l.index >= 1 && l.index as usize <= d)
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Word>) -> Word {
        Word(parts.into_iter().flat_map(|w| w.0.iter().copied()).collect())
    }

    pub fn is_uniformly_decorated(&self) -> bool {
        self.0.iter().map(|l| l.starred).all_equal()
    }

    /// Parses `x1 x2' x3`. Byte positions in errors are offsets into `text`
    /// plus `offset`.
    pub fn parse_at(text: &str, offset: usize) -> Result<Word, WordError> {
        let mut letters = Vec::new();
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            if c != b'x' {
                return Err(WordError::Syntax {
                    pos: offset + i,
                    msg: format!("expected 'x', found {:?}", c as char),
                });
            }
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j == start {
                return Err(WordError::Syntax {
                    pos: offset + start,
                    msg: "expected a matrix index after 'x'".into(),
                });
            }
            let index: u16 = text[start..j].parse().map_err(|_| WordError::Syntax {
                pos: offset + start,
                msg: "matrix index too large".into(),
            })?;
            if index == 0 {
                return Err(WordError::Syntax {
                    pos: offset + start,
                    msg: "matrix indices start at 1".into(),
                });
            }
            let starred = j < bytes.len() && bytes[j] == b'\'';
            if starred {
                j += 1;
            }
            if j < bytes.len() && !bytes[j].is_ascii_whitespace() {
                return Err(WordError::Syntax {
                    pos: offset + j,
                    msg: format!("unexpected {:?}", bytes[j] as char),
                });
            }
            letters.push(Letter { index, starred });
            i = j;
        }
        if letters.is_empty() {
            return Err(WordError::Syntax { pos: offset, msg: "empty word".into() });
        }
        Ok(Word(letters))
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Word::parse_at(s, 0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A trace word reduced modulo rotation and involution.
///
/// The wrapped word is the minimum over all rotations of the word and of its
/// involute. Only words with pairwise distinct indices have a canonical class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalTraceWord(Word);

impl CanonicalTraceWord {
    pub fn new(w: &Word) -> Result<Self, WordError> {
        if !w.has_distinct_indices() {
            let repeated = w.letters().iter().map(|l| l.index).duplicates().next().unwrap();
            return Err(WordError::RepeatedIndex(repeated));
        }
        Ok(Self::of_distinct(w))
    }

    /// Canonical class of a word already known to have distinct indices.
    pub(crate) fn of_distinct(w: &Word) -> Self {
        let letters = w.letters();
        let len = letters.len();
        let inv = w.involute();
        let inv = inv.letters();
        // (source, start) of the best candidate so far
        let mut best: (&[Letter], usize) = (letters, 0);
        for (src, start) in (0..len).map(|k| (letters, k)).chain((0..len).map(|k| (inv, k))) {
            if cyclic_cmp(src, start, best.0, best.1) == std::cmp::Ordering::Less {
                best = (src, start);
            }
        }
        let (src, start) = best;
        Self(Word((0..len).map(|i| src[(start + i) % len]).collect()))
    }

    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flip(&self, mask: u64) -> Self {
        Self::of_distinct(&self.0.flip(mask))
    }

    /// All letters plain or all letters starred. Rotation keeps this
    /// property and involution swaps the two cases.
    pub fn is_uniformly_decorated(&self) -> bool {
        self.0.is_uniformly_decorated()
    }
}

fn cyclic_cmp(a: &[Letter], sa: usize, b: &[Letter], sb: usize) -> std::cmp::Ordering {
    let len = a.len();
    for i in 0..len {
        let o = a[(sa + i) % len].cmp(&b[(sb + i) % len]);
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

impl fmt::Display for CanonicalTraceWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn involute(w: &Word) -> Word {
    w.involute()
}

pub fn rotate(w: &Word, k: usize) -> Word {
    w.rotate(k)
}

/// Canonical class of a word that is multilinear for `d`.
pub fn canonical_class(w: &Word, d: usize) -> Result<CanonicalTraceWord, WordError> {
    if !w.is_multilinear_for(d) {
        return Err(WordError::NotMultilinear { d });
    }
    Ok(CanonicalTraceWord::of_distinct(w))
}

/// All canonical classes of multilinear words of length `d`, sorted.
///
/// Every class has a representative starting with `x1` or `x1'`, and the
/// involution turns a leading `x1'` into a trailing `x1`, so fixing a plain
/// leading `x1` and rotating covers every class.
pub fn enumerate_basis(d: usize) -> Vec<CanonicalTraceWord> {
    assert!(d >= 1, "d must be positive");
    let mut classes = BTreeSet::new();
    for rest in (2..=d as u16).permutations(d - 1) {
        for mask in 0u64..(1 << (d - 1)) {
            let mut letters = Vec::with_capacity(d);
            letters.push(Letter::plain(1));
            letters.extend(
                rest.iter()
                    .enumerate()
                    .map(|(i, &index)| Letter { index, starred: mask >> i & 1 == 1 }),
            );
            classes.insert(CanonicalTraceWord::of_distinct(&Word(letters)));
        }
    }
    classes.into_iter().collect()
}

/// Closed-form class count: `2^(d-1) (d-1)!` for `d >= 3`.
pub fn basis_size(d: usize) -> usize {
    match d {
        0 => 0,
        1 => 1,
        2 => 2,
        _ => (1..d).product::<usize>() << (d - 1),
    }
}

/// Canonical classes of words on an arbitrary set of indices, sorted.
pub(crate) fn classes_on(indices: &[u16]) -> Vec<CanonicalTraceWord> {
    let Some((&first, rest)) = indices.split_first() else {
        return Vec::new();
    };
    let mut classes = BTreeSet::new();
    for perm in rest.iter().copied().permutations(rest.len()) {
        for mask in 0u64..(1 << rest.len()) {
            let mut letters = vec![Letter::plain(first)];
            letters.extend(
                perm.iter()
                    .enumerate()
                    .map(|(i, &index)| Letter { index, starred: mask >> i & 1 == 1 }),
            );
            classes.insert(CanonicalTraceWord::of_distinct(&Word(letters)));
        }
    }
    classes.into_iter().collect()
}
