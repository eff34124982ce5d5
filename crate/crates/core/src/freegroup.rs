//! Words and automorphisms of a free group of finite rank.
//!
//! Letters are index+sign pairs; the I/O convention maps generator `i` to
//! the lowercase ASCII letter `'a' + i` and its inverse to the uppercase
//! letter, with `1` denoting the empty word. Words are always freely
//! reduced; cyclic words are always cyclically reduced and can be put in a
//! canonical form (lexicographically least rotation of the word or its
//! inverse) that identifies a conjugacy class together with its inverse
//! class.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum FreeGroupError {
    #[error("rank mismatch: automorphism has rank {aut}, word uses generator index {word}")]
    RankMismatch { aut: usize, word: usize },
    #[error("ranks differ: {left} vs {right}")]
    RankDiffer { left: usize, right: usize },
    #[error("endomorphism is not invertible: {0}")]
    NotInvertible(String),
    #[error("image of generator {0} is empty after reduction")]
    EmptyImage(char),
    #[error("rank must be at least 1, got {0}")]
    RankTooSmall(usize),
    #[error("invalid word literal: {0}")]
    BadLiteral(String),
    #[error("operation requires a nontrivial word")]
    TrivialWord,
}

/// A signed generator. Internally a nonzero integer: `+(i+1)` is generator
/// `i`, `-(i+1)` is its inverse.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter(i32);

impl Letter {
    pub fn positive(index: usize) -> Letter {
        Letter(index as i32 + 1)
    }

    pub fn negative(index: usize) -> Letter {
        Letter(-(index as i32 + 1))
    }

    pub fn new(index: usize, positive: bool) -> Letter {
        if positive {
            Letter::positive(index)
        } else {
            Letter::negative(index)
        }
    }

    pub fn index(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    /// Slot in `[0, 2*rank)`: generator index doubled, +1 for inverses.
    /// Used as an adjacency index by the graph modules.
    pub fn slot(self) -> usize {
        2 * self.index() + usize::from(!self.is_positive())
    }

    pub fn from_slot(slot: usize) -> Letter {
        Letter::new(slot / 2, slot % 2 == 0)
    }

    pub fn parse(c: char) -> Result<Letter, FreeGroupError> {
        if c.is_ascii_lowercase() {
            Ok(Letter::positive(c as usize - 'a' as usize))
        } else if c.is_ascii_uppercase() {
            Ok(Letter::negative(c as usize - 'A' as usize))
        } else {
            Err(FreeGroupError::BadLiteral(format!("bad letter {c:?}")))
        }
    }

    pub fn to_char(self) -> char {
        let base = if self.is_positive() { b'a' } else { b'A' };
        (base + self.index() as u8) as char
    }
}

// The I/O order a < A < b < B < ... (index first, positive before negative),
// used for canonical forms everywhere.
impl Ord for Letter {
    fn cmp(&self, other: &Letter) -> Ordering {
        self.slot().cmp(&other.slot())
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Letter) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word. The reduction invariant is maintained by every
/// constructor; appends cancel against the tail in O(1) amortized time.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn single(l: Letter) -> Word {
        Word(vec![l])
    }

    /// Freely reduce an arbitrary letter sequence. Idempotent.
    pub fn reduce<I: IntoIterator<Item = Letter>>(letters: I) -> Word {
        let mut w = Word::empty();
        for l in letters {
            w.push(l);
        }
        w
    }

    /// Parse a word literal: lowercase = generator, uppercase = inverse,
    /// `1` (alone) = empty word.
    pub fn parse(s: &str) -> Result<Word, FreeGroupError> {
        let s = s.trim();
        if s == "1" || s.is_empty() {
            return Ok(Word::empty());
        }
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            letters.push(Letter::parse(c)?);
        }
        Ok(Word::reduce(letters))
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

    /// Append with cancellation.
    pub fn push(&mut self, l: Letter) {
        if self.0.last() == Some(&l.inverse()) {
            self.0.pop();
        } else {
            self.0.push(l);
        }
    }

    pub fn extend_reduced<I: IntoIterator<Item = Letter>>(&mut self, letters: I) {
        for l in letters {
            self.push(l);
        }
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut w = self.clone();
        w.extend_reduced(other.0.iter().copied());
        w
    }

    /// u·w·u⁻¹, reduced.
    pub fn conjugate_by(&self, u: &Word) -> Word {
        u.concat(self).concat(&u.inverse())
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::empty();
        for _ in 0..k.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Largest generator index used, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.0.iter().map(|l| l.index()).max()
    }

    pub fn fits_rank(&self, rank: usize) -> bool {
        self.max_index().map_or(true, |m| m < rank)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        for l in &self.0 {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A cyclically reduced word standing for a conjugacy class. The canonical
/// form is the lex-least rotation among all rotations of the word and of
/// its inverse, so a class and its inverse class share one representative.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclicWord {
    letters: Vec<Letter>,
    canonical: bool,
}

impl CyclicWord {
    /// Cyclically reduce a reduced word: returns `(c, u)` with
    /// `w = u·c·u⁻¹` and `c` cyclically reduced (not canonicalized).
    pub fn cyclic_reduce(w: &Word) -> (CyclicWord, Word) {
        let l = w.letters();
        let mut i = 0;
        let mut j = l.len();
        while j - i >= 2 && l[i] == l[j - 1].inverse() {
            i += 1;
            j -= 1;
        }
        let conj = Word(l[..i].to_vec());
        let core = l[i..j].to_vec();
        (
            CyclicWord {
                letters: core,
                canonical: false,
            },
            conj,
        )
    }

    /// Canonical representative of the class of `w` (and of `w⁻¹`).
    pub fn canonical_of(w: &Word) -> CyclicWord {
        Self::cyclic_reduce(w).0.canonicalize()
    }

    pub fn from_letters_unchecked(letters: Vec<Letter>, canonical: bool) -> CyclicWord {
        CyclicWord { letters, canonical }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn as_word(&self) -> Word {
        Word(self.letters.clone())
    }

    pub fn rotation(&self, r: usize) -> Vec<Letter> {
        let n = self.letters.len();
        (0..n).map(|i| self.letters[(i + r) % n]).collect()
    }

    pub fn inverse_letters(&self) -> Vec<Letter> {
        self.letters.iter().rev().map(|l| l.inverse()).collect()
    }

    pub fn canonicalize(&self) -> CyclicWord {
        if self.canonical || self.letters.is_empty() {
            return CyclicWord {
                letters: self.letters.clone(),
                canonical: true,
            };
        }
        let fwd = least_rotation(&self.letters);
        let inv = self.inverse_letters();
        let bwd = least_rotation(&inv);
        let best = if cmp_letters(&fwd, &bwd) != Ordering::Greater {
            fwd
        } else {
            bwd
        };
        CyclicWord {
            letters: best,
            canonical: true,
        }
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

fn cmp_letters(a: &[Letter], b: &[Letter]) -> Ordering {
    a.iter()
        .map(|l| l.slot())
        .cmp(b.iter().map(|l| l.slot()))
}

/// Booth's least-rotation algorithm under the letter order.
fn least_rotation(v: &[Letter]) -> Vec<Letter> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let key = |i: usize| v[i % n].slot();
    let mut f: Vec<isize> = vec![-1; 2 * n];
    let mut k: usize = 0;
    for j in 1..2 * n {
        let mut i = f[j - k - 1];
        while i != -1 && key(j) != key(k + i as usize + 1) {
            if key(j) < key(k + i as usize + 1) {
                k = j - i as usize - 1;
            }
            i = f[i as usize];
        }
        if i == -1 && key(j) != key(k) {
            if key(j) < key(k) {
                k = j;
            }
            f[j - k] = -1;
        } else {
            f[j - k] = i + 1;
        }
    }
    (0..n).map(|i| v[(k + i) % n]).collect()
}

/// Order in which products of automorphisms are applied.
///
/// `RightToLeft` means a product string `f g` acts as `x ↦ f(g(x))`
/// (function composition); `LeftToRight` applies `f` first.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, Default)]
pub enum ComposeOrder {
    #[default]
    #[serde(rename = "right")]
    RightToLeft,
    #[serde(rename = "left")]
    LeftToRight,
}

impl fmt::Display for ComposeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComposeOrder::RightToLeft => write!(f, "right"),
            ComposeOrder::LeftToRight => write!(f, "left"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Invertibility {
    Unverified,
    VerifiedWithInverse,
}

/// An endomorphism of the free group given by generator images; called an
/// automorphism once invertibility has been verified (the verified inverse
/// is stored alongside).
#[derive(Clone, PartialEq, Eq)]
pub struct Automorphism {
    rank: usize,
    images: Vec<Word>,
    inverse_images: Option<Vec<Word>>,
}

impl Automorphism {
    // Rank 1 is allowed so extension-group probes can use a cyclic fiber
    // (integer-grid balls); the group-theoretic machinery assumes rank ≥ 2.
    pub fn new(rank: usize, images: Vec<Word>) -> Result<Automorphism, FreeGroupError> {
        if rank < 1 {
            return Err(FreeGroupError::RankTooSmall(rank));
        }
        assert_eq!(images.len(), rank, "one image per generator");
        for (i, w) in images.iter().enumerate() {
            if w.is_empty() {
                return Err(FreeGroupError::EmptyImage(Letter::positive(i).to_char()));
            }
            if !w.fits_rank(rank) {
                return Err(FreeGroupError::RankMismatch {
                    aut: rank,
                    word: w.max_index().unwrap(),
                });
            }
        }
        Ok(Automorphism {
            rank,
            images,
            inverse_images: None,
        })
    }

    /// Convenience constructor from word literals.
    pub fn from_strs(rank: usize, images: &[&str]) -> Result<Automorphism, FreeGroupError> {
        let images = images
            .iter()
            .map(|s| Word::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Automorphism::new(rank, images)
    }

    pub fn identity(rank: usize) -> Automorphism {
        let images = (0..rank).map(|i| Word::single(Letter::positive(i))).collect();
        let inv = (0..rank).map(|i| Word::single(Letter::positive(i))).collect();
        Automorphism {
            rank,
            images,
            inverse_images: Some(inv),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image(&self, index: usize) -> &Word {
        &self.images[index]
    }

    pub fn invertibility(&self) -> Invertibility {
        if self.inverse_images.is_some() {
            Invertibility::VerifiedWithInverse
        } else {
            Invertibility::Unverified
        }
    }

    pub fn is_identity(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(i, w)| w.letters() == [Letter::positive(i)])
    }

    pub fn apply(&self, w: &Word) -> Result<Word, FreeGroupError> {
        if !w.fits_rank(self.rank) {
            return Err(FreeGroupError::RankMismatch {
                aut: self.rank,
                word: w.max_index().unwrap(),
            });
        }
        Ok(self.apply_unchecked(w))
    }

    fn apply_unchecked(&self, w: &Word) -> Word {
        let cap: usize = w
            .letters()
            .iter()
            .map(|l| self.images[l.index()].len())
            .sum();
        let mut out = Word(Vec::with_capacity(cap));
        for l in w.letters() {
            let im = &self.images[l.index()];
            if l.is_positive() {
                for &x in im.letters() {
                    out.push(x);
                }
            } else {
                for &x in im.letters().iter().rev() {
                    out.push(x.inverse());
                }
            }
        }
        out
    }

    /// Repeatedly apply, `k` may be negative for verified automorphisms.
    pub fn apply_power(&self, w: &Word, k: i64) -> Result<Word, FreeGroupError> {
        let f = if k < 0 {
            self.inverse_automorphism().ok_or_else(|| {
                FreeGroupError::NotInvertible("negative power of unverified endomorphism".into())
            })?
        } else {
            self.clone()
        };
        let mut out = w.clone();
        for _ in 0..k.unsigned_abs() {
            out = f.apply(&out)?;
        }
        Ok(out)
    }

    /// compose(f, g)(x) = f(g(x)) — g is applied first.
    pub fn compose(&self, g: &Automorphism) -> Result<Automorphism, FreeGroupError> {
        if self.rank != g.rank {
            return Err(FreeGroupError::RankDiffer {
                left: self.rank,
                right: g.rank,
            });
        }
        let images: Vec<Word> = g.images.iter().map(|w| self.apply_unchecked(w)).collect();
        for (i, w) in images.iter().enumerate() {
            if w.is_empty() {
                return Err(FreeGroupError::EmptyImage(Letter::positive(i).to_char()));
            }
        }
        let inverse_images = match (&self.inverse_images, &g.inverse_images) {
            (Some(fi), Some(gi)) => {
                // (f∘g)⁻¹ = g⁻¹∘f⁻¹
                let ginv = Automorphism {
                    rank: self.rank,
                    images: gi.clone(),
                    inverse_images: None,
                };
                Some(fi.iter().map(|w| ginv.apply_unchecked(w)).collect())
            }
            _ => None,
        };
        Ok(Automorphism {
            rank: self.rank,
            images,
            inverse_images,
        })
    }

    /// Compose a product under the given order convention:
    /// under `RightToLeft`, `[f1, f2, f3]` acts as f1∘f2∘f3.
    pub fn compose_all(
        factors: &[Automorphism],
        order: ComposeOrder,
    ) -> Result<Automorphism, FreeGroupError> {
        assert!(!factors.is_empty());
        let rank = factors[0].rank;
        let mut acc = Automorphism::identity(rank);
        match order {
            ComposeOrder::RightToLeft => {
                for f in factors {
                    acc = acc.compose(f)?;
                }
            }
            ComposeOrder::LeftToRight => {
                for f in factors {
                    acc = f.compose(&acc)?;
                }
            }
        }
        Ok(acc)
    }

    /// The stored verified inverse, if any.
    pub fn inverse_automorphism(&self) -> Option<Automorphism> {
        self.inverse_images.as_ref().map(|inv| Automorphism {
            rank: self.rank,
            images: inv.clone(),
            inverse_images: Some(self.images.clone()),
        })
    }

    /// Compute and verify the inverse by folding the wedge of image loops;
    /// the folded graph is the rose exactly when the endomorphism is onto,
    /// and reading the basis loops back through the fold history expresses
    /// each generator in the images. Marks both directions verified.
    pub fn invert(&self) -> Result<Automorphism, FreeGroupError> {
        if let Some(g) = self.inverse_automorphism() {
            return Ok(g);
        }
        let inv_images = crate::stallings::invert_images(self.rank, &self.images)?;
        let g = Automorphism {
            rank: self.rank,
            images: inv_images,
            inverse_images: Some(self.images.clone()),
        };
        // Exact verification in both directions before releasing.
        for i in 0..self.rank {
            let x = Word::single(Letter::positive(i));
            if self.apply_unchecked(&g.images[i]) != x || g.apply_unchecked(&self.images[i]) != x {
                return Err(FreeGroupError::NotInvertible(
                    "fold-derived inverse failed verification".into(),
                ));
            }
        }
        Ok(g)
    }

    /// Self with a verified stored inverse.
    pub fn into_verified(self) -> Result<Automorphism, FreeGroupError> {
        if self.inverse_images.is_some() {
            return Ok(self);
        }
        let g = self.invert()?;
        Ok(Automorphism {
            rank: self.rank,
            images: self.images,
            inverse_images: Some(g.images),
        })
    }

    pub fn power(&self, k: i64) -> Result<Automorphism, FreeGroupError> {
        let base = if k < 0 {
            self.inverse_automorphism().ok_or_else(|| {
                FreeGroupError::NotInvertible("negative power of unverified endomorphism".into())
            })?
        } else {
            self.clone()
        };
        let mut acc = Automorphism::identity(self.rank);
        for _ in 0..k.unsigned_abs() {
            acc = acc.compose(&base)?;
        }
        Ok(acc)
    }
}

impl fmt::Debug for Automorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, w) in self.images.iter().enumerate() {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{} -> {}", Letter::positive(i).to_char(), w)?;
        }
        Ok(())
    }
}

/// Outcome of a bounded outer-equality search.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OuterEquality {
    Equal { conjugator: Word },
    NotEqualUpToBound { bound: usize },
}

/// Search conjugators `w` with `|w| ≤ bound` such that `f = i_w ∘ g`,
/// where `i_w(x) = w·x·w⁻¹`.
pub fn equal_outer(f: &Automorphism, g: &Automorphism, bound: usize) -> Result<OuterEquality, FreeGroupError> {
    if f.rank() != g.rank() {
        return Err(FreeGroupError::RankDiffer {
            left: f.rank(),
            right: g.rank(),
        });
    }
    for w in reduced_words(f.rank(), bound) {
        let winv = w.inverse();
        let ok = (0..f.rank()).all(|i| {
            let conj = w.concat(g.image(i)).concat(&winv);
            *f.image(i) == conj
        });
        if ok {
            return Ok(OuterEquality::Equal { conjugator: w });
        }
    }
    Ok(OuterEquality::NotEqualUpToBound { bound })
}

/// All freely reduced words of length ≤ `max_len`, in (length, lex) order.
pub fn reduced_words(rank: usize, max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut frontier: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for slot in 0..2 * rank {
                let l = Letter::from_slot(slot);
                if w.last() == Some(&l.inverse()) {
                    continue;
                }
                let mut v = w.clone();
                v.push(l);
                out.push(Word(v.clone()));
                next.push(v);
            }
        }
        frontier = next;
    }
    out
}

/// Canonical representatives of all conjugacy classes (merged with their
/// inverse classes) of cyclic length in `[1, max_len]`, in (length, lex)
/// order.
pub fn canonical_classes(rank: usize, max_len: usize) -> Vec<CyclicWord> {
    let mut out = Vec::new();
    let mut stack: Vec<Letter> = Vec::new();
    for len in 1..=max_len {
        gen_cyclic(rank, len, &mut stack, &mut out);
    }
    out
}

fn gen_cyclic(rank: usize, len: usize, stack: &mut Vec<Letter>, out: &mut Vec<CyclicWord>) {
    if stack.len() == len {
        if stack[0] != stack[len - 1].inverse() || len == 1 {
            let cw = CyclicWord {
                letters: stack.clone(),
                canonical: false,
            };
            let canon = cw.canonicalize();
            if canon.letters == *stack {
                out.push(canon);
            }
        }
        return;
    }
    for slot in 0..2 * rank {
        let l = Letter::from_slot(slot);
        if stack.last() == Some(&l.inverse()) {
            continue;
        }
        stack.push(l);
        gen_cyclic(rank, len, stack, out);
        stack.pop();
    }
}
