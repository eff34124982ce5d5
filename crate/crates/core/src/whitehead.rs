//! Whitehead automorphisms and greedy length minimization.
//!
//! Peak reduction guarantees that greedy first-improvement descent over the
//! finite move list reaches the minimal cyclic length in the automorphism
//! orbit, so primitivity of a word is decided by whether its class
//! minimizes to length 1.

use crate::freegroup::{Automorphism, CyclicWord, Letter, Word};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum WhiteheadError {
    #[error("input length {len} exceeds the configured cap {cap}")]
    CapExceeded { len: usize, cap: usize },
    #[error("operation requires a nontrivial word")]
    TrivialWord,
}

/// Default input-length cap for primitivity queries.
pub const DEFAULT_LENGTH_CAP: usize = 64;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum WhiteheadMove {
    /// Signed permutation of the basis: `x_i ↦ perm[i]` (a letter).
    TypeI { perm: Vec<Letter> },
    /// Multiplier `a` with cut set `A`: `a ∈ A`, `a⁻¹ ∉ A`, and the move is
    /// neither the identity (`A = {a}`) nor inner (`A` = everything but
    /// `a⁻¹`). A generator `x ∉ {a, a⁻¹}` maps to `a⁻¹?·x·a?`, picking up
    /// the right factor when `x ∈ A` and the left one when `x⁻¹ ∈ A`.
    TypeII { multiplier: Letter, cut: BTreeSet<Letter> },
}

impl WhiteheadMove {
    pub fn automorphism(&self, rank: usize) -> Automorphism {
        let images = match self {
            WhiteheadMove::TypeI { perm } => {
                perm.iter().map(|&l| Word::single(l)).collect::<Vec<_>>()
            }
            WhiteheadMove::TypeII { multiplier, cut } => {
                let a = *multiplier;
                (0..rank)
                    .map(|i| {
                        let x = Letter::positive(i);
                        if x == a || x == a.inverse() {
                            return Word::single(x);
                        }
                        let mut letters = Vec::with_capacity(3);
                        if cut.contains(&x.inverse()) {
                            letters.push(a.inverse());
                        }
                        letters.push(x);
                        if cut.contains(&x) {
                            letters.push(a);
                        }
                        Word::reduce(letters)
                    })
                    .collect()
            }
        };
        Automorphism::new(rank, images).expect("Whitehead moves are valid endomorphisms")
    }
}

impl fmt::Debug for WhiteheadMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WhiteheadMove::TypeI { perm } => {
                write!(f, "σ(")?;
                for (i, l) in perm.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", l.to_char())?;
                }
                write!(f, ")")
            }
            WhiteheadMove::TypeII { multiplier, cut } => {
                write!(f, "W({};", multiplier.to_char())?;
                for l in cut {
                    write!(f, "{}", l.to_char())?;
                }
                write!(f, ")")
            }
        }
    }
}

/// The complete finite list of type-I and normalized type-II moves, in a
/// deterministic order (type I first).
pub fn whitehead_moves(rank: usize) -> Vec<WhiteheadMove> {
    assert!(rank >= 2);
    let mut moves = Vec::new();
    // Type I: all signed permutations.
    let mut perm_indices: Vec<usize> = (0..rank).collect();
    let mut type_i = Vec::new();
    permutations(&mut perm_indices, 0, &mut |p| {
        for signs in 0..(1u32 << rank) {
            let perm: Vec<Letter> = (0..rank)
                .map(|i| Letter::new(p[i], signs & (1 << i) == 0))
                .collect();
            type_i.push(WhiteheadMove::TypeI { perm });
        }
    });
    type_i.sort();
    moves.extend(type_i);
    // Type II: multiplier a, cut sets over the other letters.
    let letters: Vec<Letter> = (0..2 * rank).map(Letter::from_slot).collect();
    let mut type_ii = Vec::new();
    for &a in &letters {
        let others: Vec<Letter> = letters
            .iter()
            .copied()
            .filter(|&l| l != a && l != a.inverse())
            .collect();
        let m = others.len();
        for mask in 0..(1u32 << m) {
            let mut cut: BTreeSet<Letter> = BTreeSet::new();
            cut.insert(a);
            for (bit, &l) in others.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    cut.insert(l);
                }
            }
            if cut.len() == 1 {
                continue; // identity
            }
            if cut.len() == 2 * rank - 1 {
                continue; // inner: conjugation by a
            }
            type_ii.push(WhiteheadMove::TypeII { multiplier: a, cut });
        }
    }
    type_ii.sort();
    moves.extend(type_ii);
    moves
}

fn permutations(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
    // restore lexicographic-ish determinism is not needed; callers sort
}

/// Cyclic length of the image of a class under a move.
fn moved_class(m: &Automorphism, c: &CyclicWord) -> CyclicWord {
    let image = m.apply(&c.as_word()).expect("ranks match");
    CyclicWord::canonical_of(&image)
}

/// Greedy first-improvement descent: while some move strictly shortens the
/// cyclic length, apply the first such move in the fixed move order.
pub fn minimize(c: &CyclicWord, rank: usize) -> (CyclicWord, Vec<WhiteheadMove>) {
    let moves = whitehead_moves(rank);
    let auts: Vec<Automorphism> = moves.iter().map(|m| m.automorphism(rank)).collect();
    let mut cur = c.canonicalize();
    let mut applied = Vec::new();
    loop {
        let mut improved = false;
        for (m, aut) in moves.iter().zip(&auts) {
            let cand = moved_class(aut, &cur);
            if cand.len() < cur.len() {
                cur = cand;
                applied.push(m.clone());
                improved = true;
                break;
            }
        }
        if !improved {
            return (cur, applied);
        }
    }
}

/// Whitehead primitivity test: true iff the class minimizes to length 1.
pub fn is_primitive(w: &Word, rank: usize, cap: usize) -> Result<bool, WhiteheadError> {
    if w.is_empty() {
        return Err(WhiteheadError::TrivialWord);
    }
    if w.len() > cap {
        return Err(WhiteheadError::CapExceeded { len: w.len(), cap });
    }
    let c = CyclicWord::canonical_of(w);
    if c.is_empty() {
        return Err(WhiteheadError::TrivialWord);
    }
    Ok(minimize(&c, rank).0.len() == 1)
}

/// All canonical classes of length ≤ `max_len` that are periodic under `f`
/// with period ≤ `max_period` and primitive. Each witnesses a rank-1 free
/// factor whose conjugacy class is fixed by a power of `f`.
pub fn fixed_rank1_factor_probe(
    f: &Automorphism,
    max_len: usize,
    max_period: usize,
) -> Result<Vec<CyclicWord>, WhiteheadError> {
    let rank = f.rank();
    let mut out = Vec::new();
    for class in crate::freegroup::canonical_classes(rank, max_len) {
        if !class_is_periodic(f, &class, max_period) {
            continue;
        }
        if is_primitive(&class.as_word(), rank, DEFAULT_LENGTH_CAP)? {
            out.push(class);
        }
    }
    Ok(out)
}

pub(crate) fn class_is_periodic(f: &Automorphism, class: &CyclicWord, max_period: usize) -> bool {
    let start = class.canonicalize();
    let mut w = start.as_word();
    for _ in 1..=max_period {
        w = f.apply(&w).expect("rank checked by caller");
        if CyclicWord::canonical_of(&w) == start {
            return true;
        }
    }
    false
}
