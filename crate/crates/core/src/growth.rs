//! Growth classification of conjugacy classes under iteration.
//!
//! All growth is measured on canonical cyclic words, so conjugation (and
//! inversion) never changes a verdict. Exact periodicity is detected by
//! canonical-form comparison and is certificate-backed; every other verdict
//! is bounded/heuristic and carries the scale it was computed at.

use crate::freegroup::{canonical_classes, Automorphism, CyclicWord, FreeGroupError, Word};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct GrowthConfig {
    /// Trailing iterates used for ratio and slope estimates.
    pub window: usize,
    /// Exponential threshold: geometric mean ratio must exceed 1 + ε.
    pub epsilon: f64,
    /// Slack allowed in the nondecreasing-ratio check.
    pub ratio_slack: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            window: 8,
            epsilon: 0.05,
            ratio_slack: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum GrowthClass {
    Fixed,
    Periodic { period: usize },
    Polynomial { degree: u32 },
    Exponential { lambda: f64 },
    /// Growth signals straddle the threshold at this scale; raise n.
    Inconclusive,
}

impl GrowthClass {
    pub fn is_exponential(&self) -> bool {
        matches!(self, GrowthClass::Exponential { .. })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, GrowthClass::Fixed | GrowthClass::Periodic { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum GrowthCertificate {
    /// `f^period` returns the canonical class exactly.
    ExactReturn { period: usize },
    /// Geometric-mean cyclic length ratio over the trailing window.
    RatioWindow { geo_mean: f64, window: usize },
    /// Log-log least squares slope over the trailing window.
    SlopeFit { slope: f64 },
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub class: GrowthClass,
    pub lengths: Vec<usize>,
    pub certificate: GrowthCertificate,
    pub iterations: usize,
}

/// Cyclic lengths of the canonical classes of `f^i(w)` for `i = 0..=n`.
pub fn iterate_lengths(
    f: &Automorphism,
    w: &Word,
    n: usize,
) -> Result<Vec<usize>, FreeGroupError> {
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = w.clone();
    out.push(CyclicWord::cyclic_reduce(&cur).0.len());
    for _ in 0..n {
        cur = f.apply(&cur)?;
        // keep iterating on the cyclically reduced core to stop conjugator growth
        let (core, _) = CyclicWord::cyclic_reduce(&cur);
        cur = core.as_word();
        out.push(cur.len());
    }
    Ok(out)
}

/// Classify the growth of the class of `w` under `f` using `n` iterates.
pub fn classify_growth(
    f: &Automorphism,
    w: &Word,
    n: usize,
    config: &GrowthConfig,
) -> Result<GrowthReport, FreeGroupError> {
    assert!(n >= config.window, "need n ≥ window");
    let start = CyclicWord::canonical_of(w);
    if start.is_empty() {
        return Ok(GrowthReport {
            class: GrowthClass::Fixed,
            lengths: vec![0; n + 1],
            certificate: GrowthCertificate::ExactReturn { period: 1 },
            iterations: n,
        });
    }
    let mut lengths = Vec::with_capacity(n + 1);
    lengths.push(start.len());
    let mut cur = start.as_word();
    for i in 1..=n {
        cur = f.apply(&cur)?;
        let (core, _) = CyclicWord::cyclic_reduce(&cur);
        cur = core.as_word();
        lengths.push(cur.len());
        // exact periodicity: cheap length pre-check before canonicalizing
        if cur.len() == start.len() && CyclicWord::canonical_of(&cur) == start {
            let class = if i == 1 {
                GrowthClass::Fixed
            } else {
                GrowthClass::Periodic { period: i }
            };
            return Ok(GrowthReport {
                class,
                lengths,
                certificate: GrowthCertificate::ExactReturn { period: i },
                iterations: i,
            });
        }
    }
    // ratio analysis over the trailing window
    let wlen = config.window;
    let a = lengths[n - wlen] as f64;
    let b = lengths[n] as f64;
    let geo = (b / a).powf(1.0 / wlen as f64);
    let half = wlen / 2;
    let g1 = (lengths[n - half] as f64 / lengths[n - wlen] as f64).powf(1.0 / (wlen - half) as f64);
    let g2 = (lengths[n] as f64 / lengths[n - half] as f64).powf(1.0 / half as f64);
    let nondecreasing = g2 >= g1 - config.ratio_slack;
    if geo > 1.0 + config.epsilon {
        if nondecreasing {
            return Ok(GrowthReport {
                class: GrowthClass::Exponential { lambda: geo },
                lengths,
                certificate: GrowthCertificate::RatioWindow {
                    geo_mean: geo,
                    window: wlen,
                },
                iterations: n,
            });
        }
        // fast growth with decaying ratios: straddles the threshold
        return Ok(GrowthReport {
            class: GrowthClass::Inconclusive,
            lengths,
            certificate: GrowthCertificate::RatioWindow {
                geo_mean: geo,
                window: wlen,
            },
            iterations: n,
        });
    }
    // polynomial: log-log least squares over the trailing window
    let points: Vec<(f64, f64)> = (n - wlen..=n)
        .map(|i| ((i.max(1)) as f64, lengths[i].max(1) as f64))
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let slope = least_squares_slope(&points);
    let degree = slope.round().max(0.0) as u32;
    Ok(GrowthReport {
        class: GrowthClass::Polynomial { degree },
        lengths,
        certificate: GrowthCertificate::SlopeFit { slope },
        iterations: n,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    (n * sxy - sx * sy) / denom
}

#[derive(Clone, Debug, Serialize)]
pub enum AtoroidalVerdict {
    /// No class of cyclic length ≤ l is periodic with period ≤ p. A bounded
    /// verdict only: it never asserts atoroidality.
    NoPeriodicUpTo { l: usize, p: usize },
    Counterexample { class: String, period: usize },
}

impl AtoroidalVerdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, AtoroidalVerdict::NoPeriodicUpTo { .. })
    }
}

/// Search canonical classes of length ≤ `l` for one that returns to itself
/// within `p` iterations; returns the lex-first counterexample.
pub fn atoroidal_probe(f: &Automorphism, l: usize, p: usize) -> AtoroidalVerdict {
    for class in canonical_classes(f.rank(), l) {
        if let Some(period) = class_period(f, &class, p) {
            return AtoroidalVerdict::Counterexample {
                class: class.to_string(),
                period,
            };
        }
    }
    AtoroidalVerdict::NoPeriodicUpTo { l, p }
}

/// Exact period of the class under `f` if it is ≤ `max_period`.
pub fn class_period(f: &Automorphism, class: &CyclicWord, max_period: usize) -> Option<usize> {
    let start = class.canonicalize();
    let mut w = start.as_word();
    for i in 1..=max_period {
        w = f.apply(&w).expect("rank checked by caller");
        let (core, _) = CyclicWord::cyclic_reduce(&w);
        w = core.as_word();
        if w.len() == start.len() && CyclicWord::canonical_of(&w) == start {
            return Some(i);
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthPartition {
    pub exponential: Vec<String>,
    pub non_exponential: Vec<(String, GrowthReport)>,
    pub inconclusive: Vec<(String, GrowthReport)>,
    pub l: usize,
    pub n: usize,
    pub config: GrowthConfig,
}

/// Partition all canonical classes of length ≤ `l` by growth class.
/// Embarrassingly parallel; aggregation preserves the canonical order.
pub fn growth_partition(
    f: &Automorphism,
    l: usize,
    n: usize,
    config: &GrowthConfig,
) -> Result<GrowthPartition, FreeGroupError> {
    let classes = canonical_classes(f.rank(), l);
    let reports: Result<Vec<(CyclicWord, GrowthReport)>, FreeGroupError> = classes
        .into_par_iter()
        .map(|c| {
            let rep = classify_growth(f, &c.as_word(), n, config)?;
            Ok((c, rep))
        })
        .collect();
    let mut out = GrowthPartition {
        exponential: Vec::new(),
        non_exponential: Vec::new(),
        inconclusive: Vec::new(),
        l,
        n,
        config: *config,
    };
    for (c, rep) in reports? {
        match rep.class {
            GrowthClass::Exponential { .. } => out.exponential.push(c.to_string()),
            GrowthClass::Inconclusive => out.inconclusive.push((c.to_string(), rep)),
            _ => out.non_exponential.push((c.to_string(), rep)),
        }
    }
    Ok(out)
}

/// Non-exponential classes as cyclic words (the sink feedstock): returns
/// (non-exponential, inconclusive, total classes scanned).
pub fn non_exponential_classes(
    f: &Automorphism,
    l: usize,
    n: usize,
    config: &GrowthConfig,
) -> Result<(Vec<CyclicWord>, Vec<CyclicWord>, usize), FreeGroupError> {
    let classes = canonical_classes(f.rank(), l);
    let total = classes.len();
    let reports: Result<Vec<(CyclicWord, GrowthClass)>, FreeGroupError> = classes
        .into_par_iter()
        .map(|c| {
            let rep = classify_growth(f, &c.as_word(), n, config)?;
            Ok((c, rep.class))
        })
        .collect();
    let mut non_exp = Vec::new();
    let mut inconclusive = Vec::new();
    for (c, class) in reports? {
        match class {
            GrowthClass::Exponential { .. } => {}
            GrowthClass::Inconclusive => inconclusive.push(c),
            _ => non_exp.push(c),
        }
    }
    Ok((non_exp, inconclusive, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aut(rank: usize, images: &[&str]) -> Automorphism {
        Automorphism::from_strs(rank, images).unwrap()
    }

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    #[test]
    fn iterate_lengths_examples() {
        let id = Automorphism::identity(2);
        assert_eq!(iterate_lengths(&id, &w("ab"), 5).unwrap(), vec![2; 6]);

        let twist = aut(2, &["a", "ba"]);
        let lens = iterate_lengths(&twist, &w("b"), 6).unwrap();
        assert_eq!(lens, vec![1, 2, 3, 4, 5, 6, 7]);

        let phi = aut(4, &["ad", "a", "b", "c"]);
        let lens = iterate_lengths(&phi, &w("a"), 30).unwrap();
        assert!(lens.windows(2).skip(6).all(|p| p[1] > p[0]));
        let ratio = lens[30] as f64 / lens[29] as f64;
        assert!((ratio - 1.3803).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn classify_fixed_and_periodic() {
        // e is fixed by the rank-5 example with e↦e
        let f = aut(5, &["ad", "a", "b", "c", "e"]);
        let rep = classify_growth(&f, &w("e"), 10, &GrowthConfig::default()).unwrap();
        assert_eq!(rep.class, GrowthClass::Fixed);

        // swap has period 2 on [a]
        let swap = aut(2, &["b", "a"]);
        let rep = classify_growth(&swap, &w("a"), 10, &GrowthConfig::default()).unwrap();
        assert_eq!(rep.class, GrowthClass::Periodic { period: 2 });
    }

    #[test]
    fn classify_polynomial_twist() {
        let twist = aut(2, &["a", "ba"]);
        let rep = classify_growth(&twist, &w("b"), 30, &GrowthConfig::default()).unwrap();
        assert_eq!(rep.class, GrowthClass::Polynomial { degree: 1 });
    }

    #[test]
    fn classify_exponential_phi() {
        let phi = aut(4, &["ad", "a", "b", "c"]);
        let rep = classify_growth(&phi, &w("a"), 30, &GrowthConfig::default()).unwrap();
        match rep.class {
            GrowthClass::Exponential { lambda } => {
                assert!((lambda - 1.3803).abs() < 0.02, "λ estimate {lambda}")
            }
            other => panic!("expected exponential, got {other:?}"),
        }
    }

    #[test]
    fn conjugacy_invariance() {
        let phi = aut(4, &["ad", "a", "b", "c"]);
        let u = w("dcB");
        let conj = w("a").conjugate_by(&u);
        let r1 = classify_growth(&phi, &w("a"), 20, &GrowthConfig::default()).unwrap();
        let r2 = classify_growth(&phi, &conj, 20, &GrowthConfig::default()).unwrap();
        assert_eq!(r1.class, r2.class);
        assert_eq!(r1.lengths, r2.lengths);
    }

    #[test]
    fn atoroidal_probe_examples() {
        // rank-5 example with a fixed letter: lex-first counterexample is [e]
        let f = aut(5, &["ad", "a", "b", "c", "e"]);
        match atoroidal_probe(&f, 6, 8) {
            AtoroidalVerdict::Counterexample { class, period } => {
                assert_eq!(class, "e");
                assert_eq!(period, 1);
            }
            _ => panic!("expected counterexample"),
        }

        let twist = aut(2, &["a", "ba"]);
        match atoroidal_probe(&twist, 4, 4) {
            AtoroidalVerdict::Counterexample { class, period } => {
                assert_eq!(class, "a");
                assert_eq!(period, 1);
            }
            _ => panic!("expected counterexample"),
        }

        let id = Automorphism::identity(2);
        match atoroidal_probe(&id, 2, 2) {
            AtoroidalVerdict::Counterexample { class, period } => {
                assert_eq!(class, "a");
                assert_eq!(period, 1);
            }
            _ => panic!("expected counterexample"),
        }
    }

    #[test]
    fn growth_partition_identity() {
        let id = Automorphism::identity(2);
        let part = growth_partition(&id, 2, 8, &GrowthConfig::default()).unwrap();
        assert!(part.exponential.is_empty());
        assert!(part.inconclusive.is_empty());
        assert!(!part.non_exponential.is_empty());
    }

    #[test]
    fn stability_under_larger_n() {
        // doubling n never flips exact verdicts, nor exponential→non-exponential here
        let phi = aut(4, &["ad", "a", "b", "c"]);
        let cfg = GrowthConfig::default();
        for class in canonical_classes(4, 3) {
            let r1 = classify_growth(&phi, &class.as_word(), 15, &cfg).unwrap();
            let r2 = classify_growth(&phi, &class.as_word(), 30, &cfg).unwrap();
            if r1.class.is_exact() {
                assert_eq!(r1.class, r2.class);
            }
            if r1.class.is_exponential() {
                assert!(r2.class.is_exponential());
            }
        }
    }
}
