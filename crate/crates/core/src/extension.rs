//! Arithmetic and geometric probes in the extension group F ⋊ Q.
//!
//! Elements are normal forms (fiber word, q-word): the q-part is a reduced
//! word over lift symbols t₁..t_k, and a q-word acts on the fiber through
//! the homomorphism sending a string to the function composition of its
//! letters, leftmost outermost. Balls are built breadth-first in the word
//! metric; coned-off balls attach a cone vertex per peripheral coset with
//! half-length edges, all metric arithmetic in doubled integers.

use crate::freegroup::{Automorphism, ComposeOrder, CyclicWord, FreeGroupError, Letter, Word};
use crate::growth::class_period;
use crate::stallings::CoreGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ExtensionError {
    #[error("ball exceeded the vertex cap {cap} at radius {achieved_radius}")]
    MemoryCap { cap: usize, achieved_radius: usize },
    #[error("ball has {vertices} vertices, too large for exact metric statistics (cap {cap})")]
    StatsTooLarge { vertices: usize, cap: usize },
    #[error("peripheral component invalid: {0}")]
    BadPeripheral(String),
    #[error(transparent)]
    FreeGroup(#[from] FreeGroupError),
}

/// Lift symbols t₁..t_k with verified-invertible automorphisms attached.
#[derive(Clone, Debug)]
pub struct LiftAssignment {
    pub rank: usize,
    pub lifts: Vec<Automorphism>,
}

impl LiftAssignment {
    pub fn new(rank: usize, lifts: Vec<Automorphism>) -> Result<LiftAssignment, FreeGroupError> {
        let lifts = lifts
            .into_iter()
            .map(|f| {
                assert_eq!(f.rank(), rank);
                f.into_verified()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LiftAssignment { rank, lifts })
    }

    pub fn symbols(&self) -> usize {
        self.lifts.len()
    }

    /// Homomorphic action of a q-word: function composition of the letter
    /// lifts, leftmost letter outermost.
    pub fn action(&self, q: &Word) -> Automorphism {
        let mut acc = Automorphism::identity(self.rank);
        for &l in q.letters() {
            let f = if l.is_positive() {
                self.lifts[l.index()].clone()
            } else {
                self.lifts[l.index()]
                    .inverse_automorphism()
                    .expect("lifts are verified")
            };
            acc = acc.compose(&f).expect("equal ranks");
        }
        acc
    }

    /// The composite an order convention assigns to a q-string: under
    /// left-to-right reading the leftmost letter acts first, which is the
    /// homomorphic action of the reversed string.
    pub fn composite_for(&self, q: &Word, order: ComposeOrder) -> Automorphism {
        match order {
            ComposeOrder::RightToLeft => self.action(q),
            ComposeOrder::LeftToRight => self.action(&reverse_q(q)),
        }
    }
}

fn reverse_q(q: &Word) -> Word {
    // plain reversal of the symbol string, not inversion
    let mut letters: Vec<Letter> = q.letters().to_vec();
    letters.reverse();
    Word::reduce(letters)
}

/// Render a q-word as t-symbols: `t1T2` = t₁·t₂⁻¹.
pub fn format_q(q: &Word) -> String {
    if q.is_empty() {
        return "1".to_string();
    }
    q.letters()
        .iter()
        .map(|l| {
            if l.is_positive() {
                format!("t{}", l.index() + 1)
            } else {
                format!("T{}", l.index() + 1)
            }
        })
        .collect()
}

pub fn parse_q(s: &str) -> Result<Word, FreeGroupError> {
    let s = s.trim();
    if s == "1" || s.is_empty() {
        return Ok(Word::empty());
    }
    let chars: Vec<char> = s.chars().collect();
    let mut letters = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let positive = match chars[i] {
            't' => true,
            'T' => false,
            c => return Err(FreeGroupError::BadLiteral(format!("bad q symbol {c:?}"))),
        };
        i += 1;
        let mut num = String::new();
        while i < chars.len() && chars[i].is_ascii_digit() {
            num.push(chars[i]);
            i += 1;
        }
        let idx: usize = num
            .parse()
            .map_err(|_| FreeGroupError::BadLiteral(format!("bad q index in {s:?}")))?;
        if idx == 0 {
            return Err(FreeGroupError::BadLiteral("q symbols are 1-based".into()));
        }
        letters.push(Letter::new(idx - 1, positive));
    }
    Ok(Word::reduce(letters))
}

/// Normal form (w, q) of an element of F ⋊ Q.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ExtElem {
    pub fiber: Word,
    pub q: Word,
}

impl ExtElem {
    pub fn identity() -> ExtElem {
        ExtElem {
            fiber: Word::empty(),
            q: Word::empty(),
        }
    }

    pub fn fiber(w: Word) -> ExtElem {
        ExtElem {
            fiber: w,
            q: Word::empty(),
        }
    }

    pub fn q_only(q: Word) -> ExtElem {
        ExtElem {
            fiber: Word::empty(),
            q,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.fiber.is_empty() && self.q.is_empty()
    }
}

impl fmt::Display for ExtElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.fiber, format_q(&self.q))
    }
}

/// (w₁,q₁)·(w₂,q₂) = (w₁·Φ_{q₁}(w₂), q₁q₂).
pub fn ext_mul(x: &ExtElem, y: &ExtElem, lifts: &LiftAssignment) -> ExtElem {
    let phi = lifts.action(&x.q);
    let fiber = x.fiber.concat(&phi.apply(&y.fiber).expect("ranks match"));
    ExtElem {
        fiber,
        q: x.q.concat(&y.q),
    }
}

pub fn ext_inv(x: &ExtElem, lifts: &LiftAssignment) -> ExtElem {
    // (w,q)⁻¹ = (Φ_{q⁻¹}(w⁻¹), q⁻¹)
    let qinv = x.q.inverse();
    let phi = lifts.action(&qinv);
    ExtElem {
        fiber: phi.apply(&x.fiber.inverse()).expect("ranks match"),
        q: qinv,
    }
}

/// A verified commuting pair: `(class, ε)` commutes with
/// `(corrector, q_power)` under `ext_mul`, certifying a Z⊕Z subgroup.
#[derive(Clone, Debug, Serialize)]
pub struct ZzCertificate {
    /// Fiber class representative.
    pub class: String,
    /// q-word in the reading order of the convention used.
    pub q: String,
    /// The same q-word in homomorphic (internal) order.
    pub q_internal: String,
    pub period: usize,
    /// Fiber correction making the pair commute exactly.
    pub corrector: String,
}

/// Search for Z⊕Z certificates: for each reduced q-word of length ≤ q_len,
/// run the periodic-class search on its composite up to (l, p); each hit is
/// verified by `ext_mul` commutation before being emitted (first hit per
/// q-word).
pub fn zz_search(
    lifts: &LiftAssignment,
    q_len: usize,
    l: usize,
    p: usize,
    order: ComposeOrder,
) -> Vec<ZzCertificate> {
    let mut out = Vec::new();
    for q in crate::freegroup::reduced_words(lifts.symbols(), q_len) {
        if q.is_empty() {
            continue;
        }
        let composite = lifts.composite_for(&q, order);
        let mut found = None;
        'classes: for class in crate::freegroup::canonical_classes(lifts.rank, l) {
            if let Some(period) = class_period(&composite, &class, p) {
                if let Some(cert) = build_certificate(lifts, &q, order, &class, period) {
                    found = Some(cert);
                    break 'classes;
                }
            }
        }
        if let Some(c) = found {
            out.push(c);
        }
    }
    out
}

/// Reconstruct the conjugator realizing the exact return of the class and
/// verify the commuting pair.
fn build_certificate(
    lifts: &LiftAssignment,
    q: &Word,
    order: ComposeOrder,
    class: &CyclicWord,
    period: usize,
) -> Option<ZzCertificate> {
    let composite = lifts.composite_for(q, order);
    let w = class.canonicalize().as_word();
    let mut g = w.clone();
    for _ in 0..period {
        g = composite.apply(&g).expect("ranks match");
    }
    // g = v·w·v⁻¹ with v from the cyclic data; rotation match required
    let (core, u_g) = CyclicWord::cyclic_reduce(&g);
    let n = w.len();
    if core.len() != n {
        return None;
    }
    let mut v = None;
    for r in 0..n {
        if core.rotation(r) == w.letters() {
            // rot(w, r) = s⁻¹·w·s with s the length-r prefix of w
            let s = Word::reduce(w.letters()[..r].iter().copied());
            v = Some(u_g.concat(&s.inverse()));
            break;
        }
    }
    let v = v?; // inversion-only matches are not direct certificates
    let q_internal = match order {
        ComposeOrder::RightToLeft => q.clone(),
        ComposeOrder::LeftToRight => reverse_q(q),
    };
    let x = ExtElem::fiber(w.clone());
    let y = ExtElem {
        fiber: v.inverse(),
        q: q_internal.pow(period as i64),
    };
    let xy = ext_mul(&x, &y, lifts);
    let yx = ext_mul(&y, &x, lifts);
    if xy != yx {
        return None;
    }
    Some(ZzCertificate {
        class: class.to_string(),
        q: format_q(q),
        q_internal: format_q(&q_internal),
        period,
        corrector: v.inverse().to_string(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlareReport {
    pub lambda: f64,
    pub m: usize,
    pub l: usize,
    pub pass_fraction: f64,
    pub total_pairs: usize,
    /// (class, lift index, growth factor) of the worst case.
    pub worst: Option<(String, usize, f64)>,
    /// (class, lift index) pairs that failed the flare condition.
    pub failing: Vec<(String, usize)>,
}

/// Flare test: does every class of length ≤ l stretch by λ in at least one
/// direction under the m-th power of every generator lift?
pub fn flare_probe(lifts: &LiftAssignment, lambda: f64, m: usize, l: usize) -> FlareReport {
    let mut total = 0usize;
    let mut passed = 0usize;
    let mut worst: Option<(String, usize, f64)> = None;
    let mut failing = Vec::new();
    for class in crate::freegroup::canonical_classes(lifts.rank, l) {
        let base = class.len() as f64;
        for (i, f) in lifts.lifts.iter().enumerate() {
            let fwd = iterate_cyclic_len(f, &class, m, false);
            let bwd = iterate_cyclic_len(f, &class, m, true);
            let growth = fwd.max(bwd) as f64 / base;
            total += 1;
            if growth >= lambda {
                passed += 1;
            } else {
                failing.push((class.to_string(), i));
            }
            if worst.as_ref().map_or(true, |w| growth < w.2) {
                worst = Some((class.to_string(), i, growth));
            }
        }
    }
    FlareReport {
        lambda,
        m,
        l,
        pass_fraction: if total == 0 {
            1.0
        } else {
            passed as f64 / total as f64
        },
        total_pairs: total,
        worst,
        failing,
    }
}

fn iterate_cyclic_len(f: &Automorphism, class: &CyclicWord, m: usize, inverse: bool) -> usize {
    let g = if inverse {
        f.inverse_automorphism().expect("lifts are verified")
    } else {
        f.clone()
    };
    let mut w = class.as_word();
    for _ in 0..m {
        w = g.apply(&w).expect("ranks match");
        w = CyclicWord::cyclic_reduce(&w).0.as_word();
    }
    w.len()
}

/// One peripheral family K ⋊ Q_s: a fiber subgroup together with the lift
/// symbols that stabilize it exactly.
#[derive(Clone, Debug)]
pub struct PeripheralComponent {
    pub gens: Vec<Word>,
    /// 0-based lift symbol indices.
    pub stabilizer_symbols: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct PeripheralSpec {
    pub components: Vec<PeripheralComponent>,
}

pub const BALL_VERTEX_CAP: usize = 400_000;
pub const STATS_VERTEX_CAP: usize = 6_000;

/// A Cayley ball in F ⋊ Q, optionally electrified.
#[derive(Clone, Debug)]
pub struct ConedBall {
    pub rank: usize,
    pub symbols: usize,
    pub radius: usize,
    /// Group vertices in BFS order; vertex 0 is the identity.
    pub vertices: Vec<ExtElem>,
    /// Word-metric distance from the origin (in edges, not doubled).
    pub dist_from_origin: Vec<u32>,
    /// Undirected edges over combined ids with doubled lengths
    /// (2 = Cayley edge, 1 = cone half-edge).
    pub edges: Vec<(u32, u32, u32)>,
    /// Cone vertices occupy ids `vertices.len()..`.
    pub cones: Vec<String>,
}

impl ConedBall {
    pub fn total_vertices(&self) -> usize {
        self.vertices.len() + self.cones.len()
    }

    pub fn is_coned(&self) -> bool {
        !self.cones.is_empty()
    }
}

/// Breadth-first ball of radius `r` with generating set = fiber basis
/// letters ∪ lift symbols (and inverses). Peripheral cosets, when given,
/// are detected by exact membership and electrified with a shared cone per
/// coset.
pub fn cayley_ball(
    lifts: &LiftAssignment,
    r: usize,
    peripherals: Option<&PeripheralSpec>,
    vertex_cap: usize,
) -> Result<ConedBall, ExtensionError> {
    if let Some(spec) = peripherals {
        validate_peripherals(lifts, spec)?;
    }
    let mut vertices = vec![ExtElem::identity()];
    let mut dist = vec![0u32];
    let mut index: HashMap<ExtElem, u32> = HashMap::new();
    index.insert(ExtElem::identity(), 0);
    let mut edges: Vec<(u32, u32, u32)> = Vec::new();
    // composite cache along BFS-discovered q-words
    let mut actions: HashMap<Word, Automorphism> = HashMap::new();
    actions.insert(Word::empty(), Automorphism::identity(lifts.rank));

    let mut head = 0usize;
    while head < vertices.len() {
        let v = vertices[head] .clone();
        let d = dist[head];
        if d as usize >= r {
            head += 1;
            continue;
        }
        let phi_q = match actions.get(&v.q) {
            Some(a) => a.clone(),
            None => {
                let a = lifts.action(&v.q);
                actions.insert(v.q.clone(), a.clone());
                a
            }
        };
        let mut neighbors: Vec<ExtElem> = Vec::new();
        for i in 0..lifts.rank {
            for x in [Letter::positive(i), Letter::negative(i)] {
                let img = phi_q.apply(&Word::single(x)).expect("ranks match");
                neighbors.push(ExtElem {
                    fiber: v.fiber.concat(&img),
                    q: v.q.clone(),
                });
            }
        }
        for t in 0..lifts.symbols() {
            for x in [Letter::positive(t), Letter::negative(t)] {
                let mut q = v.q.clone();
                q.push(x);
                neighbors.push(ExtElem {
                    fiber: v.fiber.clone(),
                    q,
                });
            }
        }
        for n in neighbors {
            let id = match index.get(&n) {
                Some(&id) => id,
                None => {
                    if vertices.len() >= vertex_cap {
                        return Err(ExtensionError::MemoryCap {
                            cap: vertex_cap,
                            achieved_radius: d as usize,
                        });
                    }
                    let id = vertices.len() as u32;
                    index.insert(n.clone(), id);
                    vertices.push(n);
                    dist.push(d + 1);
                    id
                }
            };
            let (a, b) = (head as u32, id);
            if a < b {
                edges.push((a, b, 2));
            } else if b < a {
                edges.push((b, a, 2));
            }
        }
        head += 1;
    }
    edges.sort_unstable();
    edges.dedup();

    // electrification
    let mut cones = Vec::new();
    if let Some(spec) = peripherals {
        for (ci, comp) in spec.components.iter().enumerate() {
            let mut coset_graphs: HashMap<Word, CoreGraph> = HashMap::new();
            let mut groups: BTreeMap<(Vec<Letter>, u32, Vec<Letter>), Vec<u32>> = BTreeMap::new();
            for (vid, v) in vertices.iter().enumerate() {
                let label = coset_label(lifts, comp, v, &mut coset_graphs);
                groups.entry(label).or_default().push(vid as u32);
            }
            for (label, members) in groups {
                if members.len() < 2 {
                    continue;
                }
                let cone_id = (vertices.len() + cones.len()) as u32;
                cones.push(format!(
                    "component {} coset q0={} state={} tail={}",
                    ci,
                    format_q(&Word::reduce(label.0.iter().copied())),
                    label.1,
                    Word::reduce(label.2.iter().copied())
                ));
                for m in members {
                    edges.push((m, cone_id, 1));
                }
            }
        }
    }

    Ok(ConedBall {
        rank: lifts.rank,
        symbols: lifts.symbols(),
        radius: r,
        vertices,
        dist_from_origin: dist,
        edges,
        cones,
    })
}

fn validate_peripherals(
    lifts: &LiftAssignment,
    spec: &PeripheralSpec,
) -> Result<(), ExtensionError> {
    for (ci, comp) in spec.components.iter().enumerate() {
        if comp.gens.is_empty() {
            return Err(ExtensionError::BadPeripheral(format!(
                "component {ci} has no generators"
            )));
        }
        let graph = CoreGraph::fold(lifts.rank, &comp.gens);
        for &s in &comp.stabilizer_symbols {
            if s >= lifts.symbols() {
                return Err(ExtensionError::BadPeripheral(format!(
                    "component {ci}: symbol t{} out of range",
                    s + 1
                )));
            }
            let f = &lifts.lifts[s];
            let finv = f.inverse_automorphism().expect("lifts are verified");
            for g in &comp.gens {
                let fwd = f.apply(g).expect("ranks match");
                let bwd = finv.apply(g).expect("ranks match");
                if !graph.contains(&fwd) || !graph.contains(&bwd) {
                    return Err(ExtensionError::BadPeripheral(format!(
                        "component {ci}: t{} does not stabilize the subgroup",
                        s + 1
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Complete left-coset invariant of `(w, q)` for `K ⋊ Q_s`:
/// strip the stabilizer tail of `q`, then take the Stallings coset normal
/// form of `K'·w⁻¹` for `K' = Φ_{q₀}(K)` (greedy-trace state plus the
/// unread tail).
fn coset_label(
    lifts: &LiftAssignment,
    comp: &PeripheralComponent,
    v: &ExtElem,
    cache: &mut HashMap<Word, CoreGraph>,
) -> (Vec<Letter>, u32, Vec<Letter>) {
    let mut q0: Vec<Letter> = v.q.letters().to_vec();
    while let Some(last) = q0.last() {
        if comp.stabilizer_symbols.contains(&last.index()) {
            q0.pop();
        } else {
            break;
        }
    }
    let q0_word = Word::reduce(q0.iter().copied());
    let graph = cache.entry(q0_word.clone()).or_insert_with(|| {
        let phi = lifts.action(&q0_word);
        let gens: Vec<Word> = comp
            .gens
            .iter()
            .map(|g| phi.apply(g).expect("ranks match"))
            .collect();
        CoreGraph::fold(lifts.rank, &gens)
    });
    let winv = v.fiber.inverse();
    let mut cur = graph.membership_root();
    let mut consumed = 0usize;
    for &l in winv.letters() {
        match graph.neighbor(cur, l) {
            Some(t) => {
                cur = t;
                consumed += 1;
            }
            None => break,
        }
    }
    let tail: Vec<Letter> = winv.letters()[consumed..].to_vec();
    (q0, cur, tail)
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub delta_doubled: u32,
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub inner_vertices: usize,
    /// Histogram of per-triangle slimness (doubled units).
    pub histogram: BTreeMap<u32, usize>,
}

/// Slim-triangle statistics over sampled triangles with corners in the
/// inner half-ball. Exact shortest-path metric inside the ball (doubled
/// units); deterministic given the seed.
pub fn hyperbolicity_stats(
    ball: &ConedBall,
    samples: usize,
    seed: u64,
) -> Result<StatsReport, ExtensionError> {
    let n = ball.total_vertices();
    if n > STATS_VERTEX_CAP {
        return Err(ExtensionError::StatsTooLarge {
            vertices: n,
            cap: STATS_VERTEX_CAP,
        });
    }
    let adj = adjacency(ball);
    let dist = all_pairs(&adj, n);
    let half = (ball.radius + 1) / 2;
    let inner: Vec<u32> = (0..ball.vertices.len() as u32)
        .filter(|&v| ball.dist_from_origin[v as usize] as usize <= half)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram: BTreeMap<u32, usize> = BTreeMap::new();
    let mut delta = 0u32;
    if inner.len() >= 3 {
        for _ in 0..samples {
            let mut pick = || inner[rng.gen_range(0..inner.len())];
            let (a, b, c) = (pick(), pick(), pick());
            if a == b || b == c || a == c {
                continue;
            }
            let d = triangle_slimness(&adj, &dist, n, a, b, c);
            *histogram.entry(d).or_insert(0) += 1;
            delta = delta.max(d);
        }
    }
    Ok(StatsReport {
        delta_doubled: delta,
        delta: delta as f64 / 2.0,
        samples,
        seed,
        inner_vertices: inner.len(),
        histogram,
    })
}

fn adjacency(ball: &ConedBall) -> Vec<Vec<(u32, u32)>> {
    let n = ball.total_vertices();
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in &ball.edges {
        adj[a as usize].push((b, w));
        adj[b as usize].push((a, w));
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

fn dijkstra(adj: &[Vec<(u32, u32)>], n: usize, src: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; n];
    dist[src as usize] = 0;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(std::cmp::Reverse((0u32, src)));
    while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        for &(u, w) in &adj[v as usize] {
            let nd = d + w;
            if nd < dist[u as usize] {
                dist[u as usize] = nd;
                heap.push(std::cmp::Reverse((nd, u)));
            }
        }
    }
    dist
}

fn all_pairs(adj: &[Vec<(u32, u32)>], n: usize) -> Vec<Vec<u32>> {
    (0..n as u32).map(|v| dijkstra(adj, n, v)).collect()
}

/// Canonical geodesic between two vertices: greedy descent on the distance
/// field with least-index tie breaking.
fn geodesic(adj: &[Vec<(u32, u32)>], dist: &[Vec<u32>], from: u32, to: u32) -> Vec<u32> {
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        let dcur = dist[cur as usize][to as usize];
        let mut next = None;
        for &(u, w) in &adj[cur as usize] {
            if dist[u as usize][to as usize] + w == dcur {
                next = Some(u);
                break; // adjacency sorted: least index wins
            }
        }
        cur = next.expect("distances are consistent");
        path.push(cur);
    }
    path
}

fn triangle_slimness(
    adj: &[Vec<(u32, u32)>],
    dist: &[Vec<u32>],
    _n: usize,
    a: u32,
    b: u32,
    c: u32,
) -> u32 {
    let ab = geodesic(adj, dist, a, b);
    let bc = geodesic(adj, dist, b, c);
    let ca = geodesic(adj, dist, c, a);
    let sides = [&ab, &bc, &ca];
    let mut worst = 0u32;
    for (i, side) in sides.iter().enumerate() {
        let others: Vec<u32> = sides[(i + 1) % 3]
            .iter()
            .chain(sides[(i + 2) % 3].iter())
            .copied()
            .collect();
        for &x in side.iter() {
            let d = others
                .iter()
                .map(|&u| dist[x as usize][u as usize])
                .min()
                .unwrap_or(0);
            worst = worst.max(d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    fn phi_psi() -> LiftAssignment {
        LiftAssignment::new(
            4,
            vec![
                Automorphism::from_strs(4, &["ad", "a", "b", "c"]).unwrap(),
                Automorphism::from_strs(4, &["ac", "a", "b", "db"]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn z2_lifts() -> LiftAssignment {
        LiftAssignment::new(1, vec![Automorphism::identity(1)]).unwrap()
    }

    #[test]
    fn ext_mul_examples() {
        let lifts = phi_psi();
        let x = ExtElem::fiber(w("a"));
        let y = ExtElem::fiber(w("b"));
        assert_eq!(ext_mul(&x, &y, &lifts), ExtElem::fiber(w("ab")));

        // (ε,t₁)·(a,ε) = (Φ(a), t₁) = (ad, t₁)
        let t = ExtElem::q_only(parse_q("t1").unwrap());
        let a = ExtElem::fiber(w("a"));
        let prod = ext_mul(&t, &a, &lifts);
        assert_eq!(prod.fiber, w("ad"));
        assert_eq!(format_q(&prod.q), "t1");

        // inverse law on a few elements
        for (fw, qs) in [("a", "t1"), ("bA", "T2t1"), ("dc", "t2t2")] {
            let x = ExtElem {
                fiber: w(fw),
                q: parse_q(qs).unwrap(),
            };
            let inv = ext_inv(&x, &lifts);
            assert!(ext_mul(&x, &inv, &lifts).is_identity());
            assert!(ext_mul(&inv, &x, &lifts).is_identity());
        }
    }

    #[test]
    fn ext_mul_associativity_and_action() {
        let lifts = phi_psi();
        let elems = [
            ExtElem { fiber: w("ab"), q: parse_q("t1").unwrap() },
            ExtElem { fiber: w("C"), q: parse_q("T2").unwrap() },
            ExtElem { fiber: w("da"), q: parse_q("t2t1").unwrap() },
        ];
        let ab_c = ext_mul(&ext_mul(&elems[0], &elems[1], &lifts), &elems[2], &lifts);
        let a_bc = ext_mul(&elems[0], &ext_mul(&elems[1], &elems[2], &lifts), &lifts);
        assert_eq!(ab_c, a_bc);

        // (ε,q)·(w,ε)·(ε,q)⁻¹ = (Φ_q(w), ε)
        let q = parse_q("t1T2").unwrap();
        let conj = ext_mul(
            &ext_mul(&ExtElem::q_only(q.clone()), &ExtElem::fiber(w("ba")), &lifts),
            &ext_inv(&ExtElem::q_only(q.clone()), &lifts),
            &lifts,
        );
        assert!(conj.q.is_empty());
        assert_eq!(conj.fiber, lifts.action(&q).apply(&w("ba")).unwrap());
    }

    #[test]
    fn zz_finds_fixed_fiber_word() {
        // the composite of t₁⁻¹ and t₂ fixes b under either reading order;
        // the q-string carrying the certificate depends on the order
        let lifts = phi_psi();
        let certs = zz_search(&lifts, 2, 4, 4, ComposeOrder::RightToLeft);
        assert!(
            certs.iter().any(|c| c.class == "b" && c.q == "T1t2"),
            "right-to-left: {certs:?}"
        );
        let certs = zz_search(&lifts, 2, 4, 4, ComposeOrder::LeftToRight);
        assert!(
            certs.iter().any(|c| c.class == "b" && c.q == "t2T1"),
            "left-to-right: {certs:?}"
        );
    }

    #[test]
    fn zz_empty_for_atoroidal_single_lift() {
        let lifts = LiftAssignment::new(
            4,
            vec![Automorphism::from_strs(4, &["ad", "a", "b", "c"]).unwrap()],
        )
        .unwrap();
        let certs = zz_search(&lifts, 1, 6, 8, ComposeOrder::RightToLeft);
        assert!(certs.is_empty(), "{certs:?}");
    }

    #[test]
    fn zz_identity_lift() {
        let lifts = LiftAssignment::new(2, vec![Automorphism::identity(2)]).unwrap();
        let certs = zz_search(&lifts, 1, 2, 2, ComposeOrder::RightToLeft);
        assert!(certs
            .iter()
            .any(|c| c.class == "a" && c.q == "t1" && c.period == 1));
    }

    #[test]
    fn flare_examples() {
        // fixed letter e fails for every λ > 1
        let lifts = LiftAssignment::new(
            5,
            vec![Automorphism::from_strs(5, &["ad", "a", "b", "c", "e"]).unwrap()],
        )
        .unwrap();
        let rep = flare_probe(&lifts, 1.05, 4, 2);
        assert!(rep.pass_fraction < 1.0);
        let worst = rep.worst.unwrap();
        assert_eq!(worst.0, "e");
        assert!(worst.2 <= 1.0);

        let id = LiftAssignment::new(2, vec![Automorphism::identity(2)]).unwrap();
        let rep = flare_probe(&id, 1.05, 3, 2);
        assert_eq!(rep.pass_fraction, 0.0);
    }

    #[test]
    fn flare_phi_passes() {
        let lifts = LiftAssignment::new(
            4,
            vec![Automorphism::from_strs(4, &["ad", "a", "b", "c"]).unwrap()],
        )
        .unwrap();
        let rep = flare_probe(&lifts, 1.05, 6, 6);
        assert_eq!(rep.pass_fraction, 1.0, "worst: {:?}", rep.worst);
    }

    #[test]
    fn grid_ball_structure() {
        // rank-1 fiber with the identity lift is Z²; |B(r)| = 2r² + 2r + 1
        let ball = cayley_ball(&z2_lifts(), 4, None, BALL_VERTEX_CAP).unwrap();
        assert_eq!(ball.vertices.len(), 2 * 16 + 2 * 4 + 1);
        assert!(ball.cones.is_empty());
    }

    #[test]
    fn tree_ball_delta_zero() {
        let lifts = LiftAssignment::new(
            2,
            vec![],
        );
        // no t-symbols: the ball is a tree in F₂
        let lifts = lifts.unwrap();
        let ball = cayley_ball(&lifts, 3, None, BALL_VERTEX_CAP).unwrap();
        let stats = hyperbolicity_stats(&ball, 300, 7).unwrap();
        assert_eq!(stats.delta_doubled, 0);
    }

    #[test]
    fn grid_delta_grows_with_radius() {
        let b3 = cayley_ball(&z2_lifts(), 3, None, BALL_VERTEX_CAP).unwrap();
        let b6 = cayley_ball(&z2_lifts(), 6, None, BALL_VERTEX_CAP).unwrap();
        let d3 = hyperbolicity_stats(&b3, 800, 7).unwrap();
        let d6 = hyperbolicity_stats(&b6, 800, 7).unwrap();
        assert!(
            d6.delta_doubled > d3.delta_doubled,
            "flat space: δ(R=6)={} vs δ(R=3)={}",
            d6.delta_doubled,
            d3.delta_doubled
        );
    }

    #[test]
    fn coned_grid_delta_stops_growing() {
        let peripheral = PeripheralSpec {
            components: vec![PeripheralComponent {
                gens: vec![w("a")],
                stabilizer_symbols: vec![0],
            }],
        };
        let b4 = cayley_ball(&z2_lifts(), 4, Some(&peripheral), BALL_VERTEX_CAP).unwrap();
        let b6 = cayley_ball(&z2_lifts(), 6, Some(&peripheral), BALL_VERTEX_CAP).unwrap();
        assert!(b4.is_coned() && b6.is_coned());
        let d4 = hyperbolicity_stats(&b4, 800, 7).unwrap();
        let d6 = hyperbolicity_stats(&b6, 800, 7).unwrap();
        assert!(
            d6.delta_doubled <= d4.delta_doubled,
            "electrified flat direction: δ(R=6)={} vs δ(R=4)={}",
            d6.delta_doubled,
            d4.delta_doubled
        );
    }

    #[test]
    fn electrified_distances() {
        // peripheral ⟨e⟩ stabilized by a rank-5 lift with e↦e
        let lifts = LiftAssignment::new(
            5,
            vec![Automorphism::from_strs(5, &["ad", "a", "b", "c", "e"]).unwrap()],
        )
        .unwrap();
        let peripheral = PeripheralSpec {
            components: vec![PeripheralComponent {
                gens: vec![w("e")],
                stabilizer_symbols: vec![0],
            }],
        };
        let r = 3;
        let plain = cayley_ball(&lifts, r, None, BALL_VERTEX_CAP).unwrap();
        let coned = cayley_ball(&lifts, r, Some(&peripheral), BALL_VERTEX_CAP).unwrap();
        assert_eq!(plain.vertices, coned.vertices);
        let n_plain = plain.total_vertices();
        let n_coned = coned.total_vertices();
        let adj_p = adjacency(&plain);
        let adj_c = adjacency(&coned);
        let dp = all_pairs(&adj_p, n_plain);
        let dc = all_pairs(&adj_c, n_coned);
        // electrified ≤ word distance pointwise
        for i in 0..plain.vertices.len() {
            for j in 0..plain.vertices.len() {
                assert!(dc[i][j] <= dp[i][j]);
            }
        }
        // same-coset vertices at electrified distance ≤ 1 (doubled: 2)
        for k in 1..=r {
            let ek = ExtElem::fiber(w("e").pow(k as i64));
            let id = coned.vertices.iter().position(|v| *v == ek).unwrap();
            assert!(dc[0][id] <= 2, "(e^{k}, ε) must be ≤ 1 from the origin");
        }
    }

    #[test]
    fn ball_cap_reports_radius() {
        let lifts = phi_psi();
        match cayley_ball(&lifts, 6, None, 500) {
            Err(ExtensionError::MemoryCap { achieved_radius, .. }) => {
                assert!(achieved_radius < 6);
            }
            other => panic!("expected cap, got {other:?}"),
        }
    }
}
