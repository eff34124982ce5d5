//! Topological representatives on marked graphs.
//!
//! Edges are stored once with a preferred orientation; a *direction* packs
//! an edge index with an orientation bit. Edge images are nonempty tight
//! direction paths respecting the vertex map. The invariant filtration is
//! computed from the strongly connected components of the edge-crossing
//! digraph; stratum transition matrices count unoriented crossings.

use crate::freegroup::{Automorphism, Letter, Word};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GraphMapError {
    #[error("transition matrix is reducible")]
    Reducible,
    #[error("power iteration did not converge")]
    NonConvergent,
    #[error("cancellation does not stabilize at cap {0}; raise the cap or check the map")]
    NonStabilizing(usize),
    #[error("stratum is not exponentially growing (λ = 1)")]
    NotExponential,
    #[error("path leaves the graph or is not tight")]
    BadPath,
    #[error("edge image is empty")]
    EmptyEdgeImage,
}

/// A direction: oriented edge. Even = preferred orientation of edge d/2.
pub type Dir = u32;

pub fn dir(edge: usize, forward: bool) -> Dir {
    (edge as u32) << 1 | u32::from(!forward)
}

pub fn dir_edge(d: Dir) -> usize {
    (d >> 1) as usize
}

pub fn dir_forward(d: Dir) -> bool {
    d & 1 == 0
}

pub fn dir_rev(d: Dir) -> Dir {
    d ^ 1
}

/// A finite connected core graph with named vertices and edges.
#[derive(Clone, Debug)]
pub struct MarkedGraph {
    pub nvert: usize,
    /// Preferred orientation endpoints: (from, to).
    pub edges: Vec<(u32, u32)>,
    /// Display names for edges; single letters for rose graphs.
    pub edge_names: Vec<String>,
}

impl MarkedGraph {
    pub fn rose(rank: usize) -> MarkedGraph {
        MarkedGraph {
            nvert: 1,
            edges: vec![(0, 0); rank],
            edge_names: (0..rank).map(|i| Letter::positive(i).to_char().to_string()).collect(),
        }
    }

    pub fn src(&self, d: Dir) -> u32 {
        let (a, b) = self.edges[dir_edge(d)];
        if dir_forward(d) {
            a
        } else {
            b
        }
    }

    pub fn dst(&self, d: Dir) -> u32 {
        self.src(dir_rev(d))
    }

    pub fn dirs(&self) -> impl Iterator<Item = Dir> + '_ {
        (0..2 * self.edges.len() as u32).map(|d| d as Dir)
    }

    pub fn dir_name(&self, d: Dir) -> String {
        let name = &self.edge_names[dir_edge(d)];
        if dir_forward(d) {
            name.clone()
        } else if name.len() == 1 && name.chars().next().unwrap().is_ascii_lowercase() {
            name.to_ascii_uppercase()
        } else {
            format!("~{name}")
        }
    }
}

/// A tight direction path.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct EdgePath(pub Vec<Dir>);

impl EdgePath {
    pub fn is_tight(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != dir_rev(w[0]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> EdgePath {
        EdgePath(self.0.iter().rev().map(|&d| dir_rev(d)).collect())
    }
}

/// A topological representative: vertex map plus tight nonempty edge images.
#[derive(Clone, Debug)]
pub struct GraphMap {
    pub graph: MarkedGraph,
    pub vertex_map: Vec<u32>,
    /// Image of each edge in its preferred orientation.
    pub edge_map: Vec<EdgePath>,
}

impl GraphMap {
    pub fn new(
        graph: MarkedGraph,
        vertex_map: Vec<u32>,
        edge_map: Vec<EdgePath>,
    ) -> Result<GraphMap, GraphMapError> {
        for (e, path) in edge_map.iter().enumerate() {
            if path.is_empty() {
                return Err(GraphMapError::EmptyEdgeImage);
            }
            if !path.is_tight() {
                return Err(GraphMapError::BadPath);
            }
            let (from, to) = graph.edges[e];
            let first = path.0[0];
            let last = *path.0.last().unwrap();
            if graph.src(first) != vertex_map[from as usize]
                || graph.dst(last) != vertex_map[to as usize]
            {
                return Err(GraphMapError::BadPath);
            }
            // consecutive edges must be concatenable
            for w in path.0.windows(2) {
                if graph.dst(w[0]) != graph.src(w[1]) {
                    return Err(GraphMapError::BadPath);
                }
            }
        }
        Ok(GraphMap {
            graph,
            vertex_map,
            edge_map,
        })
    }

    /// The rose representative of an automorphism: one vertex, one edge per
    /// generator, edge images read off the generator images.
    pub fn rose_map(f: &Automorphism) -> GraphMap {
        let rank = f.rank();
        let graph = MarkedGraph::rose(rank);
        let edge_map = f
            .images()
            .iter()
            .map(|w| EdgePath(w.letters().iter().map(|l| letter_dir(*l)).collect()))
            .collect();
        GraphMap {
            graph,
            vertex_map: vec![0],
            edge_map,
        }
    }

    pub fn identity(graph: MarkedGraph) -> GraphMap {
        let edge_map = (0..graph.edges.len()).map(|e| EdgePath(vec![dir(e, true)])).collect();
        let vertex_map = (0..graph.nvert as u32).collect();
        GraphMap {
            graph,
            vertex_map,
            edge_map,
        }
    }

    pub fn image_of_dir(&self, d: Dir) -> EdgePath {
        let path = &self.edge_map[dir_edge(d)];
        if dir_forward(d) {
            path.clone()
        } else {
            path.reversed()
        }
    }

    /// First direction of the image: the direction map `Tf`.
    pub fn tf(&self, d: Dir) -> Dir {
        let path = &self.edge_map[dir_edge(d)];
        if dir_forward(d) {
            path.0[0]
        } else {
            dir_rev(*path.0.last().unwrap())
        }
    }

    /// `f_#` on tight paths: map and tighten.
    pub fn tighten_image(&self, p: &EdgePath) -> Result<EdgePath, GraphMapError> {
        if !p.is_tight() {
            return Err(GraphMapError::BadPath);
        }
        for &d in &p.0 {
            if dir_edge(d) >= self.graph.edges.len() {
                return Err(GraphMapError::BadPath);
            }
        }
        let mut out: Vec<Dir> = Vec::new();
        for &d in &p.0 {
            let img = self.image_of_dir(d);
            for &x in &img.0 {
                if out.last() == Some(&dir_rev(x)) {
                    out.pop();
                } else {
                    out.push(x);
                }
            }
        }
        Ok(EdgePath(out))
    }

    /// `f_#` on circuits: map, tighten, then cancel cyclically.
    pub fn tighten_image_circuit(&self, p: &EdgePath) -> Result<EdgePath, GraphMapError> {
        let mut v = self.tighten_image(p)?.0;
        while v.len() >= 2 && v[0] == dir_rev(*v.last().unwrap()) {
            v.remove(0);
            v.pop();
        }
        Ok(EdgePath(v))
    }
}

fn letter_dir(l: Letter) -> Dir {
    dir(l.index(), l.is_positive())
}

pub fn path_from_word(w: &Word) -> EdgePath {
    EdgePath(w.letters().iter().map(|&l| letter_dir(l)).collect())
}

pub fn word_from_path(p: &EdgePath) -> Word {
    Word::reduce(
        p.0.iter()
            .map(|&d| Letter::new(dir_edge(d), dir_forward(d))),
    )
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum StratumClass {
    #[serde(rename = "EG")]
    Eg,
    #[serde(rename = "NEG")]
    Neg,
    #[serde(rename = "zero")]
    Zero,
}

#[derive(Clone, Debug)]
pub struct Stratum {
    /// Edge indices, ascending.
    pub edges: Vec<usize>,
    /// `matrix[i][j]` = crossings of stratum edge `i` (or reverse) by the
    /// image of stratum edge `j`.
    pub matrix: Vec<Vec<u64>>,
    pub class: StratumClass,
    /// Perron-Frobenius eigenvalue for irreducible strata.
    pub pf_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Filtration {
    /// Strata from lowest (sinks of the crossing digraph) to highest.
    pub strata: Vec<Stratum>,
    /// Stratum index of every edge.
    pub edge_stratum: Vec<usize>,
}

impl Filtration {
    pub fn eg_count(&self) -> usize {
        self.strata.iter().filter(|s| s.class == StratumClass::Eg).count()
    }

    /// Height of an edge = 1 + index of its stratum.
    pub fn height(&self, edge: usize) -> usize {
        self.edge_stratum[edge] + 1
    }
}

/// Maximal invariant filtration: strongly connected components of the
/// edge-crossing digraph in topological order, sinks lowest, ties broken by
/// least edge index.
pub fn filtration(m: &GraphMap) -> Filtration {
    let ne = m.graph.edges.len();
    // crossing digraph: j -> i when the image of j crosses edge i
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); ne];
    for j in 0..ne {
        let mut seen = vec![false; ne];
        for &d in &m.edge_map[j].0 {
            let i = dir_edge(d);
            if !seen[i] {
                seen[i] = true;
                succ[j].push(i);
            }
        }
    }
    let sccs = tarjan_sccs(ne, &succ);
    // condensation: place a component once all its successors are placed
    let ncomp = sccs.len();
    let comp_of = {
        let mut v = vec![0usize; ne];
        for (c, members) in sccs.iter().enumerate() {
            for &e in members {
                v[e] = c;
            }
        }
        v
    };
    let mut out_deg = vec![0usize; ncomp];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    let mut seen_pairs = std::collections::HashSet::new();
    for j in 0..ne {
        for &i in &succ[j] {
            let (cj, ci) = (comp_of[j], comp_of[i]);
            if cj != ci && seen_pairs.insert((cj, ci)) {
                out_deg[cj] += 1;
                preds[ci].push(cj);
            }
        }
    }
    let min_edge: Vec<usize> = sccs.iter().map(|m| *m.iter().min().unwrap()).collect();
    let mut ready: Vec<usize> = (0..ncomp).filter(|&c| out_deg[c] == 0).collect();
    let mut order = Vec::with_capacity(ncomp);
    while !ready.is_empty() {
        ready.sort_by_key(|&c| min_edge[c]);
        let c = ready.remove(0);
        order.push(c);
        for &p in &preds[c] {
            out_deg[p] -= 1;
            if out_deg[p] == 0 {
                ready.push(p);
            }
        }
    }
    debug_assert_eq!(order.len(), ncomp);
    let mut strata = Vec::with_capacity(ncomp);
    let mut edge_stratum = vec![0usize; ne];
    for (s, &c) in order.iter().enumerate() {
        let mut edges = sccs[c].clone();
        edges.sort_unstable();
        for &e in &edges {
            edge_stratum[e] = s;
        }
        let matrix = transition_matrix(m, &edges);
        let (class, pf) = classify_matrix(&matrix);
        strata.push(Stratum {
            edges,
            matrix,
            class,
            pf_eigenvalue: pf,
        });
    }
    Filtration {
        strata,
        edge_stratum,
    }
}

fn tarjan_sccs(n: usize, succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    // iterative Tarjan
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut sccs = Vec::new();
    let mut counter = 0usize;
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut pi)) = call.last_mut() {
            if *pi == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *pi < succ[v].len() {
                let w = succ[v][*pi];
                *pi += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    sccs.push(comp);
                }
                call.pop();
                if let Some(&mut (u, _)) = call.last_mut() {
                    low[u] = low[u].min(low[v]);
                }
            }
        }
    }
    sccs
}

/// Crossing counts of stratum edges by stratum edge images (unoriented).
pub fn transition_matrix(m: &GraphMap, edges: &[usize]) -> Vec<Vec<u64>> {
    let pos: HashMap<usize, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let k = edges.len();
    let mut mat = vec![vec![0u64; k]; k];
    for (j, &e) in edges.iter().enumerate() {
        for &d in &m.edge_map[e].0 {
            if let Some(&i) = pos.get(&dir_edge(d)) {
                mat[i][j] += 1;
            }
        }
    }
    mat
}

fn is_permutation_matrix(m: &[Vec<u64>]) -> bool {
    let n = m.len();
    let rows_ok = m.iter().all(|r| r.iter().sum::<u64>() == 1);
    let cols_ok = (0..n).all(|j| (0..n).map(|i| m[i][j]).sum::<u64>() == 1);
    rows_ok && cols_ok && m.iter().flatten().all(|&x| x <= 1)
}

pub fn is_irreducible(m: &[Vec<u64>]) -> bool {
    let n = m.len();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return m[0][0] > 0;
    }
    // reachability in both directions for every pair
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = m[i][j] > 0;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n).all(|i| (0..n).all(|j| reach[i][j]))
}

fn classify_matrix(m: &[Vec<u64>]) -> (StratumClass, Option<f64>) {
    if !is_irreducible(m) {
        // strata are SCCs, so this is the singleton-without-self-crossing case
        return (StratumClass::Zero, None);
    }
    if is_permutation_matrix(m) {
        return (StratumClass::Neg, Some(1.0));
    }
    let lambda = pf_eigenvalue(m).expect("irreducible by construction");
    let class = if lambda > 1.0 + 1e-9 {
        StratumClass::Eg
    } else {
        StratumClass::Neg
    };
    (class, Some(lambda))
}

pub const PF_RESIDUAL: f64 = 1e-12;
pub const PF_MAX_ITERS: usize = 100_000;

/// Dominant eigenvalue of an irreducible nonnegative integer matrix by
/// power iteration on `M + I` (the shift forces aperiodicity). Returns
/// exactly 1 for permutation matrices. Residual `‖Mv − λv‖∞ < 1e−12`.
pub fn pf_eigenvalue(m: &[Vec<u64>]) -> Result<f64, GraphMapError> {
    if !is_irreducible(m) {
        return Err(GraphMapError::Reducible);
    }
    if is_permutation_matrix(m) {
        return Ok(1.0);
    }
    let n = m.len();
    let mf: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let mut v = vec![1.0f64; n];
    for _ in 0..PF_MAX_ITERS {
        // w = (M + I) v
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            let mut acc = v[i];
            for j in 0..n {
                acc += mf[i][j] * v[j];
            }
            w[i] = acc;
        }
        let norm = w.iter().cloned().fold(0.0f64, f64::max);
        for x in &mut w {
            *x /= norm;
        }
        // λ estimate for M itself and residual check
        let mut mv = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                mv[i] += mf[i][j] * w[j];
            }
        }
        let num: f64 = mv.iter().zip(&w).map(|(a, b)| a * b).sum();
        let den: f64 = w.iter().map(|x| x * x).sum();
        let lambda = num / den;
        let residual = mv
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0f64, f64::max);
        v = w;
        if residual < PF_RESIDUAL {
            return Ok(lambda);
        }
    }
    Err(GraphMapError::NonConvergent)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum Legality {
    Legal,
    Illegal,
    Degenerate,
}

/// Exact turn legality table: a nondegenerate turn is illegal iff its
/// `Tf`-orbit reaches a degenerate turn.
pub fn turn_table(m: &GraphMap) -> BTreeMap<(Dir, Dir), Legality> {
    let mut turns = Vec::new();
    let dirs: Vec<Dir> = m.graph.dirs().collect();
    for (i, &d1) in dirs.iter().enumerate() {
        for &d2 in dirs.iter().skip(i) {
            if m.graph.src(d1) == m.graph.src(d2) {
                turns.push((d1, d2));
            }
        }
    }
    let step = |t: (Dir, Dir)| -> (Dir, Dir) {
        let (a, b) = (m.tf(t.0), m.tf(t.1));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let mut table = BTreeMap::new();
    for &t in &turns {
        if t.0 == t.1 {
            table.insert(t, Legality::Degenerate);
            continue;
        }
        let mut seen = std::collections::HashSet::new();
        let mut cur = t;
        let verdict = loop {
            if cur.0 == cur.1 {
                break Legality::Illegal;
            }
            if !seen.insert(cur) {
                break Legality::Legal;
            }
            cur = step(cur);
        };
        table.insert(t, verdict);
    }
    table
}

pub fn turn_is_legal(table: &BTreeMap<(Dir, Dir), Legality>, d1: Dir, d2: Dir) -> Legality {
    let key = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
    *table.get(&key).unwrap_or(&Legality::Legal)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub enum CheckOutcome {
    Pass,
    /// Verified for all connecting paths up to the stated length.
    BoundedPass { length_bound: usize, paths_checked: usize },
    Fail { witness: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct StratumRttReport {
    pub stratum: usize,
    /// (i): images of stratum edges contain no illegal turn within the stratum.
    pub images_legal: CheckOutcome,
    /// (ii): nondegeneracy of images of connecting paths in the lower graph.
    pub connecting_paths: CheckOutcome,
    /// (iii): `Tf` keeps stratum directions in the stratum.
    pub directions_stay: CheckOutcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct RttReport {
    pub eg_strata: Vec<StratumRttReport>,
    pub passed: bool,
}

pub const RTT_PATH_BOUND: usize = 12;
pub const RTT_PATH_CAP: usize = 200_000;

/// Check the relative train track conditions for every EG stratum.
/// Conditions (i) and (iii) are exact; (ii) is verified for connecting
/// paths up to a length bound and reported as such.
pub fn check_rtt(m: &GraphMap, filt: &Filtration, path_bound: usize) -> RttReport {
    let table = turn_table(m);
    let mut reports = Vec::new();
    for (s, stratum) in filt.strata.iter().enumerate() {
        if stratum.class != StratumClass::Eg {
            continue;
        }
        let in_stratum = |d: Dir| filt.edge_stratum[dir_edge(d)] == s;

        // (iii)
        let mut directions_stay = CheckOutcome::Pass;
        for &e in &stratum.edges {
            for d in [dir(e, true), dir(e, false)] {
                let td = m.tf(d);
                if !in_stratum(td) {
                    directions_stay = CheckOutcome::Fail {
                        witness: format!(
                            "Tf({}) = {} leaves the stratum",
                            m.graph.dir_name(d),
                            m.graph.dir_name(td)
                        ),
                    };
                }
            }
        }

        // (i)
        let mut images_legal = CheckOutcome::Pass;
        'outer: for &e in &stratum.edges {
            let img = &m.edge_map[e];
            for w in img.0.windows(2) {
                let (din, dout) = (dir_rev(w[0]), w[1]);
                if in_stratum(din)
                    && in_stratum(dout)
                    && turn_is_legal(&table, din, dout) == Legality::Illegal
                {
                    images_legal = CheckOutcome::Fail {
                        witness: format!(
                            "image of {} takes the illegal stratum turn {{{}, {}}}",
                            m.graph.edge_names[e],
                            m.graph.dir_name(din),
                            m.graph.dir_name(dout)
                        ),
                    };
                    break 'outer;
                }
            }
        }

        // (ii): tight paths in G_{r-1} with endpoints in H_r ∩ G_{r-1}
        let lower_edges: Vec<usize> = (0..m.graph.edges.len())
            .filter(|&e| filt.edge_stratum[e] < s)
            .collect();
        let connecting_paths = if lower_edges.is_empty() {
            CheckOutcome::Pass
        } else {
            let mut stratum_vertices = std::collections::BTreeSet::new();
            for &e in &stratum.edges {
                let (a, b) = m.graph.edges[e];
                stratum_vertices.insert(a);
                stratum_vertices.insert(b);
            }
            let lower_dirs: Vec<Dir> = lower_edges
                .iter()
                .flat_map(|&e| [dir(e, true), dir(e, false)])
                .collect();
            let mut checked = 0usize;
            let mut failure = None;
            let mut stack: Vec<Vec<Dir>> = lower_dirs
                .iter()
                .filter(|&&d| stratum_vertices.contains(&m.graph.src(d)))
                .map(|&d| vec![d])
                .collect();
            while let Some(path) = stack.pop() {
                if checked >= RTT_PATH_CAP {
                    break;
                }
                let endpoint = m.graph.dst(*path.last().unwrap());
                if stratum_vertices.contains(&endpoint) {
                    checked += 1;
                    let img = m
                        .tighten_image(&EdgePath(path.clone()))
                        .expect("paths built inside the graph");
                    if img.is_empty() {
                        failure = Some(format!(
                            "connecting path of length {} maps to a point",
                            path.len()
                        ));
                        break;
                    }
                }
                if path.len() < path_bound {
                    for &d in &lower_dirs {
                        if m.graph.src(d) == endpoint && d != dir_rev(*path.last().unwrap()) {
                            let mut next = path.clone();
                            next.push(d);
                            stack.push(next);
                        }
                    }
                }
            }
            match failure {
                Some(witness) => CheckOutcome::Fail { witness },
                None => CheckOutcome::BoundedPass {
                    length_bound: path_bound,
                    paths_checked: checked,
                },
            }
        };

        reports.push(StratumRttReport {
            stratum: s,
            images_legal,
            connecting_paths,
            directions_stay,
        });
    }
    let passed = reports.iter().all(|r| {
        !matches!(r.images_legal, CheckOutcome::Fail { .. })
            && !matches!(r.connecting_paths, CheckOutcome::Fail { .. })
            && !matches!(r.directions_stay, CheckOutcome::Fail { .. })
    });
    RttReport {
        eg_strata: reports,
        passed,
    }
}

pub const BCC_DEFAULT_CAP: usize = 64;

/// Certified upper bound for the cancellation at a tight concatenation
/// junction under one application of `f_#`.
///
/// The worst case is the longest common prefix of the two image streams at
/// a junction, maximized over all tight continuations; this is computed
/// exactly as the longest path in a finite overlap-state graph. A cycle in
/// that graph means unbounded overlap, reported as non-stabilizing (such a
/// map is not injective on path homotopy classes). `cap` bounds the
/// returned cancellation; exceeding it also reports non-stabilizing.
pub fn bcc_upper_bound(m: &GraphMap, cap: usize) -> Result<u64, GraphMapError> {
    #[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
    struct Stream {
        d: Dir,
        pos: usize,
    }
    type State = (Stream, Stream);

    struct Ctx<'a> {
        m: &'a GraphMap,
        memo: HashMap<State, u64>,
        on_stack: std::collections::HashSet<State>,
        cap: u64,
    }

    impl Ctx<'_> {
        fn image_len(&self, d: Dir) -> usize {
            self.m.edge_map[dir_edge(d)].len()
        }

        fn image_at(&self, d: Dir, pos: usize) -> Dir {
            let path = &self.m.edge_map[dir_edge(d)];
            if dir_forward(d) {
                path.0[pos]
            } else {
                dir_rev(path.0[path.len() - 1 - pos])
            }
        }

        /// Sup over tight continuations of the matched prefix length from
        /// this state. None = unbounded.
        fn solve(&mut self, s: State) -> Option<u64> {
            if let Some(&v) = self.memo.get(&s) {
                return Some(v);
            }
            if self.on_stack.contains(&s) {
                return None; // positive-gain cycle
            }
            self.on_stack.insert(s);
            let (a, b) = s;
            let result = if a.pos == self.image_len(a.d) {
                // side A needs a fresh tight continuation
                let from = self.m.graph.dst(a.d);
                let mut best = 0u64;
                for e in self.m.graph.dirs() {
                    if self.m.graph.src(e) == from && e != dir_rev(a.d) {
                        match self.solve((Stream { d: e, pos: 0 }, b)) {
                            Some(v) => best = best.max(v),
                            None => {
                                self.on_stack.remove(&s);
                                return None;
                            }
                        }
                    }
                }
                Some(best)
            } else if b.pos == self.image_len(b.d) {
                let from = self.m.graph.dst(b.d);
                let mut best = 0u64;
                for e in self.m.graph.dirs() {
                    if self.m.graph.src(e) == from && e != dir_rev(b.d) {
                        match self.solve((a, Stream { d: e, pos: 0 })) {
                            Some(v) => best = best.max(v),
                            None => {
                                self.on_stack.remove(&s);
                                return None;
                            }
                        }
                    }
                }
                Some(best)
            } else {
                let xa = self.image_at(a.d, a.pos);
                let xb = self.image_at(b.d, b.pos);
                if xa != xb {
                    Some(0)
                } else {
                    let next = (
                        Stream { d: a.d, pos: a.pos + 1 },
                        Stream { d: b.d, pos: b.pos + 1 },
                    );
                    match self.solve(next) {
                        Some(v) if v + 1 <= self.cap => Some(v + 1),
                        Some(_) => None,
                        None => None,
                    }
                }
            };
            self.on_stack.remove(&s);
            if let Some(v) = result {
                self.memo.insert(s, v);
            }
            result
        }
    }

    let mut ctx = Ctx {
        m,
        memo: HashMap::new(),
        on_stack: std::collections::HashSet::new(),
        cap: cap as u64,
    };
    let mut bound = 0u64;
    let dirs: Vec<Dir> = m.graph.dirs().collect();
    for &d1 in &dirs {
        for &d2 in &dirs {
            if d1 == d2 || m.graph.src(d1) != m.graph.src(d2) {
                continue;
            }
            let s = (Stream { d: d1, pos: 0 }, Stream { d: d2, pos: 0 });
            match ctx.solve(s) {
                Some(v) => bound = bound.max(v),
                None => return Err(GraphMapError::NonStabilizing(cap)),
            }
        }
    }
    Ok(bound)
}

/// `2·BCC / (λ − 1)`; exact when the inputs are exact in f64.
pub fn critical_constant_value(bcc: u64, lambda: f64) -> Result<f64, GraphMapError> {
    if lambda <= 1.0 {
        return Err(GraphMapError::NotExponential);
    }
    Ok(2.0 * bcc as f64 / (lambda - 1.0))
}

/// Critical constant of an EG stratum from the map's certified BCC bound.
pub fn critical_constant(m: &GraphMap, s: &Stratum) -> Result<f64, GraphMapError> {
    if s.class != StratumClass::Eg {
        return Err(GraphMapError::NotExponential);
    }
    let bcc = bcc_upper_bound(m, BCC_DEFAULT_CAP)?;
    critical_constant_value(bcc, s.pf_eigenvalue.expect("EG strata carry λ"))
}

/// JSON-facing serialization: edges with endpoints plus the edge map as
/// path strings over edge ids, `~` marking reversal.
#[derive(Clone, Debug, Serialize)]
pub struct GraphMapJson {
    pub edges: Vec<GraphMapEdgeJson>,
    pub map: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphMapEdgeJson {
    pub id: usize,
    pub from: u32,
    pub to: u32,
}

impl GraphMap {
    pub fn to_json(&self) -> GraphMapJson {
        let edges = self
            .graph
            .edges
            .iter()
            .enumerate()
            .map(|(id, &(from, to))| GraphMapEdgeJson { id, from, to })
            .collect();
        let map = self
            .edge_map
            .iter()
            .enumerate()
            .map(|(e, path)| {
                let tokens: Vec<String> = path
                    .0
                    .iter()
                    .map(|&d| {
                        if dir_forward(d) {
                            format!("{}", dir_edge(d))
                        } else {
                            format!("~{}", dir_edge(d))
                        }
                    })
                    .collect();
                (e.to_string(), tokens.join(" "))
            })
            .collect();
        GraphMapJson { edges, map }
    }
}

impl fmt::Display for StratumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StratumClass::Eg => write!(f, "EG"),
            StratumClass::Neg => write!(f, "NEG"),
            StratumClass::Zero => write!(f, "zero"),
        }
    }
}
