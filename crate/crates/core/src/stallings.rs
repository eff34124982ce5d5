//! Folded core graphs for finitely generated subgroups.
//!
//! A subgroup given by generator words is folded into an immersed labeled
//! graph (one edge label per generator of the ambient free group, at most
//! one edge per label and direction at every vertex). The fold history is
//! kept, so membership answers come with a rewriting of the word as a
//! product of the original generators. Conjugacy classes of subgroups are
//! compared through basepoint-free cores up to label-preserving graph
//! isomorphism, via a canonical serialization.

use crate::freegroup::{FreeGroupError, Letter, Word};
use serde::Serialize;
use std::collections::VecDeque;
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum StallingsError {
    #[error("graph has no fold history; rewriting unavailable")]
    NoFoldHistory,
    #[error("basepoint required")]
    NoBasepoint,
}

/// Word in the abstract generators of a subgroup: pairs (generator index,
/// positive?). Evaluating substitutes the generator words and reduces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubgroupExpr(pub Vec<(usize, bool)>);

impl SubgroupExpr {
    pub fn evaluate(&self, gens: &[Word]) -> Word {
        let mut out = Word::empty();
        for &(i, pos) in &self.0 {
            let g = if pos { gens[i].clone() } else { gens[i].inverse() };
            out = out.concat(&g);
        }
        out
    }

    pub fn format_with(&self, gens: &[Word]) -> String {
        if self.0.is_empty() {
            return "1".to_string();
        }
        self.0
            .iter()
            .map(|&(i, pos)| {
                if pos {
                    format!("({})", gens[i])
                } else {
                    format!("({})^-1", gens[i])
                }
            })
            .collect::<Vec<_>>()
            .join("·")
    }
}

#[derive(Clone, Debug)]
enum FoldStep {
    VertexMerge {
        kept: u32,
        removed: u32,
        /// (edge, endpoint-is-src) endpoints rewritten removed→kept.
        rewrites: Vec<(u32, bool)>,
        /// Direction u→kept present at merge time.
        justify_kept: (u32, bool),
        /// Direction u→removed present at merge time.
        justify_removed: (u32, bool),
    },
    EdgeMerge {
        kept: u32,
        removed: u32,
    },
}

#[derive(Clone)]
struct FoldData {
    base: u32,
    e_src: Vec<u32>,
    e_dst: Vec<u32>,
    history: Vec<FoldStep>,
    /// Per generator, its wedge path as (edge, forward) steps.
    petals: Vec<Vec<(u32, bool)>>,
    /// edge → (petal, position); wedge edges only.
    edge_petal: Vec<(u32, u32)>,
    /// builder vertex → slot → (target, edge, forward); folded final graph.
    trace_adj: Vec<Vec<Option<(u32, u32, bool)>>>,
}

struct Builder {
    rank: usize,
    e_src: Vec<u32>,
    e_dst: Vec<u32>,
    e_letter: Vec<u32>,
    e_alive: Vec<bool>,
    v_alive: Vec<bool>,
    incident: Vec<Vec<(u32, bool)>>,
    history: Vec<FoldStep>,
    petals: Vec<Vec<(u32, bool)>>,
    edge_petal: Vec<(u32, u32)>,
}

impl Builder {
    fn new_wedge(rank: usize, gens: &[Word]) -> Builder {
        let mut b = Builder {
            rank,
            e_src: Vec::new(),
            e_dst: Vec::new(),
            e_letter: Vec::new(),
            e_alive: Vec::new(),
            v_alive: vec![true],
            incident: vec![Vec::new()],
            history: Vec::new(),
            petals: Vec::new(),
            edge_petal: Vec::new(),
        };
        for (gi, g) in gens.iter().enumerate() {
            let mut path = Vec::new();
            let n = g.len();
            let mut prev = 0u32;
            for (pos, &l) in g.letters().iter().enumerate() {
                let next = if pos + 1 == n { 0 } else { b.new_vertex() };
                // positive edge oriented along the letter sign
                let (src, dst, fwd) = if l.is_positive() {
                    (prev, next, true)
                } else {
                    (next, prev, false)
                };
                let e = b.new_edge(src, dst, l.index() as u32);
                b.edge_petal.push((gi as u32, pos as u32));
                path.push((e, fwd));
                prev = next;
            }
            b.petals.push(path);
        }
        b
    }

    fn new_vertex(&mut self) -> u32 {
        self.v_alive.push(true);
        self.incident.push(Vec::new());
        (self.v_alive.len() - 1) as u32
    }

    fn new_edge(&mut self, src: u32, dst: u32, letter: u32) -> u32 {
        let e = self.e_src.len() as u32;
        self.e_src.push(src);
        self.e_dst.push(dst);
        self.e_letter.push(letter);
        self.e_alive.push(true);
        self.incident[src as usize].push((e, true));
        self.incident[dst as usize].push((e, false));
        e
    }

    /// Out-directions of `v` as (slot, target, edge, forward), sorted.
    fn out_dirs(&self, v: u32) -> Vec<(usize, u32, u32, bool)> {
        let mut dirs = Vec::new();
        for &(e, is_src) in &self.incident[v as usize] {
            if !self.e_alive[e as usize] {
                continue;
            }
            let (src, dst) = (self.e_src[e as usize], self.e_dst[e as usize]);
            let letter = self.e_letter[e as usize] as usize;
            if is_src && src == v {
                dirs.push((2 * letter, dst, e, true));
            } else if !is_src && dst == v {
                dirs.push((2 * letter + 1, src, e, false));
            }
        }
        dirs.sort_unstable();
        dirs.dedup();
        dirs
    }

    fn fold(&mut self) {
        let mut queue: VecDeque<u32> = (0..self.v_alive.len() as u32).collect();
        while let Some(v) = queue.pop_front() {
            if !self.v_alive[v as usize] {
                continue;
            }
            loop {
                let dirs = self.out_dirs(v);
                let mut pair = None;
                for w in dirs.windows(2) {
                    if w[0].0 == w[1].0 {
                        pair = Some((w[0], w[1]));
                        break;
                    }
                }
                let Some((d1, d2)) = pair else { break };
                let (_, mut t1, e1, f1) = d1;
                let (_, mut t2, e2, f2) = d2;
                let (mut k1, mut k2) = ((e1, f1), (e2, f2));
                if t1 != t2 {
                    // never retire the basepoint; otherwise keep the lower index
                    if t2 == 0 || (t1 != 0 && t2 < t1) {
                        std::mem::swap(&mut t1, &mut t2);
                        std::mem::swap(&mut k1, &mut k2);
                    }
                    self.merge_vertices(t1, t2, k1, k2);
                    queue.push_back(t1);
                }
                // now parallel: merge the duplicate edge
                let (kept_e, removed_e) = if k1.0 <= k2.0 { (k1.0, k2.0) } else { (k2.0, k1.0) };
                if kept_e != removed_e {
                    self.e_alive[removed_e as usize] = false;
                    self.history.push(FoldStep::EdgeMerge {
                        kept: kept_e,
                        removed: removed_e,
                    });
                }
                queue.push_back(v);
            }
        }
    }

    fn merge_vertices(&mut self, kept: u32, removed: u32, justify_kept: (u32, bool), justify_removed: (u32, bool)) {
        let mut rewrites = Vec::new();
        let entries = std::mem::take(&mut self.incident[removed as usize]);
        for (e, is_src) in entries {
            if !self.e_alive[e as usize] {
                continue;
            }
            if is_src && self.e_src[e as usize] == removed {
                self.e_src[e as usize] = kept;
                rewrites.push((e, true));
                self.incident[kept as usize].push((e, true));
            } else if !is_src && self.e_dst[e as usize] == removed {
                self.e_dst[e as usize] = kept;
                rewrites.push((e, false));
                self.incident[kept as usize].push((e, false));
            }
        }
        self.v_alive[removed as usize] = false;
        self.history.push(FoldStep::VertexMerge {
            kept,
            removed,
            rewrites,
            justify_kept,
            justify_removed,
        });
    }

    /// Remove non-base vertices of valence ≤ 1 (and dead-end edges).
    fn trim(&mut self) {
        loop {
            let mut changed = false;
            for v in 1..self.v_alive.len() as u32 {
                if !self.v_alive[v as usize] {
                    continue;
                }
                let dirs = self.out_dirs(v);
                if dirs.len() <= 1 {
                    for &(_, _, e, _) in &dirs {
                        self.e_alive[e as usize] = false;
                    }
                    self.v_alive[v as usize] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn into_core_graph(self) -> CoreGraph {
        let nv = self.v_alive.len();
        let mut trace_adj: Vec<Vec<Option<(u32, u32, bool)>>> = vec![vec![None; 2 * self.rank]; nv];
        for v in 0..nv as u32 {
            if !self.v_alive[v as usize] {
                continue;
            }
            for (slot, target, e, fwd) in self.out_dirs(v) {
                trace_adj[v as usize][slot] = Some((target, e, fwd));
            }
        }
        // renumber alive vertices by BFS from base
        let mut order = Vec::new();
        let mut idx = vec![u32::MAX; nv];
        let mut q = VecDeque::new();
        q.push_back(0u32);
        idx[0] = 0;
        order.push(0u32);
        while let Some(v) = q.pop_front() {
            for slot in 0..2 * self.rank {
                if let Some((t, _, _)) = trace_adj[v as usize][slot] {
                    if idx[t as usize] == u32::MAX {
                        idx[t as usize] = order.len() as u32;
                        order.push(t);
                        q.push_back(t);
                    }
                }
            }
        }
        let mut adj = vec![vec![None; 2 * self.rank]; order.len()];
        for (new_v, &old_v) in order.iter().enumerate() {
            for slot in 0..2 * self.rank {
                if let Some((t, _, _)) = trace_adj[old_v as usize][slot] {
                    adj[new_v][slot] = Some(idx[t as usize]);
                }
            }
        }
        CoreGraph {
            rank: self.rank,
            adj,
            base: Some(0),
            fold: Some(Box::new(FoldData {
                base: 0,
                e_src: self.e_src,
                e_dst: self.e_dst,
                history: self.history,
                petals: self.petals,
                edge_petal: self.edge_petal,
                trace_adj,
            })),
        }
    }
}

/// A folded labeled graph; basepointed when built from generators,
/// basepoint-free after [`CoreGraph::core`].
#[derive(Clone)]
pub struct CoreGraph {
    rank: usize,
    /// `adj[v][slot]` = target of the unique `slot`-labeled direction at `v`.
    adj: Vec<Vec<Option<u32>>>,
    base: Option<u32>,
    fold: Option<Box<FoldData>>,
}

impl CoreGraph {
    /// Stallings fold of the wedge of generator loops. Deterministic: the
    /// fold queue is FIFO with ties broken by vertex index.
    pub fn fold(rank: usize, gens: &[Word]) -> CoreGraph {
        let mut b = Builder::new_wedge(rank, gens);
        b.fold();
        b.trim();
        b.into_core_graph()
    }

    /// Trivial one-vertex graph (the trivial subgroup).
    pub fn trivial(rank: usize) -> CoreGraph {
        CoreGraph {
            rank,
            adj: vec![vec![None; 2 * rank]],
            base: Some(0),
            fold: None,
        }
    }

    /// The rose on all generators: the whole group.
    pub fn rose(rank: usize) -> CoreGraph {
        let mut adj = vec![vec![None; 2 * rank]];
        for slot in 0..2 * rank {
            adj[0][slot] = Some(0);
        }
        CoreGraph {
            rank,
            adj,
            base: Some(0),
            fold: None,
        }
    }

    pub fn ambient_rank(&self) -> usize {
        self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .map(|row| row.iter().flatten().count())
            .sum::<usize>()
            / 2
    }

    pub fn base(&self) -> Option<u32> {
        self.base
    }

    pub fn membership_root(&self) -> u32 {
        self.base.unwrap_or(0)
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].iter().flatten().count()
    }

    pub fn neighbor(&self, v: u32, l: Letter) -> Option<u32> {
        self.adj[v as usize][l.slot()]
    }

    pub fn is_trivial(&self) -> bool {
        self.edge_count() == 0
    }

    /// rank = |E| − |V| + 1 for a connected graph.
    pub fn subgroup_rank(&self) -> usize {
        (self.edge_count() + 1).saturating_sub(self.vertex_count())
    }

    /// Finite index iff the graph is a full cover of the rose.
    pub fn index_and_rank(&self) -> (usize, Option<usize>) {
        let full = self
            .adj
            .iter()
            .all(|row| row.iter().all(|t| t.is_some()));
        let index = if full && !self.is_trivial() {
            Some(self.vertex_count())
        } else {
            None
        };
        (self.subgroup_rank(), index)
    }

    /// Trace a reduced word from `start`; None when the path falls off.
    pub fn trace_from(&self, start: u32, w: &[Letter]) -> Option<u32> {
        let mut cur = start;
        for &l in w {
            cur = self.adj[cur as usize][l.slot()]?;
        }
        Some(cur)
    }

    /// Membership of `w` in the subgroup of loops at the membership root.
    pub fn contains(&self, w: &Word) -> bool {
        let root = self.membership_root();
        self.trace_from(root, w.letters()) == Some(root)
    }

    /// Does some rotation of the cyclic word trace a closed circuit?
    /// This is "the conjugacy class of `c` is carried by the subgroup".
    pub fn carries_class(&self, c: &crate::freegroup::CyclicWord) -> bool {
        if c.is_empty() {
            return true;
        }
        (0..self.vertex_count() as u32)
            .any(|v| self.trace_from(v, c.letters()) == Some(v))
    }

    /// Membership with a rewriting in the original generators. Requires the
    /// fold history (graphs produced by [`CoreGraph::fold`]).
    pub fn contains_with_expression(&self, w: &Word) -> Result<Option<SubgroupExpr>, StallingsError> {
        let data = self.fold.as_ref().ok_or(StallingsError::NoFoldHistory)?;
        let mut cur = data.base;
        let mut path: Vec<(u32, bool)> = Vec::with_capacity(w.len());
        for &l in w.letters() {
            match data.trace_adj[cur as usize][l.slot()] {
                Some((t, e, fwd)) => {
                    path.push((e, fwd));
                    cur = t;
                }
                None => return Ok(None),
            }
        }
        if cur != data.base {
            return Ok(None);
        }
        Ok(Some(data.rewrite(path)))
    }

    /// Canonical serialization; complete isomorphism invariant for
    /// connected folded graphs. Basepointed graphs serialize from the base,
    /// basepoint-free ones take the minimum over all roots.
    pub fn canonical_key(&self) -> Vec<u32> {
        match self.base {
            Some(b) => self.serialize_from(b),
            None => (0..self.vertex_count() as u32)
                .map(|v| self.serialize_from(v))
                .min()
                .unwrap_or_default(),
        }
    }

    fn serialize_from(&self, root: u32) -> Vec<u32> {
        let n = self.vertex_count();
        let mut idx = vec![u32::MAX; n];
        let mut order = Vec::with_capacity(n);
        idx[root as usize] = 0;
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for slot in 0..2 * self.rank {
                if let Some(t) = self.adj[v as usize][slot] {
                    if idx[t as usize] == u32::MAX {
                        idx[t as usize] = order.len() as u32;
                        order.push(t);
                    }
                }
            }
        }
        debug_assert_eq!(order.len(), n, "graph must be connected");
        let mut out = Vec::with_capacity(n * 2 * self.rank + 1);
        out.push(n as u32);
        for &v in &order {
            for slot in 0..2 * self.rank {
                out.push(match self.adj[v as usize][slot] {
                    Some(t) => idx[t as usize] + 1,
                    None => 0,
                });
            }
        }
        out
    }

    /// Renumber so that vertex order matches the canonical serialization.
    pub fn canonicalize(&self) -> CoreGraph {
        if self.vertex_count() == 0 {
            return self.clone();
        }
        let root = match self.base {
            Some(b) => b,
            None => (0..self.vertex_count() as u32)
                .min_by_key(|&v| self.serialize_from(v))
                .unwrap_or(0),
        };
        let n = self.vertex_count();
        let mut idx = vec![u32::MAX; n];
        let mut order = Vec::with_capacity(n);
        idx[root as usize] = 0;
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for slot in 0..2 * self.rank {
                if let Some(t) = self.adj[v as usize][slot] {
                    if idx[t as usize] == u32::MAX {
                        idx[t as usize] = order.len() as u32;
                        order.push(t);
                    }
                }
            }
        }
        let mut adj = vec![vec![None; 2 * self.rank]; n];
        for (new_v, &old_v) in order.iter().enumerate() {
            for slot in 0..2 * self.rank {
                adj[new_v][slot] = self.adj[old_v as usize][slot].map(|t| idx[t as usize]);
            }
        }
        CoreGraph {
            rank: self.rank,
            adj,
            base: self.base.map(|_| 0),
            fold: None,
        }
    }

    /// Basepoint-free core: strip valence-1 vertices (including the base)
    /// and renumber canonically. The trivial subgroup cores to the empty
    /// graph.
    pub fn core(&self) -> CoreGraph {
        let n = self.vertex_count();
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if !alive[v] {
                    continue;
                }
                let deg = (0..2 * self.rank)
                    .filter(|&s| {
                        self.adj[v][s]
                            .map(|t| alive[t as usize])
                            .unwrap_or(false)
                    })
                    .count();
                if deg <= 1 {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let keep: Vec<u32> = (0..n as u32).filter(|&v| alive[v as usize]).collect();
        if keep.is_empty() {
            return CoreGraph {
                rank: self.rank,
                adj: Vec::new(),
                base: None,
                fold: None,
            };
        }
        let mut idx = vec![u32::MAX; n];
        for (i, &v) in keep.iter().enumerate() {
            idx[v as usize] = i as u32;
        }
        let mut adj = vec![vec![None; 2 * self.rank]; keep.len()];
        for (i, &v) in keep.iter().enumerate() {
            for slot in 0..2 * self.rank {
                if let Some(t) = self.adj[v as usize][slot] {
                    if alive[t as usize] {
                        adj[i][slot] = Some(idx[t as usize]);
                    }
                }
            }
        }
        let g = CoreGraph {
            rank: self.rank,
            adj,
            base: None,
            fold: None,
        };
        g.canonicalize()
    }

    /// Loop basis at `root` from a BFS spanning tree; the words generate
    /// the subgroup of loops at `root` freely.
    pub fn loop_basis(&self, root: u32) -> Vec<Word> {
        let n = self.vertex_count();
        if n == 0 {
            return Vec::new();
        }
        let mut parent: Vec<Option<(u32, Letter)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![root];
        seen[root as usize] = true;
        let mut head = 0;
        let mut tree: Vec<Vec<bool>> = vec![vec![false; 2 * self.rank]; n];
        while head < order.len() {
            let v = order[head];
            head += 1;
            for slot in 0..2 * self.rank {
                if let Some(t) = self.adj[v as usize][slot] {
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        parent[t as usize] = Some((v, Letter::from_slot(slot)));
                        tree[v as usize][slot] = true;
                        tree[t as usize][Letter::from_slot(slot).inverse().slot()] = true;
                        order.push(t);
                    }
                }
            }
        }
        let path_to = |v: u32| -> Word {
            let mut letters = Vec::new();
            let mut cur = v;
            while let Some((p, l)) = parent[cur as usize] {
                letters.push(l);
                cur = p;
            }
            letters.reverse();
            Word::reduce(letters)
        };
        let mut gens = Vec::new();
        for &v in &order {
            for slot in 0..2 * self.rank {
                let l = Letter::from_slot(slot);
                if !l.is_positive() {
                    continue; // one orientation per edge
                }
                if let Some(t) = self.adj[v as usize][slot] {
                    if tree[v as usize][slot] {
                        continue;
                    }
                    let mut w = path_to(v);
                    w.push(l);
                    w = w.concat(&path_to(t).inverse());
                    if !w.is_empty() {
                        gens.push(w);
                    }
                }
            }
        }
        gens
    }

    /// Lex-least shortest path labels from `root` to every vertex.
    fn bfs_path_words(&self, root: u32) -> Vec<Option<Word>> {
        let n = self.vertex_count();
        let mut out: Vec<Option<Word>> = vec![None; n];
        out[root as usize] = Some(Word::empty());
        let mut q = VecDeque::new();
        q.push_back(root);
        while let Some(v) = q.pop_front() {
            for slot in 0..2 * self.rank {
                if let Some(t) = self.adj[v as usize][slot] {
                    if out[t as usize].is_none() {
                        let mut w = out[v as usize].clone().unwrap();
                        w.push(Letter::from_slot(slot));
                        out[t as usize] = Some(w);
                        q.push_back(t);
                    }
                }
            }
        }
        out
    }
}

impl fmt::Debug for CoreGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CoreGraph(V={}, E={}, base={:?})",
            self.vertex_count(),
            self.edge_count(),
            self.base
        )
    }
}

impl PartialEq for CoreGraph {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}
impl Eq for CoreGraph {}

impl FoldData {
    /// Rewrite a traced loop (edge,direction sequence in the folded graph)
    /// as a word in the original generators by replaying the fold history
    /// backwards. Detours inserted at un-merged vertices have cancelling
    /// labels, so the wedge loop reads the same reduced word.
    fn rewrite(&self, path: Vec<(u32, bool)>) -> SubgroupExpr {
        let mut src = self.e_src.clone();
        let mut dst = self.e_dst.clone();
        let mut path = path;
        let d_src = |src: &[u32], dst: &[u32], (e, f): (u32, bool)| -> u32 {
            if f {
                src[e as usize]
            } else {
                dst[e as usize]
            }
        };
        let d_dst = |src: &[u32], dst: &[u32], (e, f): (u32, bool)| -> u32 {
            if f {
                dst[e as usize]
            } else {
                src[e as usize]
            }
        };
        for step in self.history.iter().rev() {
            match step {
                FoldStep::EdgeMerge { kept, removed } => {
                    src[*removed as usize] = src[*kept as usize];
                    dst[*removed as usize] = dst[*kept as usize];
                }
                FoldStep::VertexMerge {
                    kept,
                    removed,
                    rewrites,
                    justify_kept,
                    justify_removed,
                } => {
                    for &(e, is_src) in rewrites {
                        if is_src {
                            src[e as usize] = *removed;
                        } else {
                            dst[e as usize] = *removed;
                        }
                    }
                    let detour = |from: u32| -> [(u32, bool); 2] {
                        if from == *removed {
                            // removed → u → kept
                            [
                                (justify_removed.0, !justify_removed.1),
                                *justify_kept,
                            ]
                        } else {
                            // kept → u → removed
                            [
                                (justify_kept.0, !justify_kept.1),
                                *justify_removed,
                            ]
                        }
                    };
                    let mut fixed = Vec::with_capacity(path.len() + 4);
                    let mut cur = self.base;
                    for d in path {
                        let s = d_src(&src, &dst, d);
                        if s != cur {
                            debug_assert!(
                                (cur == *kept && s == *removed) || (cur == *removed && s == *kept),
                                "path break must be at the merged pair"
                            );
                            fixed.extend_from_slice(&detour(cur));
                        }
                        fixed.push(d);
                        cur = d_dst(&src, &dst, d);
                    }
                    if cur != self.base {
                        debug_assert!(cur == *kept || cur == *removed);
                        fixed.extend_from_slice(&detour(cur));
                    }
                    path = fixed;
                }
            }
        }
        // tighten over the edge alphabet
        let mut tight: Vec<(u32, bool)> = Vec::with_capacity(path.len());
        for d in path {
            if tight.last() == Some(&(d.0, !d.1)) {
                tight.pop();
            } else {
                tight.push(d);
            }
        }
        // decompose into whole petal traversals
        let mut expr = Vec::new();
        let mut k = 0;
        while k < tight.len() {
            let (e, f) = tight[k];
            let (petal, pos) = self.edge_petal[e as usize];
            let steps = &self.petals[petal as usize];
            let fwd_along = steps[pos as usize].1;
            if f == fwd_along {
                debug_assert_eq!(pos, 0, "forward petal traversal must start at position 0");
                for (j, &(pe, pf)) in steps.iter().enumerate() {
                    debug_assert_eq!(tight[k + j], (pe, pf), "petal traversal must be contiguous");
                }
                expr.push((petal as usize, true));
                k += steps.len();
            } else {
                debug_assert_eq!(pos as usize, steps.len() - 1);
                for (j, &(pe, pf)) in steps.iter().rev().enumerate() {
                    debug_assert_eq!(tight[k + j], (pe, !pf));
                }
                expr.push((petal as usize, false));
                k += steps.len();
            }
        }
        SubgroupExpr(expr)
    }
}

/// Inverse images for a rank-preserving endomorphism: fold the wedge of the
/// image words; the result is the rose exactly when the endomorphism is
/// onto, and tracing each basis letter through the fold history expresses
/// it in the images.
pub fn invert_images(rank: usize, images: &[Word]) -> Result<Vec<Word>, FreeGroupError> {
    let g = CoreGraph::fold(rank, images);
    let full_rose = g.vertex_count() == 1 && (0..2 * rank).all(|s| g.adj[0][s] == Some(0));
    if !full_rose {
        return Err(FreeGroupError::NotInvertible(format!(
            "images generate a proper subgroup (folded graph: {} vertices, {} edges)",
            g.vertex_count(),
            g.edge_count()
        )));
    }
    let mut out = Vec::with_capacity(rank);
    for i in 0..rank {
        let x = Word::single(Letter::positive(i));
        let expr = g
            .contains_with_expression(&x)
            .expect("fold data present")
            .expect("rose contains every letter");
        let mut w = Word::empty();
        for (j, pos) in expr.0 {
            w.push(Letter::new(j, pos));
        }
        out.push(w);
    }
    Ok(out)
}

/// One noncontractible component of a fiber product, realized as
/// `A ∩ B^w` with `B^w = w⁻¹·B·w`.
#[derive(Clone, Debug)]
pub struct PullbackComponent {
    /// Basepoint-free canonical core of the intersection.
    pub graph: CoreGraph,
    /// Conjugator `w`.
    pub conjugator: Word,
    /// A nontrivial element of `A ∩ B^w` (so `witness ∈ A` and
    /// `w·witness·w⁻¹ ∈ B`).
    pub witness: Word,
    /// True when the component contains a diagonal vertex `(v, v)`;
    /// meaningful when both factors are the same graph.
    pub diagonal: bool,
}

/// Fiber product of two folded graphs over the rose, restricted to its
/// noncontractible core components. `A` and `B` are the subgroups of loops
/// at the membership roots of `g1` and `g2`.
pub fn pullback(g1: &CoreGraph, g2: &CoreGraph) -> Vec<PullbackComponent> {
    assert_eq!(g1.rank, g2.rank);
    let rank = g1.rank;
    let (n1, n2) = (g1.vertex_count(), g2.vertex_count());
    if n1 == 0 || n2 == 0 {
        return Vec::new();
    }
    let id = |v1: u32, v2: u32| (v1 as usize) * n2 + v2 as usize;
    let n = n1 * n2;
    let mut adj: Vec<Vec<Option<u32>>> = vec![vec![None; 2 * rank]; n];
    for v1 in 0..n1 as u32 {
        for v2 in 0..n2 as u32 {
            for slot in 0..2 * rank {
                if let (Some(t1), Some(t2)) = (g1.adj[v1 as usize][slot], g2.adj[v2 as usize][slot])
                {
                    adj[id(v1, v2)][slot] = Some(id(t1, t2) as u32);
                }
            }
        }
    }
    // core: drop valence ≤ 1 product vertices
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for v in 0..n {
            if !alive[v] {
                continue;
            }
            let deg = (0..2 * rank)
                .filter(|&s| adj[v][s].map(|t| alive[t as usize]).unwrap_or(false))
                .count();
            if deg <= 1 {
                alive[v] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // connected components of the survivors
    let mut comp = vec![u32::MAX; n];
    let mut ncomp = 0u32;
    for v in 0..n {
        if !alive[v] || comp[v] != u32::MAX {
            continue;
        }
        let mut q = VecDeque::new();
        q.push_back(v);
        comp[v] = ncomp;
        while let Some(u) = q.pop_front() {
            for slot in 0..2 * rank {
                if let Some(t) = adj[u][slot] {
                    let t = t as usize;
                    if alive[t] && comp[t] == u32::MAX {
                        comp[t] = ncomp;
                        q.push_back(t);
                    }
                }
            }
        }
        ncomp += 1;
    }
    if ncomp == 0 {
        return Vec::new();
    }
    let paths1 = g1.bfs_path_words(g1.membership_root());
    let paths2 = g2.bfs_path_words(g2.membership_root());
    let mut out = Vec::new();
    for c in 0..ncomp {
        let members: Vec<usize> = (0..n).filter(|&v| alive[v] && comp[v] == c).collect();
        // shortest conjugator over the component, ties lexicographic
        let mut best: Option<(Word, usize)> = None;
        let mut diagonal = false;
        for &v in &members {
            let (v1, v2) = ((v / n2) as u32, (v % n2) as u32);
            if n1 == n2 && v1 == v2 {
                diagonal = true;
            }
            let (Some(u), Some(vv)) = (&paths1[v1 as usize], &paths2[v2 as usize]) else {
                continue;
            };
            let w = vv.concat(&u.inverse());
            let better = match &best {
                None => true,
                Some((bw, _)) => {
                    (w.len(), w.letters().iter().map(|l| l.slot()).collect::<Vec<_>>())
                        < (bw.len(), bw.letters().iter().map(|l| l.slot()).collect::<Vec<_>>())
                }
            };
            if better {
                best = Some((w, v));
            }
        }
        let (conjugator, anchor) = best.expect("roots reach all vertices of a connected graph");
        // component graph, rooted at the anchor for the witness
        let mut idx = vec![u32::MAX; n];
        for (i, &v) in members.iter().enumerate() {
            idx[v] = i as u32;
        }
        let mut cadj = vec![vec![None; 2 * rank]; members.len()];
        for (i, &v) in members.iter().enumerate() {
            for slot in 0..2 * rank {
                if let Some(t) = adj[v][slot] {
                    if alive[t as usize] && comp[t as usize] == c {
                        cadj[i][slot] = Some(idx[t as usize]);
                    }
                }
            }
        }
        let cg = CoreGraph {
            rank,
            adj: cadj,
            base: None,
            fold: None,
        };
        // witness: first basis loop at the anchor, conjugated back to A
        let anchor_local = idx[anchor];
        let loop_word = cg
            .loop_basis(anchor_local)
            .into_iter()
            .next()
            .expect("noncontractible component has a loop");
        let (v1, _v2) = ((anchor / n2) as u32, (anchor % n2) as u32);
        let u = paths1[v1 as usize].clone().unwrap();
        let witness = loop_word.conjugate_by(&u);
        out.push(PullbackComponent {
            graph: cg.canonicalize(),
            conjugator,
            witness,
            diagonal,
        });
    }
    out.sort_by(|a, b| a.graph.canonical_key().cmp(&b.graph.canonical_key()));
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum TriState {
    Unknown,
    Yes,
    No,
}

/// One conjugacy class of a finitely generated subgroup.
#[derive(Clone, Debug)]
pub struct SystemComponent {
    /// Basepoint-free canonical core.
    pub graph: CoreGraph,
    /// Representative generating set.
    pub gens: Vec<Word>,
}

impl SystemComponent {
    pub fn from_generators(rank: usize, gens: Vec<Word>) -> Option<SystemComponent> {
        let folded = CoreGraph::fold(rank, &gens);
        let core = folded.core();
        if core.is_trivial() {
            return None;
        }
        Some(SystemComponent { graph: core, gens })
    }

    /// The basepointed folded graph of the representative generators.
    pub fn based_graph(&self, rank: usize) -> CoreGraph {
        CoreGraph::fold(rank, &self.gens)
    }
}

/// A finite set of conjugacy classes of nontrivial finite-rank subgroups.
#[derive(Clone, Debug)]
pub struct SubgroupSystem {
    pub rank: usize,
    pub components: Vec<SystemComponent>,
    pub malnormal: TriState,
    pub free_factor: TriState,
}

impl SubgroupSystem {
    pub fn empty(rank: usize) -> SubgroupSystem {
        SubgroupSystem {
            rank,
            components: Vec::new(),
            malnormal: TriState::Unknown,
            free_factor: TriState::Unknown,
        }
    }

    /// The full group as a single component.
    pub fn whole_group(rank: usize) -> SubgroupSystem {
        let gens: Vec<Word> = (0..rank).map(|i| Word::single(Letter::positive(i))).collect();
        SubgroupSystem {
            rank,
            components: vec![SystemComponent {
                graph: CoreGraph::rose(rank).core(),
                gens,
            }],
            malnormal: TriState::Yes,
            free_factor: TriState::Yes,
        }
    }

    /// Build from generating sets, dropping trivial components and
    /// deduplicating conjugates.
    pub fn from_generators(rank: usize, sets: Vec<Vec<Word>>) -> SubgroupSystem {
        let mut components: Vec<SystemComponent> = Vec::new();
        for gens in sets {
            if let Some(c) = SystemComponent::from_generators(rank, gens) {
                components.push(c);
            }
        }
        dedup_components(&mut components);
        SubgroupSystem {
            rank,
            components,
            malnormal: TriState::Unknown,
            free_factor: TriState::Unknown,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn carries_class(&self, c: &crate::freegroup::CyclicWord) -> bool {
        self.components.iter().any(|k| k.graph.carries_class(c))
    }

    /// Component-wise conjugate equality.
    pub fn equals(&self, other: &SubgroupSystem) -> bool {
        if self.components.len() != other.components.len() {
            return false;
        }
        let mut a: Vec<Vec<u32>> = self.components.iter().map(|c| c.graph.canonical_key()).collect();
        let mut b: Vec<Vec<u32>> = other.components.iter().map(|c| c.graph.canonical_key()).collect();
        a.sort();
        b.sort();
        a == b
    }
}

pub fn dedup_components(components: &mut Vec<SystemComponent>) {
    components.sort_by_key(|c| c.graph.canonical_key());
    components.dedup_by(|a, b| a.graph.canonical_key() == b.graph.canonical_key());
}

/// Meet of two subgroup systems: all nontrivial pairwise intersections up
/// to conjugacy, deduplicated.
pub fn meet(s1: &SubgroupSystem, s2: &SubgroupSystem) -> SubgroupSystem {
    assert_eq!(s1.rank, s2.rank);
    let rank = s1.rank;
    let mut components = Vec::new();
    for a in &s1.components {
        let ga = a.based_graph(rank);
        for b in &s2.components {
            let gb = b.based_graph(rank);
            for comp in pullback(&ga, &gb) {
                let gens = comp.graph.loop_basis(0);
                components.push(SystemComponent {
                    graph: comp.graph,
                    gens,
                });
            }
        }
    }
    dedup_components(&mut components);
    SubgroupSystem {
        rank,
        components,
        malnormal: TriState::Unknown,
        free_factor: TriState::Unknown,
    }
}

/// Witnessed failure of malnormality: `K_s^x ∩ K_t` is nontrivial with
/// either `s ≠ t` or `x ∉ K_s`; `element ∈ K_t` and `x·element·x⁻¹ ∈ K_s`.
#[derive(Clone, Debug)]
pub struct MalnormalityWitness {
    pub s: usize,
    pub t: usize,
    pub conjugator: Word,
    pub element: Word,
}

#[derive(Clone, Debug)]
pub enum MalnormalityVerdict {
    Yes,
    No(MalnormalityWitness),
}

/// Malnormality via pullbacks of the system with itself: every off-diagonal
/// pullback must be trivial, and every diagonal pullback must consist of
/// the identity-coset (diagonal) component alone.
pub fn is_malnormal(s: &SubgroupSystem) -> MalnormalityVerdict {
    let rank = s.rank;
    let based: Vec<CoreGraph> = s.components.iter().map(|c| c.based_graph(rank)).collect();
    for (i, gi) in based.iter().enumerate() {
        for (j, gj) in based.iter().enumerate().skip(i) {
            let comps = pullback(gi, gj);
            for comp in comps {
                if i == j && comp.diagonal {
                    continue;
                }
                // component = K_i ∩ K_j^w, i.e. K_j^w ∩ K_i nontrivial
                return MalnormalityVerdict::No(MalnormalityWitness {
                    s: j,
                    t: i,
                    conjugator: comp.conjugator,
                    element: comp.witness,
                });
            }
        }
    }
    MalnormalityVerdict::Yes
}

/// Outcome of the f-invariant fiber closure.
#[derive(Clone, Debug)]
pub struct FiberResult {
    /// Basepointed folded graph of the last computed stage.
    pub graph: CoreGraph,
    /// `Some(k)` when stage `k+1` reproduced stage `k`.
    pub stabilized_at: Option<usize>,
    pub stages: usize,
}

/// Closure of `⟨fᵏ(s) : |k| ≤ K, s ∈ seeds⟩` over increasing `K`, stopping
/// at the first `K` with `S_{K+1} = S_K` (then `S_K` is f-invariant and is
/// the fiber subgroup generated by the seeds).
pub fn fiber_subgroup(
    f: &crate::freegroup::Automorphism,
    seeds: &[Word],
    k_max: usize,
) -> Result<FiberResult, FreeGroupError> {
    let finv = f
        .inverse_automorphism()
        .ok_or_else(|| FreeGroupError::NotInvertible("fiber closure needs a verified inverse".into()))?;
    let rank = f.rank();
    let mut fwd: Vec<Word> = seeds.to_vec();
    let mut bwd: Vec<Word> = seeds.to_vec();
    let mut gens: Vec<Word> = seeds.to_vec();
    let mut prev_graph = CoreGraph::fold(rank, &gens);
    let mut prev_key = prev_graph.canonical_key();
    for k in 1..=k_max {
        fwd = fwd
            .iter()
            .map(|w| f.apply(w))
            .collect::<Result<Vec<_>, _>>()?;
        bwd = bwd
            .iter()
            .map(|w| finv.apply(w))
            .collect::<Result<Vec<_>, _>>()?;
        gens.extend(fwd.iter().cloned());
        gens.extend(bwd.iter().cloned());
        let graph = CoreGraph::fold(rank, &gens);
        let key = graph.canonical_key();
        if key == prev_key {
            return Ok(FiberResult {
                graph: prev_graph,
                stabilized_at: Some(k - 1),
                stages: k,
            });
        }
        prev_graph = graph;
        prev_key = key;
    }
    Ok(FiberResult {
        graph: prev_graph,
        stabilized_at: None,
        stages: k_max,
    })
}

/// JSON-facing serialization of a graph: vertices renumbered by BFS from
/// the basepoint (or from vertex 0).
#[derive(Serialize, Clone, Debug)]
pub struct CoreGraphJson {
    pub vertices: usize,
    pub base: Option<u32>,
    pub edges: Vec<(u32, u32, String)>,
}

impl CoreGraph {
    pub fn to_json(&self) -> CoreGraphJson {
        let g = self.canonicalize();
        let mut edges = Vec::new();
        for v in 0..g.vertex_count() as u32 {
            for slot in 0..2 * g.rank {
                let l = Letter::from_slot(slot);
                if !l.is_positive() {
                    continue;
                }
                if let Some(t) = g.adj[v as usize][slot] {
                    edges.push((v, t, l.to_char().to_string()));
                }
            }
        }
        edges.sort();
        CoreGraphJson {
            vertices: g.vertex_count(),
            base: g.base,
            edges,
        }
    }
}
