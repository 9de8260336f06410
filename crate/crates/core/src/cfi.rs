//! CFI graphs over base graphs with maximum degree three, and the grid
//! family used for lower bounds.
//!
//! Gadget vertices over a base vertex `v` of degree `d` are the even-parity
//! bit vectors of length `d`. Bit `i` refers to the `i`-th incident edge of
//! `v`, incident edges being ordered by increasing neighbor id.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseGraph {
    graph: SimpleGraph,
    /// incident edge indices of each vertex, ordered by neighbor id
    incident: Vec<Vec<usize>>,
}

impl BaseGraph {
    /// Any connected graph with maximum degree at most three.
    pub fn new(graph: SimpleGraph) -> Result<Self> {
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("base graph must be connected".into()));
        }
        let mut incident = vec![Vec::new(); graph.n()];
        for (i, &(u, v)) in graph.edges().iter().enumerate() {
            incident[u].push(i);
            incident[v].push(i);
        }
        for (v, inc) in incident.iter_mut().enumerate() {
            if inc.len() > 3 {
                return Err(Error::InvalidGraph(format!(
                    "vertex {v} has degree above 3"
                )));
            }
            let edges = graph.edges();
            inc.sort_by_key(|&e| other_end(edges[e], v));
        }
        Ok(BaseGraph { graph, incident })
    }

    pub fn graph(&self) -> &SimpleGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.edges().len()
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.graph.edges()[e]
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.graph.edges().binary_search(&key).ok()
    }

    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    /// Position of edge `e` among the incident edges of `v`.
    pub fn position(&self, v: usize, e: usize) -> Option<usize> {
        self.incident[v].iter().position(|&f| f == e)
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        other_end(self.edge(e), v)
    }

    /// Shortest sequence of edges from `from` to `to` in which consecutive
    /// edges share an endpoint outside `blocked`. Returns the edges together
    /// with the shared vertex between each consecutive pair. Ties go to the
    /// smaller shared vertex, then to the smaller neighbor.
    pub fn edge_path(
        &self,
        from: usize,
        to: usize,
        blocked: &[usize],
    ) -> Option<Vec<(usize, usize)>> {
        let m = self.num_edges();
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; m];
        let mut seen = vec![false; m];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(e) = queue.pop_front() {
            if e == to {
                let mut path = Vec::new();
                let mut cur = e;
                while let Some((p, x)) = prev[cur] {
                    path.push((x, cur));
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            let (a, b) = self.edge(e);
            for x in [a, b] {
                if blocked.contains(&x) {
                    continue;
                }
                for &f in &self.incident[x] {
                    if !seen[f] {
                        seen[f] = true;
                        prev[f] = Some((e, x));
                        queue.push_back(f);
                    }
                }
            }
        }
        None
    }
}

fn other_end((a, b): (usize, usize), v: usize) -> usize {
    if a == v {
        b
    } else {
        a
    }
}

/// Vertex `(r, c)` of the `2 x n` grid has id `r * n + c`.
pub fn grid_vertex(n: usize, r: usize, c: usize) -> usize {
    r * n + c
}

/// The `2 x n` grid plus a pendant vertex `2n` attached to `(0, n-1)`.
pub fn grid_base(n: usize) -> Result<BaseGraph> {
    if n < 3 {
        return Err(Error::GridTooSmall(n));
    }
    grid_base_any(n)
}

/// Same construction without the size check; `n = 2` is used by the
/// small-case experiments.
pub fn grid_base_any(n: usize) -> Result<BaseGraph> {
    if n < 1 {
        return Err(Error::GridTooSmall(n));
    }
    let mut edges = Vec::new();
    for c in 0..n {
        edges.push((grid_vertex(n, 0, c), grid_vertex(n, 1, c)));
        if c + 1 < n {
            for r in 0..2 {
                edges.push((grid_vertex(n, r, c), grid_vertex(n, r, c + 1)));
            }
        }
    }
    edges.push((grid_vertex(n, 0, n - 1), 2 * n));
    BaseGraph::new(SimpleGraph::new(2 * n + 1, edges)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfiGraph {
    base: BaseGraph,
    graph: SimpleGraph,
    /// `(base vertex, bit mask)` of every vertex
    origin: Vec<(usize, u32)>,
    gadget_start: Vec<usize>,
    twist: Option<usize>,
}

#[derive(Serialize)]
struct Sidecar {
    vertex_origin: Vec<(usize, Vec<u8>)>,
    twist: Option<[usize; 2]>,
}

impl CfiGraph {
    pub fn base(&self) -> &BaseGraph {
        &self.base
    }

    pub fn graph(&self) -> &SimpleGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn origin(&self, x: usize) -> (usize, u32) {
        self.origin[x]
    }

    pub fn base_vertex(&self, x: usize) -> usize {
        self.origin[x].0
    }

    /// Twisted edge index, if any.
    pub fn twist(&self) -> Option<usize> {
        self.twist
    }

    /// Vertex over `v` with bit vector `mask`, which must have even parity.
    pub fn vertex(&self, v: usize, mask: u32) -> usize {
        debug_assert_eq!(mask.count_ones() % 2, 0);
        self.gadget_start[v] + (mask >> 1) as usize
    }

    pub fn gadget(&self, v: usize) -> std::ops::Range<usize> {
        let size = 1usize << self.base.degree(v).saturating_sub(1);
        self.gadget_start[v]..self.gadget_start[v] + size
    }

    /// `{"vertex_origin": [[v, [a_1, ..., a_d]], ...], "twist": [u, v] | null}`
    pub fn sidecar_json(&self) -> String {
        let s = Sidecar {
            vertex_origin: self
                .origin
                .iter()
                .map(|&(v, m)| {
                    (
                        v,
                        (0..self.base.degree(v))
                            .map(|i| (m >> i & 1) as u8)
                            .collect(),
                    )
                })
                .collect(),
            twist: self.twist.map(|e| {
                let (a, b) = self.base.edge(e);
                [a, b]
            }),
        };
        serde_json::to_string(&s).expect("sidecar serializes")
    }
}

/// Builds `X(G)` or, with a twist edge `(u, v)`, `X~(G)`.
pub fn build_cfi(base: &BaseGraph, twist: Option<(usize, usize)>) -> Result<CfiGraph> {
    let twist = match twist {
        Some((u, v)) => Some(
            base.edge_index(u, v)
                .filter(|_| u < base.n() && v < base.n())
                .ok_or(Error::NotABaseEdge(u, v))?,
        ),
        None => None,
    };
    build_cfi_edge(base, twist)
}

/// As [`build_cfi`] with the twist given as an edge index.
pub fn build_cfi_edge(base: &BaseGraph, twist: Option<usize>) -> Result<CfiGraph> {
    if let Some(t) = twist {
        if t >= base.num_edges() {
            return Err(Error::Precondition(format!("edge index {t} out of range")));
        }
    }
    let mut origin = Vec::new();
    let mut gadget_start = Vec::with_capacity(base.n());
    for v in 0..base.n() {
        gadget_start.push(origin.len());
        let d = base.degree(v);
        for mask in 0u32..1 << d {
            if mask.count_ones() % 2 == 0 {
                origin.push((v, mask));
            }
        }
    }
    let mut edges = Vec::new();
    for (e, &(u, v)) in base.graph.edges().iter().enumerate() {
        let i = base.position(u, e).expect("incident");
        let j = base.position(v, e).expect("incident");
        let flip = twist == Some(e);
        for x in gadget_start[u]..gadget_start[u] + (1 << (base.degree(u) - 1)) {
            for y in gadget_start[v]..gadget_start[v] + (1 << (base.degree(v) - 1)) {
                let a = origin[x].1 >> i & 1;
                let b = origin[y].1 >> j & 1;
                if (a == b) != flip {
                    edges.push((x, y));
                }
            }
        }
    }
    let graph = SimpleGraph::new(origin.len(), edges)?;
    Ok(CfiGraph {
        base: base.clone(),
        graph,
        origin,
        gadget_start,
        twist,
    })
}

/// The lexicographically smallest base edge, used as default twist.
pub fn default_twist(base: &BaseGraph) -> (usize, usize) {
    base.edge(0)
}

/// Per-vertex bit flips realizing a walk of the twist along `path`.
fn path_flips(base: &BaseGraph, from: usize, path: &[(usize, usize)]) -> Vec<u32> {
    let mut flips = vec![0u32; base.n()];
    let mut prev = from;
    for &(x, e) in path {
        let a = base.position(x, prev).expect("shared vertex");
        let b = base.position(x, e).expect("shared vertex");
        flips[x] ^= (1 << a) | (1 << b);
        prev = e;
    }
    flips
}

fn apply_flips(cfi: &CfiGraph, flips: &[u32]) -> Vec<usize> {
    (0..cfi.n())
        .map(|x| {
            let (v, m) = cfi.origin(x);
            cfi.vertex(v, m ^ flips[v])
        })
        .collect()
}

/// Vertex map that moves a twist from edge `e_from` to edge `e_to`: as a map
/// from the graph twisted at `e_from` it preserves adjacency everywhere
/// except over `e_to` and `e_from`, where it inverts it. Equivalently it is
/// an isomorphism from `X~_{e_from}` onto `X~_{e_to}`.
///
/// Shared path vertices listed in `blocked` are avoided; `None` when no
/// such path exists.
pub fn twist_moving_map(
    cfi: &CfiGraph,
    e_from: usize,
    e_to: usize,
    blocked: &[usize],
) -> Option<Vec<usize>> {
    let path = cfi.base.edge_path(e_from, e_to, blocked)?;
    Some(apply_flips(cfi, &path_flips(&cfi.base, e_from, &path)))
}

/// [`twist_moving_map`] with edges given as vertex pairs and no blocked
/// vertices. Vertex ids are the same in every CFI graph over `base`.
pub fn move_twist_automorphism(
    base: &BaseGraph,
    e_from: (usize, usize),
    e_to: (usize, usize),
) -> Result<Vec<usize>> {
    let f = base
        .edge_index(e_from.0, e_from.1)
        .ok_or(Error::NotABaseEdge(e_from.0, e_from.1))?;
    let t = base
        .edge_index(e_to.0, e_to.1)
        .ok_or(Error::NotABaseEdge(e_to.0, e_to.1))?;
    let cfi = build_cfi_edge(base, None)?;
    twist_moving_map(&cfi, f, t, &[]).ok_or_else(|| Error::Precondition("no edge path".into()))
}

/// Base edges over which `phi`, read as a map from `g_from` to `g_to`,
/// inverts adjacency. Fails when `phi` is not a bijection, does not respect
/// gadgets, or inverts only some of the pairs over an edge.
pub fn verify_twist_location(
    phi: &[usize],
    g_from: &CfiGraph,
    g_to: &CfiGraph,
) -> Result<BTreeSet<(usize, usize)>> {
    let n = g_from.n();
    if phi.len() != n || g_to.n() != n {
        return Err(Error::NotBijective("size mismatch".into()));
    }
    let mut hit = vec![false; n];
    for &y in phi {
        if y >= n || std::mem::replace(&mut hit[y], true) {
            return Err(Error::NotBijective("repeated or out-of-range image".into()));
        }
    }
    for (x, &y) in phi.iter().enumerate() {
        if g_from.base_vertex(x) != g_to.base_vertex(y) {
            return Err(Error::Precondition("map does not preserve gadgets".into()));
        }
    }
    let base = &g_from.base;
    let mut state: Vec<Option<bool>> = vec![None; base.num_edges()];
    for x in 0..n {
        for y in x + 1..n {
            let inverted = g_from.graph.is_adjacent(x, y) != g_to.graph.is_adjacent(phi[x], phi[y]);
            let (u, v) = (g_from.base_vertex(x), g_from.base_vertex(y));
            match base.edge_index(u, v).filter(|_| u != v) {
                Some(e) => match state[e] {
                    None => state[e] = Some(inverted),
                    Some(s) if s != inverted => {
                        let (a, b) = base.edge(e);
                        return Err(Error::InconsistentTwist(a, b));
                    }
                    _ => {}
                },
                None if inverted => {
                    return Err(Error::Precondition(format!(
                        "adjacency changed between non-neighboring gadgets {u} and {v}"
                    )))
                }
                None => {}
            }
        }
    }
    Ok(state
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == Some(true))
        .map(|(e, _)| base.edge(e))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        assert!(matches!(grid_base(2), Err(Error::GridTooSmall(2))));
        for n in 3..=6 {
            let b = grid_base(n).unwrap();
            assert_eq!(b.n(), 2 * n + 1);
            assert_eq!(b.num_edges(), 3 * n - 2 + 1);
            let x = build_cfi(&b, None).unwrap();
            // 4(n-2) inner degree-3 gadgets, corner and pendant gadgets
            assert_eq!(x.n(), 8 * n - 5);
        }
    }

    #[test]
    fn gadget_vertices_have_even_parity() {
        let b = grid_base(4).unwrap();
        let x = build_cfi(&b, Some((0, 4))).unwrap();
        for v in 0..x.n() {
            let (bv, m) = x.origin(v);
            assert_eq!(m.count_ones() % 2, 0);
            assert_eq!(x.vertex(bv, m), v);
        }
        assert_eq!(x.twist(), b.edge_index(0, 4));
        assert!(build_cfi(&b, Some((0, 5))).is_err());
    }

    #[test]
    fn sidecar_format() {
        let b = grid_base(3).unwrap();
        let x = build_cfi(&b, Some(default_twist(&b))).unwrap();
        let s = x.sidecar_json();
        assert!(
            s.starts_with(r#"{"vertex_origin":[[0,[0,0]],[0,[1,1]],"#),
            "{s}"
        );
        assert!(s.ends_with(r#""twist":[0,1]}"#), "{s}");
    }

    #[test]
    fn moving_the_twist() {
        let b = grid_base(4).unwrap();
        let plain = build_cfi_edge(&b, None).unwrap();
        for from in 0..b.num_edges() {
            let twisted = build_cfi_edge(&b, Some(from)).unwrap();
            for to in 0..b.num_edges() {
                let phi = twist_moving_map(&plain, from, to, &[]).unwrap();
                let moved = build_cfi_edge(&b, Some(to)).unwrap();
                // isomorphism between the two twisted graphs
                assert!(verify_twist_location(&phi, &twisted, &moved)
                    .unwrap()
                    .is_empty());
                // as a map from the plain graph it inverts exactly the target
                let got = verify_twist_location(&phi, &plain, &twisted).unwrap();
                assert_eq!(got, BTreeSet::from([b.edge(to)]));
            }
        }
    }

    #[test]
    fn identity_locates_the_twist() {
        let b = grid_base(5).unwrap();
        let plain = build_cfi_edge(&b, None).unwrap();
        let t = build_cfi_edge(&b, Some(3)).unwrap();
        let id: Vec<usize> = (0..plain.n()).collect();
        assert_eq!(
            verify_twist_location(&id, &plain, &t).unwrap(),
            BTreeSet::from([b.edge(3)])
        );
        assert!(verify_twist_location(&id, &plain, &plain)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn partial_inversion_is_rejected() {
        let b = grid_base(3).unwrap();
        let plain = build_cfi_edge(&b, None).unwrap();
        // flipping a single bit breaks parity, emulate by swapping two
        // vertices of one gadget that differ in one incident edge only
        let mut phi: Vec<usize> = (0..plain.n()).collect();
        let g = plain.gadget(4);
        phi.swap(g.start, g.start + 1);
        assert!(matches!(
            verify_twist_location(&phi, &plain, &plain),
            Err(Error::InconsistentTwist(..))
        ));
    }
}
