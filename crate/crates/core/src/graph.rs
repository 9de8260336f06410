//! Finite simple undirected graphs and their JSON form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected graph without loops or multi-edges on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct SimpleGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for SimpleGraph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        SimpleGraph::new(f.n, f.edges.into_iter().map(|[u, v]| (u, v)))
    }
}

impl From<SimpleGraph> for GraphFile {
    fn from(g: SimpleGraph) -> Self {
        GraphFile {
            n: g.n,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }
}

impl SimpleGraph {
    /// Builds a graph, rejecting loops, duplicate edges and out-of-range ids.
    /// Edges are stored normalized (`u < v`) and sorted.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![false; n * n];
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("loop at vertex {u}")));
            }
            if adj[u * n + v] {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            adj[u * n + v] = true;
            adj[v * n + u] = true;
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        Ok(SimpleGraph {
            n,
            edges: list,
            adj,
        })
    }

    pub fn empty(n: usize) -> Self {
        SimpleGraph {
            n,
            edges: Vec::new(),
            adj: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&w| self.is_adjacent(v, w))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidGraph("permutation has wrong length".into()));
        }
        let mut hit = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut hit[p], true) {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
        }
        SimpleGraph::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    /// Erdős–Rényi graph: every pair becomes an edge with probability `p`.
    pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        SimpleGraph::new(n, edges).expect("generated edges are valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }
}

/// Deterministic corpus of random graphs on at most `max_n` vertices.
/// Sizes and densities vary with the seed.
pub fn random_corpus(count: usize, max_n: usize, seed: u64) -> Vec<SimpleGraph> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=max_n);
            let p = [0.15, 0.3, 0.5, 0.7][rng.random_range(0..4)];
            SimpleGraph::gnp(n, p, &mut rng)
        })
        .collect()
}
