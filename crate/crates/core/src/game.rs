//! Duplicator's side of the bijective walk pebble game on CFI graphs.
//!
//! Components are taken with respect to pebbled base vertices. Two base
//! edges lie in the same component when they are joined by a chain of edges
//! meeting at unpebbled vertices. A component contains a base vertex when
//! the vertex is unpebbled and all of its incident edges lie in the
//! component; the size of a component is the number of vertices it
//! contains.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cfi::{build_cfi_edge, grid_base, twist_moving_map, BaseGraph, CfiGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Component {
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentStructure {
    pub components: Vec<Component>,
    /// component index of every base edge
    pub component_of_edge: Vec<usize>,
}

impl ComponentStructure {
    pub fn containing_edge(&self, e: usize) -> &Component {
        &self.components[self.component_of_edge[e]]
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut x = x;
    while parent[x] != r {
        let next = parent[x];
        parent[x] = r;
        x = next;
    }
    r
}

/// Components of the base graph with respect to the pebbled vertices.
pub fn components(base: &BaseGraph, pebbled: &[usize]) -> ComponentStructure {
    let m = base.num_edges();
    let mut parent: Vec<usize> = (0..m).collect();
    for x in 0..base.n() {
        if pebbled.contains(&x) {
            continue;
        }
        let inc = base.incident(x);
        for w in inc.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut comps: Vec<Component> = Vec::new();
    let mut component_of_edge = vec![0; m];
    for (e, slot) in component_of_edge.iter_mut().enumerate() {
        let r = find(&mut parent, e);
        let i = *index.entry(r).or_insert_with(|| {
            comps.push(Component {
                edges: Vec::new(),
                vertices: Vec::new(),
            });
            comps.len() - 1
        });
        comps[i].edges.push(e);
        *slot = i;
    }
    for x in 0..base.n() {
        if pebbled.contains(&x) || base.degree(x) == 0 {
            continue;
        }
        let c = component_of_edge[base.incident(x)[0]];
        if base.incident(x).iter().all(|&e| component_of_edge[e] == c) {
            comps[c].vertices.push(x);
        }
    }
    ComponentStructure {
        components: comps,
        component_of_edge,
    }
}

/// Component structure together with the component holding `twist`.
pub fn twisted_components(
    base: &BaseGraph,
    pebbled: &[usize],
    twist: usize,
) -> (ComponentStructure, usize) {
    let s = components(base, pebbled);
    let t = s.component_of_edge[twist];
    (s, t)
}

/// Maps tuples of vertices of one graph to tuples of another.
pub trait TupleMap: Sync {
    fn arity(&self) -> usize;
    fn image(&self, tuple: &[usize]) -> Vec<usize>;
}

/// Two pebbled base vertices that stay on the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PebblePlacement {
    pub u1: usize,
    pub u2: usize,
}

/// The bijection `f^v_{e1,e2}` on `(k-1)`-tuples.
///
/// Entries away from the gadget of `v` are mapped by `phi`, a
/// pebble-respecting map moving the twist to `e1`. Inside a maximal run of
/// entries over `v`, the walk enters and leaves `v` along base edges (or
/// not), and the twist is moved on to an edge `e` at `v` that the walk does
/// not use there: the third edge at `v` when it enters and leaves along two
/// different edges, otherwise the first of `e1`, `e2` in the incidence
/// order of `v` other than the one edge used.
#[derive(Debug, Clone)]
pub struct DuplicatorBijection<'a> {
    plain: &'a CfiGraph,
    twisted: &'a CfiGraph,
    k: usize,
    pebbles: PebblePlacement,
    anchors: (usize, usize),
    v: usize,
    e1: usize,
    e2: usize,
    phi: Vec<usize>,
}

impl<'a> DuplicatorBijection<'a> {
    pub fn new(
        plain: &'a CfiGraph,
        twisted: &'a CfiGraph,
        k: usize,
        pebbles: PebblePlacement,
        v: usize,
        e1: usize,
        e2: usize,
    ) -> Result<Self> {
        let base = plain.base();
        if plain.twist().is_some() || twisted.base() != base {
            return Err(Error::Precondition(
                "expects an untwisted and a twisted graph over one base".into(),
            ));
        }
        let t = twisted
            .twist()
            .ok_or_else(|| Error::Precondition("second graph carries no twist".into()))?;
        if k < 2 {
            return Err(Error::WalkLength(k));
        }
        let PebblePlacement { u1, u2 } = pebbles;
        if v == u1 || v == u2 {
            return Err(Error::Precondition("v is pebbled".into()));
        }
        if base.degree(v) != 3 {
            return Err(Error::Precondition(format!(
                "v = {v} does not have degree 3"
            )));
        }
        if e1 == e2 || base.position(v, e1).is_none() || base.position(v, e2).is_none() {
            return Err(Error::Precondition(
                "e1 and e2 must be distinct edges at v".into(),
            ));
        }
        let phi = twist_moving_map(plain, t, e1, &[u1, u2])
            .ok_or_else(|| Error::Precondition("v is not in the twisted component".into()))?;
        let anchors = (plain.gadget(u1).start, plain.gadget(u2).start);
        let (a, b) = anchors;
        if plain.graph().is_adjacent(a, b) != twisted.graph().is_adjacent(phi[a], phi[b]) {
            return Err(Error::Precondition("the pebbles already differ".into()));
        }
        Ok(DuplicatorBijection {
            plain,
            twisted,
            k,
            pebbles,
            anchors,
            v,
            e1,
            e2,
            phi,
        })
    }

    /// Pebbled vertices in both graphs (the map fixes them).
    pub fn anchors(&self) -> (usize, usize) {
        self.anchors
    }

    pub fn phi(&self) -> &[usize] {
        &self.phi
    }

    /// Walk `(u1, w_1, ..., w_{k-1}, u2)` as vertices of the plain graph.
    pub fn full_walk(&self, tuple: &[usize]) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.k + 1);
        w.push(self.anchors.0);
        w.extend_from_slice(tuple);
        w.push(self.anchors.1);
        w
    }

    /// For every position of the full walk, the edge the twist is moved to
    /// when that position lies over `v`.
    pub fn run_edges(&self, tuple: &[usize]) -> Vec<Option<usize>> {
        let base = self.plain.base();
        let origins: Vec<usize> = self
            .full_walk(tuple)
            .iter()
            .map(|&x| self.plain.base_vertex(x))
            .collect();
        let mut out = vec![None; origins.len()];
        let mut i = 1;
        while i < origins.len() - 1 {
            if origins[i] != self.v {
                i += 1;
                continue;
            }
            let j = i - 1;
            let mut l = i;
            while origins[l] == self.v {
                l += 1;
            }
            let entry = base.edge_index(origins[j], self.v);
            let exit = base.edge_index(self.v, origins[l]);
            let e = match (entry, exit) {
                (Some(a), Some(b)) if a != b => *base
                    .incident(self.v)
                    .iter()
                    .find(|&&f| f != a && f != b)
                    .expect("v has degree 3"),
                (a, b) => {
                    let used = a.or(b);
                    *base
                        .incident(self.v)
                        .iter()
                        .find(|&&f| (f == self.e1 || f == self.e2) && Some(f) != used)
                        .expect("e1 and e2 differ")
                }
            };
            for slot in &mut out[i..l] {
                *slot = Some(e);
            }
            i = l;
        }
        out
    }

    fn psi(&self, x: usize, e: usize) -> usize {
        let base = self.plain.base();
        let (bv, mask) = self.plain.origin(x);
        debug_assert_eq!(bv, self.v);
        if e == self.e1 {
            return x;
        }
        let flip = (1 << base.position(self.v, self.e1).unwrap())
            | (1 << base.position(self.v, e).unwrap());
        self.plain.vertex(bv, mask ^ flip)
    }

    /// Twist edge after Spoiler keeps full-walk positions `i` and `j`.
    pub fn twist_after(&self, run_edges: &[Option<usize>], i: usize, j: usize) -> usize {
        run_edges[i].or(run_edges[j]).unwrap_or(self.e1)
    }

    pub fn pebbles(&self) -> PebblePlacement {
        self.pebbles
    }

    pub fn twisted_graph(&self) -> &CfiGraph {
        self.twisted
    }
}

impl TupleMap for DuplicatorBijection<'_> {
    fn arity(&self) -> usize {
        self.k - 1
    }

    fn image(&self, tuple: &[usize]) -> Vec<usize> {
        let runs = self.run_edges(tuple);
        tuple
            .iter()
            .enumerate()
            .map(|(i, &x)| match runs[i + 1] {
                Some(e) => self.psi(self.phi[x], e),
                None => self.phi[x],
            })
            .collect()
    }
}

fn decode(mut idx: usize, n: usize, arity: usize) -> Vec<usize> {
    let mut t = vec![0; arity];
    for slot in t.iter_mut() {
        *slot = idx % n;
        idx /= n;
    }
    t
}

fn encode(t: &[usize], n: usize) -> usize {
    t.iter().rev().fold(0, |acc, &x| acc * n + x)
}

fn tuple_count(n: usize, arity: usize) -> Result<usize> {
    let count = (n as u128).pow(arity as u32);
    if count > 1 << 32 {
        return Err(Error::BudgetExceeded {
            needed: count,
            budget: 1 << 32,
        });
    }
    Ok(count as usize)
}

/// Exhaustive bijectivity check on `V^arity`.
pub fn check_bijective<M: TupleMap>(map: &M, n: usize) -> Result<bool> {
    let count = tuple_count(n, map.arity())?;
    let images: Vec<usize> = (0..count)
        .into_par_iter()
        .map(|i| encode(&map.image(&decode(i, n, map.arity())), n))
        .collect();
    let mut hit = vec![false; count];
    for y in images {
        if y >= count || std::mem::replace(&mut hit[y], true) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub tuple: Vec<usize>,
    pub image: Vec<usize>,
    /// positions in the full walk, `0` and `k` being the fixed pebbles
    pub pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundCheck {
    pub safe: bool,
    pub tuples: usize,
    pub counterexample: Option<Counterexample>,
}

/// Consecutive positions of a full walk of length `k`, including the pair
/// closing the cycle.
pub fn consecutive_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (0..k).map(|i| (i, i + 1)).collect();
    v.push((k, 0));
    v
}

/// Checks that no tuple lets Spoiler win this round: for every pair of
/// consecutive pebbles, equality and adjacency agree in both graphs.
pub fn verify_round_safe<M: TupleMap>(
    map: &M,
    plain: &CfiGraph,
    twisted: &CfiGraph,
    anchors: (usize, usize),
) -> Result<RoundCheck> {
    let n = plain.n();
    let arity = map.arity();
    let count = tuple_count(n, arity)?;
    let k = arity + 1;
    let pairs = consecutive_pairs(k);
    let bad = (0..count).into_par_iter().find_map_first(|i| {
        let t = decode(i, n, arity);
        let img = map.image(&t);
        let full = |xs: &[usize]| {
            let mut w = vec![anchors.0];
            w.extend_from_slice(xs);
            w.push(anchors.1);
            w
        };
        let (a, b) = (full(&t), full(&img));
        pairs.iter().find_map(|&(i, j)| {
            let same = (a[i] == a[j]) == (b[i] == b[j]);
            let adj =
                plain.graph().is_adjacent(a[i], a[j]) == twisted.graph().is_adjacent(b[i], b[j]);
            (!(same && adj)).then(|| Counterexample {
                tuple: t.clone(),
                image: img.clone(),
                pair: (i, j),
            })
        })
    });
    Ok(RoundCheck {
        safe: bad.is_none(),
        tuples: count,
        counterexample: bad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// The two pebbles are adjacent and form a wall.
    WallAdjacent,
    /// The two pebbles are non-adjacent and form a wall.
    WallNonAdjacent,
    /// No wall yet: the pebbles are only pretended to sit on a separating
    /// base edge with large sides.
    Opening,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioCase {
    pub u1: usize,
    pub u2: usize,
    pub v: usize,
    pub e1: usize,
    pub e2: usize,
    /// vertices on the far side of the separator at `v`
    pub ell: usize,
    /// candidate twist edges, all in the twisted component
    pub twists: Vec<usize>,
    /// size of the twisted component
    pub component_size: usize,
}

/// Vertex sets of the connected pieces of `base` minus `removed`.
fn pieces(base: &BaseGraph, removed: &[usize]) -> Vec<Vec<usize>> {
    let g = base.graph();
    let mut seen = vec![false; g.n()];
    let mut out = Vec::new();
    for s in 0..g.n() {
        if seen[s] || removed.contains(&s) {
            continue;
        }
        let mut piece = vec![s];
        seen[s] = true;
        let mut i = 0;
        while i < piece.len() {
            for w in g.neighbors(piece[i]) {
                if !seen[w] && !removed.contains(&w) {
                    seen[w] = true;
                    piece.push(w);
                }
            }
            i += 1;
        }
        piece.sort_unstable();
        out.push(piece);
    }
    out
}

/// `ell` for the separator `{v, v'}` with `w` on the near side, or `None`
/// when `{v, v'}` does not separate.
fn far_side(base: &BaseGraph, v: usize, v2: usize, w: usize) -> Option<usize> {
    let p = pieces(base, &[v, v2]);
    if p.len() < 2 {
        return None;
    }
    let near = p.iter().find(|q| q.contains(&w))?.len();
    Some(base.n() - 2 - near)
}

/// Instances of one scenario on a base graph. Configurations where the
/// strategy does not apply (no degree-3 choice for `v`, no separator) are
/// counted as skipped.
pub fn scenario_cases(
    base: &BaseGraph,
    scenario: Scenario,
    n_cols: usize,
) -> (Vec<ScenarioCase>, usize) {
    let g = base.graph();
    let mut cases = Vec::new();
    let mut skipped = 0;
    let nv = base.n();
    for u1 in 0..nv {
        for u2 in 0..nv {
            if u1 == u2 {
                continue;
            }
            let adjacent = g.is_adjacent(u1, u2);
            let wall = pieces(base, &[u1, u2]).len() >= 2;
            let applies = match scenario {
                Scenario::WallAdjacent => adjacent && wall,
                Scenario::WallNonAdjacent => !adjacent && wall,
                Scenario::Opening => {
                    adjacent
                        && wall
                        && pieces(base, &[u1, u2])
                            .iter()
                            .all(|p| p.len() + 2 >= n_cols)
                }
            };
            if !applies {
                continue;
            }
            let structure = components(base, &[u1, u2]);
            for comp in structure.components.iter().filter(|c| c.size() > 0) {
                let inside = |x: usize| comp.vertices.contains(&x);
                let mut found = false;
                for v in (0..nv).filter(|&x| inside(x) && base.degree(x) == 3) {
                    let choice = if adjacent {
                        // v next to u1, v' the common neighbour of v and u2
                        if !g.is_adjacent(u1, v) {
                            continue;
                        }
                        let Some(v2) = g.neighbors(v).find(|&x| x != u1 && g.is_adjacent(x, u2))
                        else {
                            continue;
                        };
                        (
                            base.edge_index(u1, v).unwrap(),
                            base.edge_index(v, v2).unwrap(),
                            v2,
                            u1,
                        )
                    } else {
                        // v next to both, {u2, v} separating
                        if !(g.is_adjacent(u1, v) && g.is_adjacent(u2, v)) {
                            continue;
                        }
                        if pieces(base, &[u2, v]).len() < 2 {
                            continue;
                        }
                        (
                            base.edge_index(u1, v).unwrap(),
                            base.edge_index(u2, v).unwrap(),
                            u2,
                            u1,
                        )
                    };
                    let (e1, e2, v2, w) = choice;
                    let Some(ell) = far_side(base, v, v2, w) else {
                        continue;
                    };
                    found = true;
                    cases.push(ScenarioCase {
                        u1,
                        u2,
                        v,
                        e1,
                        e2,
                        ell,
                        twists: comp.edges.clone(),
                        component_size: comp.size(),
                    });
                }
                if !found {
                    skipped += 1;
                }
            }
        }
    }
    (cases, skipped)
}

/// A kept pebble pair whose twisted component is smaller than the bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BoundViolation {
    pub u1: usize,
    pub u2: usize,
    pub v: usize,
    /// origins of the two kept pebbles
    pub kept: (usize, usize),
    /// twist edge after the round, as a base vertex pair
    pub twist_after: (usize, usize),
    pub size: usize,
    pub bound: usize,
    /// size of the twisted component before the round
    pub size_before: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub n: usize,
    pub k: usize,
    /// (case, twist) combinations checked
    pub instances: usize,
    pub skipped: usize,
    pub bijective: bool,
    pub round_safe: bool,
    /// every kept pair leaves a twisted component of size at least
    /// `min(ell, 2n - ell - 2)`
    pub bound_holds: bool,
    /// the same, restricted to the cases the strategy uses the scenario
    /// for: walls around a twisted component of size at most `n - 2`
    pub bound_holds_in_strategy: bool,
    pub strategy_instances: usize,
    /// opening only: interior pairs keep a component of size `n - 4`
    pub opening_bound_holds: Option<bool>,
    /// smallest observed `size - min(ell, 2n - ell - 2)`
    pub min_slack: Option<i64>,
    pub counterexample: Option<Counterexample>,
    /// distinct violating configurations
    pub violations: Vec<BoundViolation>,
}

/// Exhaustive check of the strategy on `grid_base(n)` for one scenario.
pub fn verify_scenario(n: usize, k: usize, scenario: Scenario) -> Result<ScenarioReport> {
    let base = grid_base(n)?;
    let plain = build_cfi_edge(&base, None)?;
    let (cases, skipped) = scenario_cases(&base, scenario, n);
    let mut report = ScenarioReport {
        scenario,
        n,
        k,
        instances: 0,
        skipped,
        bijective: true,
        round_safe: true,
        bound_holds: true,
        bound_holds_in_strategy: true,
        strategy_instances: 0,
        opening_bound_holds: (scenario == Scenario::Opening).then_some(true),
        min_slack: None,
        counterexample: None,
        violations: Vec::new(),
    };
    let twisted_graphs: Vec<CfiGraph> = (0..base.num_edges())
        .map(|t| build_cfi_edge(&base, Some(t)))
        .collect::<Result<_>>()?;
    let mut size_cache: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut size_of = |a: usize, b: usize, t: usize| {
        *size_cache
            .entry((a.min(b), a.max(b), t))
            .or_insert_with(|| components(&base, &[a, b]).containing_edge(t).size())
    };
    let mut violations = std::collections::BTreeSet::new();
    for case in &cases {
        let in_strategy = scenario == Scenario::Opening || case.component_size + 2 <= n;
        for &t in &case.twists {
            let twisted = &twisted_graphs[t];
            let f = DuplicatorBijection::new(
                &plain,
                twisted,
                k,
                PebblePlacement {
                    u1: case.u1,
                    u2: case.u2,
                },
                case.v,
                case.e1,
                case.e2,
            )?;
            report.instances += 1;
            report.strategy_instances += in_strategy as usize;
            if !check_bijective(&f, plain.n())? {
                report.bijective = false;
            }
            let rc = verify_round_safe(&f, &plain, twisted, f.anchors())?;
            if !rc.safe {
                report.round_safe = false;
                report.counterexample = report.counterexample.take().or(rc.counterexample);
            }
            let bound = case.ell.min((2 * n).saturating_sub(case.ell + 2));
            let count = tuple_count(plain.n(), k - 1)?;
            for idx in 0..count {
                let tuple = decode(idx, plain.n(), k - 1);
                let full = f.full_walk(&tuple);
                let runs = f.run_edges(&tuple);
                let origin = |p: usize| plain.base_vertex(full[p]);
                for (i, j) in consecutive_pairs(k) {
                    let tw = f.twist_after(&runs, i, j);
                    let size = size_of(origin(i), origin(j), tw);
                    let slack = size as i64 - bound as i64;
                    report.min_slack = Some(report.min_slack.map_or(slack, |s| s.min(slack)));
                    if slack < 0 {
                        report.bound_holds = false;
                        if in_strategy {
                            report.bound_holds_in_strategy = false;
                        }
                        violations.insert(BoundViolation {
                            u1: case.u1,
                            u2: case.u2,
                            v: case.v,
                            kept: (origin(i).min(origin(j)), origin(i).max(origin(j))),
                            twist_after: base.edge(tw),
                            size,
                            bound,
                            size_before: case.component_size,
                        });
                    }
                    let interior = i >= 1 && j >= 1 && i < k && j < k;
                    if scenario == Scenario::Opening && interior && size + 4 < n {
                        report.opening_bound_holds = Some(false);
                    }
                }
            }
        }
    }
    report.violations = violations.into_iter().collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfi::grid_vertex;

    #[test]
    fn no_wall_gives_one_big_component() {
        let n = 5;
        let b = grid_base(n).unwrap();
        let s = components(&b, &[0, 7]);
        let (comp, _) = (s.containing_edge(0), ());
        assert_eq!(comp.size(), 2 * n - 1);
    }

    #[test]
    fn vertical_wall_splits_grid() {
        let n = 5;
        let b = grid_base(n).unwrap();
        let (u1, u2) = (grid_vertex(n, 0, 2), grid_vertex(n, 1, 2));
        let s = components(&b, &[u1, u2]);
        let mut sizes: Vec<usize> = s.components.iter().map(|c| c.size()).collect();
        sizes.sort_unstable();
        // the pebbled edge itself, the two left columns, the right side with pendant
        assert_eq!(sizes, vec![0, 4, 5]);
        let e = b.edge_index(u1, u2).unwrap();
        assert_eq!(s.containing_edge(e).size(), 0);
    }

    #[test]
    fn bijection_on_small_grid() {
        let n = 3;
        let b = grid_base(n).unwrap();
        let plain = build_cfi_edge(&b, None).unwrap();
        let (u1, u2) = (grid_vertex(n, 0, 0), grid_vertex(n, 1, 0));
        let v = grid_vertex(n, 0, 1);
        let v2 = grid_vertex(n, 1, 1);
        let e1 = b.edge_index(u1, v).unwrap();
        let e2 = b.edge_index(v, v2).unwrap();
        let t = b.edge_index(v, grid_vertex(n, 0, 2)).unwrap();
        let twisted = build_cfi_edge(&b, Some(t)).unwrap();
        let f =
            DuplicatorBijection::new(&plain, &twisted, 3, PebblePlacement { u1, u2 }, v, e1, e2)
                .unwrap();
        assert!(check_bijective(&f, plain.n()).unwrap());
        assert!(
            verify_round_safe(&f, &plain, &twisted, f.anchors())
                .unwrap()
                .safe
        );
    }

    struct Swapped<'a, M: TupleMap> {
        inner: &'a M,
        a: Vec<usize>,
        b: Vec<usize>,
    }

    impl<M: TupleMap> TupleMap for Swapped<'_, M> {
        fn arity(&self) -> usize {
            self.inner.arity()
        }
        fn image(&self, t: &[usize]) -> Vec<usize> {
            if t == self.a.as_slice() {
                self.inner.image(&self.b)
            } else if t == self.b.as_slice() {
                self.inner.image(&self.a)
            } else {
                self.inner.image(t)
            }
        }
    }

    #[test]
    fn corrupted_map_is_caught() {
        let n = 3;
        let b = grid_base(n).unwrap();
        let plain = build_cfi_edge(&b, None).unwrap();
        let (u1, u2) = (grid_vertex(n, 0, 0), grid_vertex(n, 1, 0));
        let v = grid_vertex(n, 0, 1);
        let e1 = b.edge_index(u1, v).unwrap();
        let e2 = b.edge_index(v, grid_vertex(n, 1, 1)).unwrap();
        let twisted = build_cfi_edge(&b, Some(e1)).unwrap();
        let f =
            DuplicatorBijection::new(&plain, &twisted, 2, PebblePlacement { u1, u2 }, v, e1, e2)
                .unwrap();
        let anchor = f.anchors().0;
        let g = plain.graph();
        let near = (0..plain.n()).find(|&x| g.is_adjacent(anchor, x)).unwrap();
        let far = (0..plain.n())
            .find(|&x| x != anchor && !g.is_adjacent(anchor, x))
            .unwrap();
        let bad = Swapped {
            inner: &f,
            a: vec![near],
            b: vec![far],
        };
        assert!(check_bijective(&bad, plain.n()).unwrap());
        let rc = verify_round_safe(&bad, &plain, &twisted, f.anchors()).unwrap();
        assert!(!rc.safe);
        let ce = rc.counterexample.unwrap();
        assert!(ce.tuple == vec![near] || ce.tuple == vec![far]);
    }

    #[test]
    fn preconditions() {
        let n = 3;
        let b = grid_base(n).unwrap();
        let plain = build_cfi_edge(&b, None).unwrap();
        let twisted = build_cfi_edge(&b, Some(0)).unwrap();
        let p = PebblePlacement { u1: 1, u2: 4 };
        // vertex 3 is the corner (1, 0) of degree 2
        let e = |a, c| b.edge_index(a, c).unwrap();
        assert!(DuplicatorBijection::new(&plain, &twisted, 3, p, 3, e(0, 3), e(3, 4)).is_err());
        assert!(DuplicatorBijection::new(&plain, &twisted, 3, p, 1, e(0, 1), e(1, 2)).is_err());
        assert!(DuplicatorBijection::new(&twisted, &plain, 3, p, 2, e(1, 2), e(2, 5)).is_err());
        // twist left of the wall, v right of it
        assert!(DuplicatorBijection::new(&plain, &twisted, 3, p, 2, e(1, 2), e(2, 5)).is_err());
        let right = build_cfi_edge(&b, Some(e(2, 5))).unwrap();
        assert!(DuplicatorBijection::new(&plain, &right, 3, p, 2, e(1, 2), e(2, 5)).is_ok());
    }
}
