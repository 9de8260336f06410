use std::collections::{HashMap, HashSet};

use crate::color::ColorId;
use crate::error::{Error, Result};
use crate::graph::SimpleGraph;

/// A coloring `V x V -> C` of the complete directed graph with loops,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredCompleteGraph {
    n: usize,
    colors: Vec<ColorId>,
    converse_equivalent: bool,
}

impl ColoredCompleteGraph {
    pub fn new(n: usize, colors: Vec<ColorId>, converse_equivalent: bool) -> Result<Self> {
        if colors.len() != n * n {
            return Err(Error::InvalidGraph(format!(
                "expected {} pair colors, got {}",
                n * n,
                colors.len()
            )));
        }
        Ok(ColoredCompleteGraph {
            n,
            colors,
            converse_equivalent,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn color(&self, u: usize, v: usize) -> ColorId {
        self.colors[u * self.n + v]
    }

    pub fn colors(&self) -> &[ColorId] {
        &self.colors
    }

    pub fn converse_equivalent(&self) -> bool {
        self.converse_equivalent
    }

    pub(crate) fn replace_colors(&mut self, colors: Vec<ColorId>) {
        debug_assert_eq!(colors.len(), self.n * self.n);
        self.colors = colors;
    }
}

/// Loops get `LOOP`, edges `EDGE`, every other pair `NON_EDGE`.
pub fn initial_coloring(g: &SimpleGraph) -> ColoredCompleteGraph {
    let n = g.n();
    let mut colors = Vec::with_capacity(n * n);
    for u in 0..n {
        for v in 0..n {
            colors.push(if u == v {
                ColorId::LOOP
            } else if g.is_adjacent(u, v) {
                ColorId::EDGE
            } else {
                ColorId::NON_EDGE
            });
        }
    }
    ColoredCompleteGraph {
        n,
        colors,
        converse_equivalent: true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    /// No color is used both on a loop and on a non-loop pair.
    pub loop_disjoint: bool,
    /// `c(u,v) = c(u',v')` iff `c(v,u) = c(v',u')`.
    pub converse_equivalent: bool,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.loop_disjoint && self.converse_equivalent
    }
}

/// Checks both invariants jointly over several colorings that share an
/// interner.
pub fn check_invariants_joint(cs: &[&ColoredCompleteGraph]) -> InvariantReport {
    let mut loops = HashSet::new();
    let mut non_loops = HashSet::new();
    let mut converse: HashMap<ColorId, ColorId> = HashMap::new();
    let mut converse_ok = true;
    for c in cs {
        for u in 0..c.n {
            for v in 0..c.n {
                let x = c.color(u, v);
                if u == v {
                    loops.insert(x);
                } else {
                    non_loops.insert(x);
                }
                let y = c.color(v, u);
                if *converse.entry(x).or_insert(y) != y {
                    converse_ok = false;
                }
            }
        }
    }
    InvariantReport {
        loop_disjoint: loops.is_disjoint(&non_loops),
        converse_equivalent: converse_ok,
    }
}

pub fn check_invariants(c: &ColoredCompleteGraph) -> InvariantReport {
    check_invariants_joint(&[c])
}
