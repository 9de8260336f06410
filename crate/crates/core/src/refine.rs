//! Refinement operators and iteration to stability.
//!
//! A [`Workspace`] holds one coloring, or two colorings refined jointly
//! against a shared interner so that their colors can be compared.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algebra::{
    grow_products, partition_from_span, ColorMatrices, CoordinateFrame, GrowthStrategy,
    MatrixSpanBasis,
};
use crate::color::{ColorId, ColorInterner, Signature};
use crate::coloring::{
    check_invariants_joint, initial_coloring, ColoredCompleteGraph, InvariantReport,
};
use crate::error::{Error, Result};
use crate::field::{Field, PrimeField, RationalField, PRIME_1, PRIME_2};
use crate::graph::SimpleGraph;
use crate::partition::{joint_partition_of, PairPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinementKind {
    Wl,
    KWalk(usize),
    Walk,
}

impl RefinementKind {
    pub fn name(&self) -> &'static str {
        match self {
            RefinementKind::Wl => "wl",
            RefinementKind::KWalk(_) => "kwalk",
            RefinementKind::Walk => "walk",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            RefinementKind::KWalk(k) => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for RefinementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefinementKind::KWalk(k) => write!(f, "kwalk:{k}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for RefinementKind {
    type Err = Error;

    /// Accepts `wl`, `walk` and `kwalk:K`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wl" => Ok(RefinementKind::Wl),
            "walk" => Ok(RefinementKind::Walk),
            _ => s
                .strip_prefix("kwalk:")
                .and_then(|k| k.parse().ok())
                .map(RefinementKind::KWalk)
                .ok_or_else(|| Error::Precondition(format!("unknown refinement kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithMode {
    /// Single prime 2^61 - 1.
    Prime,
    /// Both default primes, compared; disagreement falls back to rationals.
    #[default]
    Prime2,
    Rational,
}

impl fmt::Display for ArithMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithMode::Prime => "prime",
            ArithMode::Prime2 => "prime2",
            ArithMode::Rational => "rational",
        })
    }
}

impl FromStr for ArithMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prime" => Ok(ArithMode::Prime),
            "prime2" => Ok(ArithMode::Prime2),
            "rational" => Ok(ArithMode::Rational),
            _ => Err(Error::Precondition(format!(
                "unknown arithmetic mode {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOptions {
    pub arith: ArithMode,
    pub seed: u64,
    /// Multiply by every generator instead of random combinations. Rational
    /// arithmetic always does this.
    pub exhaustive: bool,
    /// Upper bound on enumerated walks for the naive k-walk operator.
    pub naive_budget: u128,
    pub deadline: Option<Instant>,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            arith: ArithMode::Prime2,
            seed: 0,
            exhaustive: false,
            naive_budget: 10_000_000,
            deadline: None,
        }
    }
}

/// Result of one span closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Closure {
    pub partition: PairPartition,
    pub dim: usize,
    /// First product length that added nothing to the span, if reached.
    pub stabilized_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    graphs: Vec<ColoredCompleteGraph>,
    interner: ColorInterner,
    round: u32,
    frame: Option<Arc<CoordinateFrame>>,
    options: StepOptions,
    cross_check_failures: usize,
}

impl Workspace {
    pub fn single(g: &SimpleGraph) -> Self {
        Self::from_parts(vec![initial_coloring(g)], ColorInterner::new())
    }

    pub fn joint(g1: &SimpleGraph, g2: &SimpleGraph) -> Self {
        Self::from_parts(
            vec![initial_coloring(g1), initial_coloring(g2)],
            ColorInterner::new(),
        )
    }

    /// Takes colorings whose ids were produced by `interner`.
    pub fn from_parts(graphs: Vec<ColoredCompleteGraph>, interner: ColorInterner) -> Self {
        Workspace {
            graphs,
            interner,
            round: 0,
            frame: None,
            options: StepOptions::default(),
            cross_check_failures: 0,
        }
    }

    /// Takes colorings with arbitrary ids and re-interns them so they cannot
    /// collide with colors created later.
    pub fn from_colorings(graphs: Vec<ColoredCompleteGraph>) -> Self {
        let mut interner = ColorInterner::new();
        let mut map = std::collections::HashMap::new();
        let graphs = graphs
            .into_iter()
            .map(|c| {
                let colors = c
                    .colors()
                    .iter()
                    .map(|x| {
                        let next = map.len() as u32;
                        let idx = *map.entry(*x).or_insert(next);
                        interner.intern(Signature::Class {
                            round: u32::MAX,
                            index: idx,
                        })
                    })
                    .collect();
                ColoredCompleteGraph::new(c.n(), colors, c.converse_equivalent())
                    .expect("same size")
            })
            .collect();
        Self::from_parts(graphs, interner)
    }

    pub fn with_options(mut self, options: StepOptions) -> Self {
        self.options = options;
        self
    }

    pub fn options(&self) -> &StepOptions {
        &self.options
    }

    pub fn graphs(&self) -> &[ColoredCompleteGraph] {
        &self.graphs
    }

    pub fn interner(&self) -> &ColorInterner {
        &self.interner
    }

    pub fn is_joint(&self) -> bool {
        self.graphs.len() > 1
    }

    pub fn blocks(&self) -> Vec<usize> {
        self.graphs.iter().map(|c| c.n()).collect()
    }

    /// Times the two-prime check disagreed and rationals were used.
    pub fn cross_check_failures(&self) -> usize {
        self.cross_check_failures
    }

    pub fn partition(&self) -> PairPartition {
        joint_partition_of(&self.graphs)
    }

    pub fn check_invariants(&self) -> InvariantReport {
        check_invariants_joint(&self.graphs.iter().collect::<Vec<_>>())
    }

    /// True when some two graphs have different pair-color multisets.
    pub fn color_multisets_differ(&self) -> bool {
        let p = self.partition();
        (1..self.graphs.len()).any(|t| p.blocks_differ(0, t))
    }

    pub fn step(&mut self, kind: RefinementKind) -> Result<Option<Closure>> {
        match kind {
            RefinementKind::Wl => {
                self.wl_step();
                Ok(None)
            }
            RefinementKind::KWalk(k) => self.k_walk_step(k).map(Some),
            RefinementKind::Walk => self.walk_step().map(Some),
        }
    }

    /// `(u,v)` gets the multiset over `w` of `(c(u,w), c(w,v))`.
    pub fn wl_step(&mut self) {
        let interner = &mut self.interner;
        for c in self.graphs.iter_mut() {
            let n = c.n();
            let mut next = Vec::with_capacity(n * n);
            let mut buf = Vec::with_capacity(n);
            for u in 0..n {
                for v in 0..n {
                    buf.clear();
                    for w in 0..n {
                        buf.push(interner.intern_pair(c.color(u, w), c.color(w, v)));
                    }
                    next.push(interner.intern(Signature::Multiset(buf.clone())));
                }
            }
            c.replace_colors(next);
        }
    }

    /// `(u,v)` gets the class of `(u,v)` in the span of color-matrix products
    /// of length `k`, which is the partition induced by the multisets of
    /// color sequences of k-walks from `u` to `v`.
    pub fn k_walk_step(&mut self, k: usize) -> Result<Closure> {
        if k < 2 {
            return Err(Error::WalkLength(k));
        }
        self.algebraic_step(k)
    }

    /// The k-walk step with `k` the square of the total vertex count,
    /// long enough for every product span to close.
    pub fn walk_step(&mut self) -> Result<Closure> {
        let total: usize = self.graphs.iter().map(|c| c.n()).sum();
        self.algebraic_step((total * total).max(2))
    }

    /// Literal k-walk step: enumerates all walks and interns color sequences.
    pub fn naive_k_walk_step(&mut self, k: usize) -> Result<()> {
        if k < 2 {
            return Err(Error::WalkLength(k));
        }
        let needed: u128 = self
            .graphs
            .iter()
            .map(|c| (c.n() as u128).saturating_pow(k as u32 + 1))
            .sum();
        if needed > self.options.naive_budget {
            return Err(Error::BudgetExceeded {
                needed,
                budget: self.options.naive_budget,
            });
        }
        let interner = &mut self.interner;
        for c in self.graphs.iter_mut() {
            let n = c.n();
            let mut next = Vec::with_capacity(n * n);
            for u in 0..n {
                for v in 0..n {
                    let mut seqs = Vec::new();
                    let mut inner = vec![0usize; k - 1];
                    loop {
                        let mut seq = Vec::with_capacity(k);
                        let mut prev = u;
                        for &w in inner.iter().chain(std::iter::once(&v)) {
                            seq.push(c.color(prev, w));
                            prev = w;
                        }
                        seqs.push(interner.intern(Signature::Sequence(seq)));
                        // odometer over the inner vertices
                        let mut i = 0;
                        while i < inner.len() {
                            inner[i] += 1;
                            if inner[i] < n {
                                break;
                            }
                            inner[i] = 0;
                            i += 1;
                        }
                        if i == inner.len() {
                            break;
                        }
                    }
                    next.push(interner.intern(Signature::Multiset(seqs)));
                }
            }
            c.replace_colors(next);
        }
        Ok(())
    }

    /// Dimension of the algebra generated by the current color matrices.
    pub fn algebra_dimension(&mut self) -> Result<usize> {
        let total: usize = self.graphs.iter().map(|c| c.n()).sum();
        Ok(self.closure((total * total).max(2))?.dim)
    }

    /// Stable Weisfeiler-Leman partition of the current coloring, used as
    /// coordinate frame for every later closure.
    fn frame(&mut self) -> Arc<CoordinateFrame> {
        if let Some(f) = &self.frame {
            return f.clone();
        }
        let mut scratch = Workspace::from_parts(self.graphs.clone(), self.interner.clone());
        let mut p = scratch.partition();
        loop {
            scratch.wl_step();
            let q = scratch.partition();
            if q == p {
                break;
            }
            p = q;
        }
        let f = Arc::new(CoordinateFrame::from_partition(&p));
        self.frame = Some(f.clone());
        f
    }

    /// Span closure of products of length at most `max_len`.
    pub fn closure(&mut self, max_len: usize) -> Result<Closure> {
        let frame = self.frame();
        let gens = ColorMatrices::from_colorings(&self.graphs);
        let seed = self
            .options
            .seed
            .wrapping_add((self.round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let strategy = if self.options.exhaustive {
            GrowthStrategy::Exhaustive
        } else {
            GrowthStrategy::Randomized { seed }
        };
        let prime = |p: u64| -> Result<Closure> {
            run_closure(PrimeField::new(p)?, frame.clone(), &gens, max_len, strategy)
        };
        match self.options.arith {
            ArithMode::Prime => prime(PRIME_1),
            ArithMode::Rational => run_closure(
                RationalField,
                frame.clone(),
                &gens,
                max_len,
                GrowthStrategy::Exhaustive,
            ),
            ArithMode::Prime2 => {
                let (a, b) = rayon::join(|| prime(PRIME_1), || prime(PRIME_2));
                let (a, b) = (a?, b?);
                if a.dim == b.dim && a.partition == b.partition {
                    Ok(a)
                } else {
                    log::warn!(
                        "prime cross-check disagrees (ranks {} and {}), recomputing over the rationals",
                        a.dim,
                        b.dim
                    );
                    self.cross_check_failures += 1;
                    run_closure(
                        RationalField,
                        frame.clone(),
                        &gens,
                        max_len,
                        GrowthStrategy::Exhaustive,
                    )
                }
            }
        }
    }

    fn algebraic_step(&mut self, max_len: usize) -> Result<Closure> {
        let closure = self.closure(max_len)?;
        self.apply_partition(&closure.partition);
        Ok(closure)
    }

    /// Recolors every pair by its class in `p`.
    fn apply_partition(&mut self, p: &PairPartition) {
        self.round += 1;
        let round = self.round;
        let ids: Vec<ColorId> = (0..p.num_classes() as u32)
            .map(|index| self.interner.intern(Signature::Class { round, index }))
            .collect();
        let mut i = 0;
        for c in self.graphs.iter_mut() {
            let n = c.n();
            let colors = p.class_of()[i..i + n * n]
                .iter()
                .map(|&x| ids[x as usize])
                .collect();
            i += n * n;
            c.replace_colors(colors);
        }
    }

    fn check_deadline(&self) -> Result<()> {
        match self.options.deadline {
            Some(d) if Instant::now() > d => Err(Error::Timeout),
            _ => Ok(()),
        }
    }

    /// Current color of one pair of each class, in class order.
    fn class_colors(&self) -> Vec<ColorId> {
        let p = self.partition();
        let mut out = vec![None; p.num_classes()];
        let all = self.graphs.iter().flat_map(|c| c.colors().iter());
        for (&cls, &col) in p.class_of().iter().zip(all) {
            out[cls as usize].get_or_insert(col);
        }
        out.into_iter()
            .map(|c| c.expect("every class is inhabited"))
            .collect()
    }

    /// Iterates `kind` until the partition no longer changes.
    pub fn stabilize(&mut self, kind: RefinementKind) -> Result<RefinementHistory> {
        let base_colors = self.class_colors();
        let mut partitions = vec![self.partition()];
        let mut dims = Vec::new();
        let mut distinguished_at = self.color_multisets_differ().then_some(0);
        loop {
            self.check_deadline()?;
            if let Some(c) = self.step(kind)? {
                dims.push(c.dim);
            }
            let p = self.partition();
            if Some(&p) == partitions.last() {
                break;
            }
            if distinguished_at.is_none() && (1..self.graphs.len()).any(|t| p.blocks_differ(0, t)) {
                distinguished_at = Some(partitions.len());
            }
            partitions.push(p);
        }
        Ok(RefinementHistory {
            kind,
            partitions,
            dims,
            distinguished_at,
            base_colors,
        })
    }

    /// Iterates `kind` jointly until the two color multisets differ or the
    /// joint partition is stable.
    pub fn run_until_distinguished(&mut self, kind: RefinementKind) -> Result<RefinementHistory> {
        let base_colors = self.class_colors();
        let mut partitions = vec![self.partition()];
        let mut dims = Vec::new();
        if self.color_multisets_differ() {
            return Ok(RefinementHistory {
                kind,
                partitions,
                dims,
                distinguished_at: Some(0),
                base_colors,
            });
        }
        loop {
            self.check_deadline()?;
            if let Some(c) = self.step(kind)? {
                dims.push(c.dim);
            }
            let p = self.partition();
            if Some(&p) == partitions.last() {
                return Ok(RefinementHistory {
                    kind,
                    partitions,
                    dims,
                    distinguished_at: None,
                    base_colors,
                });
            }
            partitions.push(p);
            if self.color_multisets_differ() {
                return Ok(RefinementHistory {
                    kind,
                    distinguished_at: Some(partitions.len() - 1),
                    partitions,
                    dims,
                    base_colors,
                });
            }
        }
    }
}

fn run_closure<F: Field>(
    field: F,
    frame: Arc<CoordinateFrame>,
    gens: &ColorMatrices,
    max_len: usize,
    strategy: GrowthStrategy,
) -> Result<Closure> {
    let basis = MatrixSpanBasis::from_generators(field, frame, gens)?;
    let (basis, outcome) = grow_products(basis, gens, max_len, strategy);
    Ok(Closure {
        partition: partition_from_span(&basis),
        dim: basis.rank(),
        stabilized_at: outcome.stabilized_at,
    })
}

/// Partitions `pi^0, ..., pi^m` of one run, `pi^m` stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementHistory {
    pub kind: RefinementKind,
    pub partitions: Vec<PairPartition>,
    /// Span dimension computed at each algebraic step, in order.
    pub dims: Vec<usize>,
    /// First iteration at which the graphs of a joint run have different
    /// color multisets.
    pub distinguished_at: Option<usize>,
    /// Color of each class of `pi^0`, in class order.
    pub base_colors: Vec<ColorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryReport {
    pub kind: String,
    pub k: Option<usize>,
    pub iterations: usize,
    pub classes_per_iteration: Vec<usize>,
    pub distinguished_at: Option<usize>,
}

impl RefinementHistory {
    /// Least `m` with `pi^m = pi^{m+1}`.
    pub fn stabilization_index(&self) -> usize {
        self.partitions.len() - 1
    }

    pub fn classes_per_iteration(&self) -> Vec<usize> {
        self.partitions.iter().map(|p| p.num_classes()).collect()
    }

    pub fn stable(&self) -> &PairPartition {
        self.partitions.last().expect("history is never empty")
    }

    pub fn report(&self) -> HistoryReport {
        HistoryReport {
            kind: self.kind.name().into(),
            k: self.kind.k(),
            iterations: self.stabilization_index(),
            classes_per_iteration: self.classes_per_iteration(),
            distinguished_at: self.distinguished_at,
        }
    }
}

/// Runs `kind` to stability on one graph.
pub fn stabilize(
    g: &SimpleGraph,
    kind: RefinementKind,
    options: &StepOptions,
) -> Result<RefinementHistory> {
    Workspace::single(g)
        .with_options(options.clone())
        .stabilize(kind)
}

/// Number of iterations of `kind` after which the two graphs have different
/// pair-color multisets, `None` if they are never distinguished.
pub fn iterations_to_distinguish(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    kind: RefinementKind,
    options: &StepOptions,
) -> Result<Option<usize>> {
    Ok(Workspace::joint(g1, g2)
        .with_options(options.clone())
        .run_until_distinguished(kind)?
        .distinguished_at)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionChain {
    pub n: usize,
    /// `dims[i]` is the dimension of the algebra generated by `pi^i`.
    pub dims: Vec<usize>,
    pub strictly_increasing: bool,
    pub iterations: usize,
}

/// Walk refinement to stability, recording the algebra dimension of every
/// intermediate coloring.
pub fn dimension_chain(g: &SimpleGraph, options: &StepOptions) -> Result<DimensionChain> {
    let mut ws = Workspace::single(g).with_options(options.clone());
    let h = ws.stabilize(RefinementKind::Walk)?;
    // the closure at pi^i is computed by step i + 1; the final step runs on
    // the stable coloring
    let dims = h.dims.clone();
    Ok(DimensionChain {
        n: g.n(),
        strictly_increasing: dims.windows(2).all(|w| w[0] < w[1]),
        iterations: h.stabilization_index(),
        dims,
    })
}

/// Algebra dimension of an arbitrary coloring.
pub fn algebra_dimension(c: &ColoredCompleteGraph, options: &StepOptions) -> Result<usize> {
    Workspace::from_colorings(vec![c.clone()])
        .with_options(options.clone())
        .algebra_dimension()
}
