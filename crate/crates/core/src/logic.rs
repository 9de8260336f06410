//! Walk counting logic.
//!
//! Every formula has two implicit free endpoints `x` and `y`. The walk
//! quantifier `(walk j k f1 .. fk)` holds on `(x, y)` when at least `j`
//! interior tuples `(w2, .., wk)` make each `fi` hold on `(wi, w{i+1})`, with
//! `w1 = x` and `w{k+1} = y`. Formulas live in a hash-consed arena, so shared
//! subformulas are stored once.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::color::ColorId;
use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::partition::PairPartition;
use crate::refine::{RefinementHistory, RefinementKind, StepOptions, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Eq,
    Adj,
    Not(NodeId),
    /// The empty conjunction is the tautology.
    And(Vec<NodeId>),
    Walk {
        count: u64,
        parts: Vec<NodeId>,
    },
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::Eq | Node::Adj => &[],
            Node::Not(f) => std::slice::from_ref(f),
            Node::And(fs) => fs,
            Node::Walk { parts, .. } => parts,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FormulaArena {
    nodes: Vec<Node>,
    depth: Vec<usize>,
    ids: HashMap<Node, NodeId>,
}

impl PartialEq for FormulaArena {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for FormulaArena {}

impl FormulaArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    /// Quantifier depth.
    pub fn depth(&self, id: NodeId) -> usize {
        self.depth[id.index()]
    }

    fn intern(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.ids.get(&node) {
            return id;
        }
        let inner = node
            .children()
            .iter()
            .map(|c| self.depth[c.index()])
            .max()
            .unwrap_or(0);
        let d = match node {
            Node::Walk { .. } => inner + 1,
            _ => inner,
        };
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.depth.push(d);
        self.ids.insert(node, id);
        id
    }

    pub fn equality(&mut self) -> NodeId {
        self.intern(Node::Eq)
    }

    pub fn adjacency(&mut self) -> NodeId {
        self.intern(Node::Adj)
    }

    pub fn truth(&mut self) -> NodeId {
        self.intern(Node::And(Vec::new()))
    }

    pub fn not(&mut self, f: NodeId) -> NodeId {
        self.intern(Node::Not(f))
    }

    pub fn and(&mut self, fs: Vec<NodeId>) -> NodeId {
        self.intern(Node::And(fs))
    }

    pub fn walk(&mut self, count: u64, parts: Vec<NodeId>) -> Result<NodeId> {
        if count == 0 {
            return Err(Error::Formula("walk count must be positive".into()));
        }
        if parts.len() < 2 {
            return Err(Error::WalkLength(parts.len()));
        }
        Ok(self.intern(Node::Walk { count, parts }))
    }

    /// Exactly `count` tuples, as `>= count` and not `>= count + 1`.
    pub fn exactly(&mut self, count: u64, parts: Vec<NodeId>) -> Result<NodeId> {
        let more = self.walk(count + 1, parts.clone())?;
        let not_more = self.not(more);
        if count == 0 {
            return Ok(not_more);
        }
        let at_least = self.walk(count, parts)?;
        Ok(self.and(vec![at_least, not_more]))
    }

    /// Copies the nodes reachable from `root` into a fresh arena, children
    /// before parents in depth-first order.
    pub fn extract(&self, root: NodeId) -> WalkFormula {
        let mut out = FormulaArena::new();
        let mut map: HashMap<NodeId, NodeId> = HashMap::new();
        // iterative post-order; the depth of a formula is small but And
        // chains may be long
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if map.contains_key(&id) {
                continue;
            }
            let node = self.node(id);
            if !expanded {
                stack.push((id, true));
                for &c in node.children().iter().rev() {
                    if !map.contains_key(&c) {
                        stack.push((c, false));
                    }
                }
                continue;
            }
            let remap = |cs: &[NodeId]| cs.iter().map(|c| map[c]).collect::<Vec<_>>();
            let copy = match node {
                Node::Eq => Node::Eq,
                Node::Adj => Node::Adj,
                Node::Not(f) => Node::Not(map[f]),
                Node::And(fs) => Node::And(remap(fs)),
                Node::Walk { count, parts } => Node::Walk {
                    count: *count,
                    parts: remap(parts),
                },
            };
            let new = out.intern(copy);
            map.insert(id, new);
        }
        WalkFormula {
            root: map[&root],
            arena: out,
        }
    }
}

/// A formula together with the arena holding exactly its subformulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkFormula {
    arena: FormulaArena,
    root: NodeId,
}

impl WalkFormula {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn arena(&self) -> &FormulaArena {
        &self.arena
    }

    pub fn depth(&self) -> usize {
        self.arena.depth(self.root)
    }

    /// Number of distinct subformulas.
    pub fn dag_size(&self) -> usize {
        self.arena.len()
    }

    /// Size of the formula written as a tree, saturating.
    pub fn tree_size(&self) -> u128 {
        let mut size = vec![0u128; self.arena.len()];
        for (i, node) in self.arena.nodes.iter().enumerate() {
            size[i] = node
                .children()
                .iter()
                .fold(1u128, |acc, c| acc.saturating_add(size[c.index()]));
        }
        size[self.root.index()]
    }

    pub fn eval(&self, g: &SimpleGraph, u: usize, v: usize, budget: EvalBudget) -> Result<bool> {
        Evaluator::new(&self.arena, g, budget).eval(self.root, u, v)
    }

    /// Truth value of a formula that ignores its endpoints.
    pub fn eval_sentence(&self, g: &SimpleGraph, budget: EvalBudget) -> Result<bool> {
        if g.n() == 0 {
            return Err(Error::Precondition(
                "sentences need a nonempty graph".into(),
            ));
        }
        self.eval(g, 0, 0, budget)
    }

    pub fn to_sexpr(&self) -> String {
        let mut refs = vec![0usize; self.arena.len()];
        refs[self.root.index()] += 1;
        for node in &self.arena.nodes {
            for c in node.children() {
                refs[c.index()] += 1;
            }
        }
        let mut p = Printer {
            arena: &self.arena,
            refs,
            labels: vec![0; self.arena.len()],
            next: 1,
            out: String::new(),
        };
        p.print(self.root);
        p.out
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
            arena: FormulaArena::new(),
            labels: HashMap::new(),
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(p.arena.extract(root))
    }
}

impl fmt::Display for WalkFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

impl FromStr for WalkFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

struct Printer<'a> {
    arena: &'a FormulaArena,
    refs: Vec<usize>,
    labels: Vec<usize>,
    next: usize,
    out: String,
}

impl Printer<'_> {
    fn print(&mut self, id: NodeId) {
        let i = id.index();
        let node = self.arena.node(id);
        let leaf = matches!(node, Node::Eq | Node::Adj);
        if !leaf && self.refs[i] > 1 {
            if self.labels[i] != 0 {
                self.out.push_str(&format!("#{}#", self.labels[i]));
                return;
            }
            self.labels[i] = self.next;
            self.out.push_str(&format!("#{}=", self.next));
            self.next += 1;
        }
        match node {
            Node::Eq => self.out.push_str("(= x y)"),
            Node::Adj => self.out.push_str("(~ x y)"),
            Node::Not(f) => {
                self.out.push_str("(not ");
                self.print(*f);
                self.out.push(')');
            }
            Node::And(fs) => {
                self.out.push_str("(and");
                for &f in fs {
                    self.out.push(' ');
                    self.print(f);
                }
                self.out.push(')');
            }
            Node::Walk { count, parts } => {
                self.out
                    .push_str(&format!("(walk {} {}", count, parts.len()));
                for &f in parts {
                    self.out.push(' ');
                    self.print(f);
                }
                self.out.push(')');
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    arena: FormulaArena,
    labels: HashMap<u64, Option<NodeId>>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn digits(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected a number"))
    }

    fn word(&mut self) -> Result<&str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && !self.src[self.pos].is_ascii_whitespace()
            && !b"()#".contains(&self.src[self.pos])
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a symbol"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii"))
    }

    fn vars(&mut self) -> Result<()> {
        for want in ["x", "y"] {
            if self.word()? != want {
                return Err(self.err("atoms relate exactly x and y"));
            }
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<NodeId> {
        match self.peek() {
            Some(b'#') => {
                self.pos += 1;
                let label = self.digits()?;
                match self.src.get(self.pos) {
                    Some(b'#') => {
                        self.pos += 1;
                        match self.labels.get(&label) {
                            Some(Some(id)) => Ok(*id),
                            Some(None) => Err(self.err("label refers to itself")),
                            None => Err(self.err("undefined label")),
                        }
                    }
                    Some(b'=') => {
                        self.pos += 1;
                        if self.labels.insert(label, None).is_some() {
                            return Err(self.err("label defined twice"));
                        }
                        let id = self.body()?;
                        self.labels.insert(label, Some(id));
                        Ok(id)
                    }
                    _ => Err(self.err("expected '=' or '#' after label")),
                }
            }
            Some(b'(') => self.body(),
            _ => Err(self.err("expected '(' or a label")),
        }
    }

    fn body(&mut self) -> Result<NodeId> {
        self.expect(b'(')?;
        let head = self.word()?.to_owned();
        let id = match head.as_str() {
            "=" => {
                self.vars()?;
                self.arena.equality()
            }
            "~" => {
                self.vars()?;
                self.arena.adjacency()
            }
            "not" => {
                let f = self.expr()?;
                self.arena.not(f)
            }
            "and" => {
                let mut fs = Vec::new();
                while self.peek() != Some(b')') {
                    fs.push(self.expr()?);
                }
                self.arena.and(fs)
            }
            "walk" => {
                self.skip_ws();
                let count = self.digits()?;
                self.skip_ws();
                let k = self.digits()? as usize;
                let mut parts = Vec::with_capacity(k);
                for _ in 0..k {
                    parts.push(self.expr()?);
                }
                let at = self.pos;
                self.arena.walk(count, parts).map_err(|e| Error::Parse {
                    pos: at,
                    msg: e.to_string(),
                })?
            }
            _ => return Err(self.err("unknown connective")),
        };
        self.expect(b')')?;
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalBudget {
    /// Interior tuples a single quantifier may range over.
    pub max_tuples: u128,
    /// Node evaluations, memo hits excluded.
    pub max_evaluations: u64,
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self {
            max_tuples: 10_000_000,
            max_evaluations: 1_000_000_000,
        }
    }
}

/// Evaluates nodes of one arena on one graph. With memoization every
/// `(node, u, v)` is computed at most once.
pub struct Evaluator<'a> {
    arena: &'a FormulaArena,
    g: &'a SimpleGraph,
    budget: EvalBudget,
    memo: Option<Vec<Option<Box<[u8]>>>>,
    evaluations: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(arena: &'a FormulaArena, g: &'a SimpleGraph, budget: EvalBudget) -> Self {
        Self {
            arena,
            g,
            budget,
            memo: Some(vec![None; arena.len()]),
            evaluations: 0,
        }
    }

    /// Plain recursive evaluation without a memo table.
    pub fn literal(arena: &'a FormulaArena, g: &'a SimpleGraph, budget: EvalBudget) -> Self {
        Self {
            memo: None,
            ..Self::new(arena, g, budget)
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn eval(&mut self, id: NodeId, u: usize, v: usize) -> Result<bool> {
        let n = self.g.n();
        if u >= n || v >= n {
            return Err(Error::Precondition(format!(
                "vertex out of range for n = {n}"
            )));
        }
        self.eval_at(id, u, v)
    }

    fn eval_at(&mut self, id: NodeId, u: usize, v: usize) -> Result<bool> {
        let n = self.g.n();
        if let Some(memo) = &self.memo {
            if let Some(t) = &memo[id.index()] {
                match t[u * n + v] {
                    1 => return Ok(false),
                    2 => return Ok(true),
                    _ => {}
                }
            }
        }
        self.evaluations += 1;
        if self.evaluations > self.budget.max_evaluations {
            return Err(Error::EvalBudget);
        }
        let arena = self.arena;
        let value = match arena.node(id) {
            Node::Eq => u == v,
            Node::Adj => self.g.is_adjacent(u, v),
            Node::Not(f) => !self.eval_at(*f, u, v)?,
            Node::And(fs) => {
                let mut all = true;
                for &f in fs {
                    if !self.eval_at(f, u, v)? {
                        all = false;
                        break;
                    }
                }
                all
            }
            Node::Walk { count, parts } => {
                let tuples = (n as u128).saturating_pow(parts.len() as u32 - 1);
                if tuples > self.budget.max_tuples {
                    return Err(Error::EvalBudget);
                }
                let mut found = 0u64;
                self.count_walks(parts, 0, u, v, *count, &mut found)?;
                found >= *count
            }
        };
        if let Some(memo) = &mut self.memo {
            let t = memo[id.index()].get_or_insert_with(|| vec![0u8; n * n].into_boxed_slice());
            t[u * n + v] = if value { 2 } else { 1 };
        }
        Ok(value)
    }

    /// Counts tuples extending the walk prefix ending in `cur` at position
    /// `i`, stopping once `target` is reached.
    fn count_walks(
        &mut self,
        parts: &[NodeId],
        i: usize,
        cur: usize,
        v: usize,
        target: u64,
        found: &mut u64,
    ) -> Result<()> {
        if i + 1 == parts.len() {
            if self.eval_at(parts[i], cur, v)? {
                *found += 1;
            }
            return Ok(());
        }
        for w in 0..self.g.n() {
            if *found >= target {
                break;
            }
            if self.eval_at(parts[i], cur, w)? {
                self.count_walks(parts, i + 1, w, v, target, found)?;
            }
        }
        Ok(())
    }
}

pub fn eval(
    f: &WalkFormula,
    g: &SimpleGraph,
    u: usize,
    v: usize,
    budget: EvalBudget,
) -> Result<bool> {
    f.eval(g, u, v, budget)
}

/// Builds formulas identifying the classes of a k-walk refinement history.
///
/// The class of a pair at iteration `m` is determined by the multiset of
/// walk sequences over the partition at `m - 1`; the multiplicities are read
/// off one representative pair per class.
pub struct Synthesizer<'h> {
    history: &'h RefinementHistory,
    k: usize,
    arena: FormulaArena,
    base: Vec<NodeId>,
    memo: HashMap<(usize, u32), NodeId>,
    reps: HashMap<usize, Vec<(usize, usize, usize)>>,
    /// Every sequence occurring at an iteration, needed only when the blocks
    /// have different sizes.
    seen: HashMap<usize, BTreeSet<Vec<u32>>>,
    budget: u128,
}

impl<'h> Synthesizer<'h> {
    pub fn new(history: &'h RefinementHistory) -> Result<Self> {
        let RefinementKind::KWalk(k) = history.kind else {
            return Err(Error::Formula(format!(
                "color formulas need a k-walk history, got {}",
                history.kind
            )));
        };
        let mut arena = FormulaArena::new();
        let eq = arena.equality();
        let adj = arena.adjacency();
        let not_eq = arena.not(eq);
        let not_adj = arena.not(adj);
        let non_edge = arena.and(vec![not_eq, not_adj]);
        let p0 = &history.partitions[0];
        if history.base_colors.len() != p0.num_classes() {
            return Err(Error::Formula("history lacks base class colors".into()));
        }
        let base = history
            .base_colors
            .iter()
            .map(|&c| match c {
                ColorId::LOOP => Ok(eq),
                ColorId::EDGE => Ok(adj),
                ColorId::NON_EDGE => Ok(non_edge),
                _ => Err(Error::Formula(
                    "history does not start from the initial coloring".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            history,
            k,
            arena,
            base,
            memo: HashMap::new(),
            reps: HashMap::new(),
            seen: HashMap::new(),
            budget: StepOptions::default().naive_budget,
        })
    }

    pub fn arena(&self) -> &FormulaArena {
        &self.arena
    }

    pub fn formula(&self, root: NodeId) -> WalkFormula {
        self.arena.extract(root)
    }

    /// Formula of depth `m` true exactly on the pairs of `class` in `pi^m`.
    pub fn class_formula(&mut self, m: usize, class: u32) -> Result<NodeId> {
        let parts = &self.history.partitions;
        if m >= parts.len() {
            return Err(Error::Formula(format!("history has no iteration {m}")));
        }
        if class as usize >= parts[m].num_classes() {
            return Err(Error::Formula(format!(
                "iteration {m} has no class {class}"
            )));
        }
        if m == 0 {
            return Ok(self.base[class as usize]);
        }
        if let Some(&id) = self.memo.get(&(m, class)) {
            return Ok(id);
        }
        let (b, u, v) = self.representatives(m)[class as usize];
        let prev = &parts[m - 1];
        let counts = walk_sequences(prev, self.k, b, u, v, self.budget)?;
        let mut conj = Vec::with_capacity(counts.len());
        for (seq, &count) in &counts {
            let ps = self.parts_for(m - 1, seq)?;
            conj.push(self.arena.exactly(count, ps)?);
        }
        let uneven = prev.blocks().windows(2).any(|w| w[0] != w[1]);
        if uneven {
            let absent: Vec<Vec<u32>> = self
                .all_sequences(m)?
                .iter()
                .filter(|s| !counts.contains_key(*s))
                .cloned()
                .collect();
            for seq in absent {
                let ps = self.parts_for(m - 1, &seq)?;
                let some = self.arena.walk(1, ps)?;
                conj.push(self.arena.not(some));
            }
        }
        let id = self.arena.and(conj);
        self.memo.insert((m, class), id);
        Ok(id)
    }

    fn parts_for(&mut self, m: usize, seq: &[u32]) -> Result<Vec<NodeId>> {
        seq.iter().map(|&c| self.class_formula(m, c)).collect()
    }

    fn representatives(&mut self, m: usize) -> &[(usize, usize, usize)] {
        let p = &self.history.partitions[m];
        self.reps.entry(m).or_insert_with(|| {
            let mut reps = vec![None; p.num_classes()];
            for (b, &nb) in p.blocks().iter().enumerate() {
                for u in 0..nb {
                    for v in 0..nb {
                        reps[p.class_of_pair(b, u, v) as usize].get_or_insert((b, u, v));
                    }
                }
            }
            reps.into_iter()
                .map(|r| r.expect("every class is inhabited"))
                .collect()
        })
    }

    fn all_sequences(&mut self, m: usize) -> Result<&BTreeSet<Vec<u32>>> {
        if !self.seen.contains_key(&m) {
            let prev = &self.history.partitions[m - 1];
            let mut all = BTreeSet::new();
            for (b, &nb) in prev.blocks().iter().enumerate() {
                for u in 0..nb {
                    for v in 0..nb {
                        all.extend(walk_sequences(prev, self.k, b, u, v, self.budget)?.into_keys());
                    }
                }
            }
            self.seen.insert(m, all);
        }
        Ok(&self.seen[&m])
    }
}

/// Multiset of class sequences along the k-walks from `u` to `v` in block `b`.
fn walk_sequences(
    p: &PairPartition,
    k: usize,
    b: usize,
    u: usize,
    v: usize,
    budget: u128,
) -> Result<BTreeMap<Vec<u32>, u64>> {
    let n = p.blocks()[b];
    let needed = (n as u128).saturating_pow(k as u32 - 1);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut counts = BTreeMap::new();
    let mut inner = vec![0usize; k - 1];
    loop {
        let mut seq = Vec::with_capacity(k);
        let mut prev = u;
        for &w in inner.iter().chain(std::iter::once(&v)) {
            seq.push(p.class_of_pair(b, prev, w));
            prev = w;
        }
        *counts.entry(seq).or_insert(0) += 1;
        let mut i = 0;
        while i < inner.len() {
            inner[i] += 1;
            if inner[i] < n {
                break;
            }
            inner[i] = 0;
            i += 1;
        }
        if i == inner.len() || n == 0 {
            break;
        }
    }
    Ok(counts)
}

/// Formula of depth `m` identifying `class` of `pi^m` in a k-walk history.
pub fn synth_color_formula(
    history: &RefinementHistory,
    m: usize,
    class: u32,
) -> Result<WalkFormula> {
    let mut s = Synthesizer::new(history)?;
    let root = s.class_formula(m, class)?;
    Ok(s.formula(root))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistinguishingSentence {
    pub formula: WalkFormula,
    /// Iteration at which k-walk refinement first tells the graphs apart.
    pub iteration: usize,
    pub class: u32,
    /// Number of pairs of `class` in the first and second graph.
    pub counts: (usize, usize),
}

/// A sentence of depth `m + 1` that holds on `g1` and fails on `g2`, where
/// `m` is the number of k-walk iterations needed to distinguish them.
pub fn synth_distinguishing_sentence(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    k: usize,
    options: &StepOptions,
) -> Result<DistinguishingSentence> {
    if k < 3 {
        return Err(Error::Formula(
            "distinguishing sentences need k >= 3".into(),
        ));
    }
    if g1 == g2 {
        return Err(Error::NotDistinguished);
    }
    let history = Workspace::joint(g1, g2)
        .with_options(options.clone())
        .run_until_distinguished(RefinementKind::KWalk(k))?;
    let m = history.distinguished_at.ok_or(Error::NotDistinguished)?;
    let p = &history.partitions[m];
    let (c1, c2) = (p.class_counts(0), p.class_counts(1));
    let class = (0..p.num_classes())
        .find(|&c| c1[c] != c2[c])
        .expect("distinguished partitions differ in some class") as u32;
    let (n1, n2) = (c1[class as usize], c2[class as usize]);

    let mut s = Synthesizer::new(&history)?;
    let phi = s.class_formula(m, class)?;
    let a = &mut s.arena;
    let t = a.truth();
    let eq = a.equality();
    // (x, w2) free, (w2, w3) in the class, w3 = .. = wk, (wk, y) free: the
    // number of tuples is the number of pairs in the class
    let mut parts = vec![t, phi];
    parts.extend(std::iter::repeat_n(eq, k - 3));
    parts.push(t);
    let root = if n1 > n2 {
        a.walk(n1 as u64, parts)?
    } else {
        let w = a.walk(n2 as u64, parts)?;
        a.not(w)
    };
    Ok(DistinguishingSentence {
        formula: s.formula(root),
        iteration: m,
        class,
        counts: (n1, n2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::stabilize;
    use proptest::prelude::*;

    fn c4() -> SimpleGraph {
        SimpleGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn atoms() {
        let mut a = FormulaArena::new();
        let eq = a.equality();
        let adj = a.adjacency();
        let f = a.extract(eq);
        let g = c4();
        assert!(f.eval(&g, 2, 2, EvalBudget::default()).unwrap());
        assert!(!f.eval(&g, 1, 2, EvalBudget::default()).unwrap());
        let f = a.extract(adj);
        assert!(f.eval(&g, 1, 2, EvalBudget::default()).unwrap());
        assert!(!f.eval(&g, 0, 2, EvalBudget::default()).unwrap());
    }

    #[test]
    fn common_neighbors_in_c4() {
        let mut a = FormulaArena::new();
        let adj = a.adjacency();
        let two = a.walk(2, vec![adj, adj]).unwrap();
        let three = a.walk(3, vec![adj, adj]).unwrap();
        let g = c4();
        let mut e = Evaluator::new(&a, &g, EvalBudget::default());
        assert!(e.eval(two, 0, 2).unwrap());
        assert!(!e.eval(three, 0, 2).unwrap());
        assert!(!e.eval(two, 0, 1).unwrap());
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let mut a = FormulaArena::new();
        let adj = a.adjacency();
        let w1 = a.walk(1, vec![adj, adj]).unwrap();
        let w2 = a.walk(1, vec![adj, adj]).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(a.len(), 2);
        assert_eq!(a.depth(w1), 1);
        let nested = a.walk(1, vec![w1, adj]).unwrap();
        assert_eq!(a.depth(nested), 2);
    }

    #[test]
    fn tree_size_counts_repetitions() {
        let mut a = FormulaArena::new();
        let mut f = a.adjacency();
        for _ in 0..40 {
            f = a.and(vec![f, f]);
        }
        let w = a.extract(f);
        assert_eq!(w.dag_size(), 41);
        assert_eq!(w.tree_size(), (1u128 << 41) - 1);
    }

    #[test]
    fn sexpr_labels_shared_nodes() {
        let mut a = FormulaArena::new();
        let adj = a.adjacency();
        let w = a.walk(2, vec![adj, adj]).unwrap();
        let n = a.not(w);
        let f = a.and(vec![w, n]);
        let s = a.extract(f).to_sexpr();
        assert_eq!(s, "(and #1=(walk 2 2 (~ x y) (~ x y)) (not #1#))");
        assert_eq!(WalkFormula::parse(&s).unwrap(), a.extract(f));
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "",
            "(= x z)",
            "(walk 0 2 (= x y) (= x y))",
            "(walk 1 1 (= x y))",
            "(and #1#)",
            "#1=(and #1#)",
            "(and #1=(= x y) #1=(= x y))",
            "(or)",
            "(not (= x y)) junk",
        ] {
            assert!(
                matches!(WalkFormula::parse(bad), Err(Error::Parse { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut a = FormulaArena::new();
        let t = a.truth();
        let w = a.walk(1, vec![t; 5]).unwrap();
        let f = a.extract(w);
        let g = SimpleGraph::empty(20);
        let tight = EvalBudget {
            max_tuples: 1000,
            ..EvalBudget::default()
        };
        assert!(matches!(f.eval(&g, 0, 0, tight), Err(Error::EvalBudget)));
        assert!(f.eval(&g, 0, 0, EvalBudget::default()).unwrap());
    }

    #[test]
    fn loop_class_at_iteration_zero_is_eq() {
        let g = SimpleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let h = stabilize(&g, RefinementKind::KWalk(2), &StepOptions::default()).unwrap();
        let f = synth_color_formula(&h, 0, h.partitions[0].class_of_pair(0, 0, 0)).unwrap();
        assert_eq!(f.to_sexpr(), "(= x y)");
    }

    #[test]
    fn middle_loop_of_path() {
        let g = SimpleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let h = stabilize(&g, RefinementKind::KWalk(2), &StepOptions::default()).unwrap();
        let p = &h.partitions[1];
        let class = p.class_of_pair(0, 1, 1);
        let f = synth_color_formula(&h, 1, class).unwrap();
        assert_eq!(f.depth(), 1);
        for u in 0..3 {
            for v in 0..3 {
                let want = p.class_of_pair(0, u, v) == class;
                assert_eq!(f.eval(&g, u, v, EvalBudget::default()).unwrap(), want);
                assert_eq!(want, (u, v) == (1, 1));
            }
        }
    }

    #[test]
    fn formulas_match_classes_on_random_graphs() {
        for (i, g) in crate::graph::random_corpus(12, 7, 3).iter().enumerate() {
            let h = stabilize(g, RefinementKind::KWalk(3), &StepOptions::default()).unwrap();
            let mut s = Synthesizer::new(&h).unwrap();
            for m in 0..h.partitions.len().min(3) {
                let p = &h.partitions[m];
                let roots: Vec<NodeId> = (0..p.num_classes() as u32)
                    .map(|c| s.class_formula(m, c).unwrap())
                    .collect();
                let mut e = Evaluator::new(s.arena(), g, EvalBudget::default());
                for u in 0..g.n() {
                    for v in 0..g.n() {
                        let c = p.class_of_pair(0, u, v) as usize;
                        for (d, &r) in roots.iter().enumerate() {
                            assert_eq!(
                                e.eval(r, u, v).unwrap(),
                                d == c,
                                "graph {i}, iteration {m}"
                            );
                        }
                    }
                }
                for &r in &roots {
                    assert_eq!(s.arena().depth(r), m);
                }
            }
        }
    }

    #[test]
    fn triangle_against_path() {
        let k3 = SimpleGraph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let p3 = SimpleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let s = synth_distinguishing_sentence(&k3, &p3, 3, &StepOptions::default()).unwrap();
        assert_eq!(s.iteration, 0);
        assert_eq!(s.formula.depth(), 1);
        let b = EvalBudget::default();
        assert!(s.formula.eval_sentence(&k3, b).unwrap());
        assert!(!s.formula.eval_sentence(&p3, b).unwrap());
        // the reverse direction needs a negated count
        let r = synth_distinguishing_sentence(&p3, &k3, 3, &StepOptions::default()).unwrap();
        assert!(r.formula.eval_sentence(&p3, b).unwrap());
        assert!(!r.formula.eval_sentence(&k3, b).unwrap());
    }

    #[test]
    fn different_orders() {
        let a = SimpleGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let b = SimpleGraph::new(3, [(0, 1)]).unwrap();
        let budget = EvalBudget::default();
        for k in [3, 5] {
            let s = synth_distinguishing_sentence(&a, &b, k, &StepOptions::default()).unwrap();
            assert!(s.formula.eval_sentence(&a, budget).unwrap());
            assert!(!s.formula.eval_sentence(&b, budget).unwrap());
        }
    }

    #[test]
    fn sentences_need_distinct_graphs() {
        let g = c4();
        let o = StepOptions::default();
        assert!(matches!(
            synth_distinguishing_sentence(&g, &g, 3, &o),
            Err(Error::NotDistinguished)
        ));
        let h = g.permuted(&[1, 2, 3, 0]).unwrap();
        assert!(matches!(
            synth_distinguishing_sentence(&g, &h, 3, &o),
            Err(Error::NotDistinguished)
        ));
        assert!(synth_distinguishing_sentence(&g, &SimpleGraph::empty(4), 2, &o).is_err());
    }

    fn arb_formula() -> impl Strategy<Value = WalkFormula> {
        #[derive(Debug, Clone)]
        enum T {
            Eq,
            Adj,
            Not(Box<T>),
            And(Vec<T>),
            Walk(u64, Vec<T>),
        }
        let leaf = prop_oneof![Just(T::Eq), Just(T::Adj)];
        let tree = leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|t| T::Not(Box::new(t))),
                prop::collection::vec(inner.clone(), 0..3).prop_map(T::And),
                (1u64..4, prop::collection::vec(inner, 2..4)).prop_map(|(c, ps)| T::Walk(c, ps)),
            ]
        });
        fn build(a: &mut FormulaArena, t: &T) -> NodeId {
            match t {
                T::Eq => a.equality(),
                T::Adj => a.adjacency(),
                T::Not(f) => {
                    let f = build(a, f);
                    a.not(f)
                }
                T::And(fs) => {
                    let fs = fs.iter().map(|f| build(a, f)).collect();
                    a.and(fs)
                }
                T::Walk(c, ps) => {
                    let ps = ps.iter().map(|f| build(a, f)).collect();
                    a.walk(*c, ps).unwrap()
                }
            }
        }
        tree.prop_map(|t| {
            let mut a = FormulaArena::new();
            let root = build(&mut a, &t);
            a.extract(root)
        })
    }

    proptest! {
        #[test]
        fn sexpr_round_trip(f in arb_formula()) {
            let s = f.to_sexpr();
            let back = WalkFormula::parse(&s).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.to_sexpr(), s);
        }

        #[test]
        fn memo_is_transparent(f in arb_formula(), seed in 0u64..1000) {
            let g = crate::graph::random_corpus(1, 5, seed).pop().unwrap();
            let b = EvalBudget::default();
            let mut memo = Evaluator::new(f.arena(), &g, b);
            let mut lit = Evaluator::literal(f.arena(), &g, b);
            for u in 0..g.n() {
                for v in 0..g.n() {
                    prop_assert_eq!(memo.eval(f.root(), u, v).unwrap(), lit.eval(f.root(), u, v).unwrap());
                }
            }
        }
    }
}
