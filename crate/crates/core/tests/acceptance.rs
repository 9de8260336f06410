//! Acceptance criteria. Prints one PASS/FAIL line per criterion.
//!
//! Three criteria fail as literally stated. For those the run checks that
//! the failure has exactly the analyzed shape and exits nonzero only on an
//! unexplained outcome.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use walkref_core::cfi::grid_vertex;
use walkref_core::experiment::{
    grid_pair, run_lower_bound, run_property_suite, run_remark_disagreement, ExperimentConfig,
    ExperimentReport, Status, SuiteSpec,
};
use walkref_core::game::{verify_scenario, Scenario};
use walkref_core::graph::random_corpus;
use walkref_core::logic::{synth_distinguishing_sentence, EvalBudget, Evaluator, Synthesizer};
use walkref_core::refine::iterations_to_distinguish;
use walkref_core::{RefinementKind, SimpleGraph, StepOptions, Workspace};

struct Line {
    pass: bool,
    detail: String,
    /// the outcome, pass or fail, is the one the analysis predicts
    explained: bool,
}

impl Line {
    fn plain(pass: bool, detail: String) -> Self {
        Line {
            pass,
            detail,
            explained: pass,
        }
    }
}

fn config() -> ExperimentConfig {
    ExperimentConfig {
        timings: false,
        ..ExperimentConfig::default()
    }
}

fn suite() -> &'static ExperimentReport {
    static SUITE: OnceLock<ExperimentReport> = OnceLock::new();
    SUITE.get_or_init(|| {
        run_property_suite(&SuiteSpec::default(), &config()).expect("property suite runs")
    })
}

fn verdict_line(name: &str) -> Line {
    let v = suite().verdict(name).expect("verdict present");
    Line::plain(v.status == Status::Pass, format!("{name}: {}", v.detail))
}

fn remark() -> Line {
    let ns: Vec<usize> = (2..=10).collect();
    let r = run_remark_disagreement(&ns, &config()).expect("remark runs");
    let failing: Vec<&str> = r
        .verdicts
        .iter()
        .filter(|v| v.name.starts_with("remark n=") && v.status != Status::Pass)
        .map(|v| v.name.as_str())
        .collect();
    let pass = failing.is_empty();
    // 2-walk refinement is 2-WL refinement, so n = 2 cannot disagree
    let n2 = r.verdict("remark n=2").unwrap();
    let explained = failing == ["remark n=2"]
        && n2
            .detail
            .contains("coinciding (2-WL, 2-walk) iterations [(1, 1)]");
    Line {
        pass,
        detail: format!(
            "n = 3..10 disagree until both are stable; failing: {failing:?} ({})",
            n2.detail
        ),
        explained: pass || explained,
    }
}

/// Dense closure over a prime, written independently of the library.
mod dense {
    const P: u64 = 1_000_000_007;

    fn mul(a: &[u64], b: &[u64], n: usize) -> Vec<u64> {
        let mut c = vec![0u64; n * n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    c[i * n + j] = (c[i * n + j] + a[i * n + k] * b[k * n + j]) % P;
                }
            }
        }
        c
    }

    fn inv(x: u64) -> u64 {
        let (mut r, mut b, mut e) = (1u64, x, P - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = (r as u128 * b as u128 % P as u128) as u64;
            }
            b = (b as u128 * b as u128 % P as u128) as u64;
            e >>= 1;
        }
        r
    }

    /// Adds `v` to the echelon rows if independent.
    fn insert(rows: &mut Vec<Vec<u64>>, mut v: Vec<u64>) -> bool {
        for r in rows.iter() {
            let p = r.iter().position(|&x| x != 0).unwrap();
            if v[p] != 0 {
                let f = v[p];
                for (x, y) in v.iter_mut().zip(r) {
                    *x = (*x + P - f * y % P) % P;
                }
            }
        }
        let Some(p) = v.iter().position(|&x| x != 0) else {
            return false;
        };
        let s = inv(v[p]);
        for x in v.iter_mut() {
            *x = *x * s % P;
        }
        for r in rows.iter_mut() {
            if r[p] != 0 {
                let f = r[p];
                for (x, y) in r.iter_mut().zip(&v) {
                    *x = (*x + P - f * y % P) % P;
                }
            }
        }
        rows.push(v);
        true
    }

    /// Dimension of the algebra generated by the class indicator matrices
    /// of `colors`, and the partition of pairs it induces.
    pub fn algebra(colors: &[usize], n: usize) -> (usize, Vec<usize>) {
        let k = colors.iter().max().unwrap() + 1;
        let gens: Vec<Vec<u64>> = (0..k)
            .map(|c| colors.iter().map(|&x| (x == c) as u64).collect())
            .collect();
        let mut rows = Vec::new();
        let mut span: Vec<Vec<u64>> = Vec::new();
        for g in &gens {
            if insert(&mut rows, g.clone()) {
                span.push(g.clone());
            }
        }
        let mut i = 0;
        while i < span.len() {
            for g in &gens {
                let p = mul(&span[i], g, n);
                if insert(&mut rows, p.clone()) {
                    span.push(p);
                }
            }
            i += 1;
        }
        let mut keys: Vec<Vec<u64>> = Vec::new();
        let classes = (0..n * n)
            .map(|x| {
                let key: Vec<u64> = rows.iter().map(|r| r[x]).collect();
                keys.iter().position(|k| *k == key).unwrap_or_else(|| {
                    keys.push(key);
                    keys.len() - 1
                })
            })
            .collect();
        (rows.len(), classes)
    }
}

fn dimensions() -> Line {
    let s = suite();
    let strict = s.verdict("dimension-chain-strict").unwrap();
    let weak = s.verdict("dimension-chain-strict-but-last").unwrap();
    let cross = s.verdict("two-prime-agreement").unwrap();
    let exact = s.verdict("rational-spot-check").unwrap();
    let pass = strict.status == Status::Pass
        && cross.status == Status::Pass
        && exact.status == Status::Pass;

    // the path on three vertices: independent closure shows <chi^0> = <chi^1>
    // although chi^1 is strictly finer
    let n = 3;
    let g = SimpleGraph::new(n, [(0, 1), (1, 2)]).unwrap();
    let chi0: Vec<usize> = (0..n * n)
        .map(|x| {
            let (u, v) = (x / n, x % n);
            if u == v {
                0
            } else if g.is_adjacent(u, v) {
                1
            } else {
                2
            }
        })
        .collect();
    let (d0, chi1) = dense::algebra(&chi0, n);
    let (d1, _) = dense::algebra(&chi1, n);
    let classes1 = chi1.iter().max().unwrap() + 1;
    let lib =
        walkref_core::refine::stabilize(&g, RefinementKind::Walk, &StepOptions::default()).unwrap();
    let oracle_agrees = lib.dims == [d0, d1] && lib.classes_per_iteration() == [3, classes1];
    let explained = !pass
        && weak.status == Status::Pass
        && cross.status == Status::Pass
        && exact.status == Status::Pass
        && (d0, d1, classes1) == (5, 5, 5)
        && oracle_agrees;
    Line {
        pass,
        detail: format!(
            "{}; strict except at the last step: {:?}; {}; {}; path P3 by independent closure: classes 3 -> {classes1}, dims {d0}, {d1}",
            strict.detail, weak.status, cross.detail, exact.detail
        ),
        explained: pass || explained,
    }
}

fn lower_bound() -> Line {
    let r = run_lower_bound(&[4, 6, 8, 10], &config()).expect("lower bound runs");
    let names = ["walk-equals-kwalk4", "strictly-increasing", "window"];
    let pass = names
        .iter()
        .all(|n| r.verdict(n).unwrap().status == Status::Pass);
    // literal enumeration of 4-walks for the smallest instance
    let (x, xt) = grid_pair(4).unwrap();
    let mut ws = Workspace::joint(x.graph(), xt.graph()).with_options(StepOptions {
        naive_budget: 50_000_000,
        ..StepOptions::default()
    });
    let mut naive = None;
    for i in 1..=4 {
        ws.naive_k_walk_step(4).unwrap();
        if ws.color_multisets_differ() {
            naive = Some(i);
            break;
        }
    }
    let algebraic = iterations_to_distinguish(
        x.graph(),
        xt.graph(),
        RefinementKind::KWalk(4),
        &StepOptions::default(),
    )
    .unwrap();
    let oracle = naive == algebraic;
    Line::plain(
        pass && oracle,
        format!(
            "{}; window [ceil((n-6)/2), ceil(n/2)+2]; enumerated 4-walks at n=4 distinguish after {naive:?}",
            r.verdict("walk-equals-kwalk4").unwrap().detail
        ),
    )
}

fn duplicator() -> Line {
    let n = 4;
    let mut pass = true;
    let mut explained = true;
    let mut parts = Vec::new();
    for s in [Scenario::WallAdjacent, Scenario::WallNonAdjacent] {
        let r = verify_scenario(n, 4, s).expect("scenario runs");
        pass &= r.bijective && r.round_safe && r.bound_holds;
        // the only violation keeps the pendant corner and v = (1, n-2)
        let corner = grid_vertex(n, 0, n - 1);
        let v = grid_vertex(n, 1, n - 2);
        let pendant_only = r.violations.len() == 1
            && r.violations.iter().all(|b| {
                b.kept == (corner, v)
                    && b.v == v
                    && b.size == 1
                    && b.bound == 2
                    && b.size_before > n - 2
            });
        explained &= r.bijective && r.round_safe && r.bound_holds_in_strategy && pendant_only;
        parts.push(format!(
            "{s:?}: {} instances, bijective {}, round-safe {}, bound {} ({} violation(s): {:?}), bound where the strategy applies {} over {} instances",
            r.instances,
            r.bijective,
            r.round_safe,
            r.bound_holds,
            r.violations.len(),
            r.violations.first().map(|b| (b.kept, b.size, b.bound)),
            r.bound_holds_in_strategy,
            r.strategy_instances
        ));
    }
    Line {
        pass,
        detail: parts.join("; "),
        explained: pass || explained,
    }
}

fn formulas() -> Line {
    let b = EvalBudget::default();
    let mut graphs = random_corpus(40, 9, 8);
    graphs.push(SimpleGraph::new(3, [(0, 1), (1, 2)]).unwrap());
    graphs.push(SimpleGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap());
    graphs.push(SimpleGraph::new(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap());
    let mut checked = 0usize;
    let mut bad = Vec::new();
    for (gi, g) in graphs.iter().enumerate() {
        let h =
            walkref_core::refine::stabilize(g, RefinementKind::KWalk(3), &StepOptions::default())
                .unwrap();
        // the partitions themselves, recomputed by enumerating walks
        let mut ws = Workspace::single(g);
        for m in 0..h.partitions.len().min(4) {
            if m > 0 {
                ws.naive_k_walk_step(3).unwrap();
            }
            if ws.partition() != h.partitions[m] {
                bad.push(format!(
                    "graph {gi}: iteration {m} disagrees with enumeration"
                ));
            }
        }
        let mut s = Synthesizer::new(&h).unwrap();
        for m in 0..h.partitions.len().min(4) {
            let p = &h.partitions[m];
            let roots: Vec<_> = (0..p.num_classes() as u32)
                .map(|c| s.class_formula(m, c).unwrap())
                .collect();
            let mut e = Evaluator::new(s.arena(), g, b);
            for (c, &r) in roots.iter().enumerate() {
                if s.arena().depth(r) != m {
                    bad.push(format!(
                        "graph {gi}: class {c} at {m} has depth {}",
                        s.arena().depth(r)
                    ));
                }
                for u in 0..g.n() {
                    for v in 0..g.n() {
                        checked += 1;
                        if e.eval(r, u, v).unwrap() != (p.class_of_pair(0, u, v) as usize == c) {
                            bad.push(format!("graph {gi}: class {c} at {m} wrong on ({u}, {v})"));
                        }
                    }
                }
            }
        }
    }
    let (x, xt) = grid_pair(3).unwrap();
    let o = StepOptions::default();
    let sentence = synth_distinguishing_sentence(x.graph(), xt.graph(), 3, &o).unwrap();
    let dist =
        iterations_to_distinguish(x.graph(), xt.graph(), RefinementKind::KWalk(3), &o).unwrap();
    let on_x = sentence.formula.eval_sentence(x.graph(), b).unwrap();
    let on_xt = sentence.formula.eval_sentence(xt.graph(), b).unwrap();
    let sentence_ok = on_x != on_xt && Some(sentence.formula.depth()) == dist.map(|m| m + 1);
    Line::plain(
        bad.is_empty() && sentence_ok,
        format!(
            "{} graphs, {checked} (class, pair) checks, {} mismatches{}; X(G2_3) vs twisted: distinguished after {dist:?}, sentence depth {}, values {on_x}/{on_xt}, {} DAG nodes",
            graphs.len(),
            bad.len(),
            bad.first().map(|s| format!(" (first: {s})")).unwrap_or_default(),
            sentence.formula.depth(),
            sentence.formula.dag_size()
        ),
    )
}

fn wl_ceiling() -> Line {
    let mut line = verdict_line("wl-iteration-ceiling");
    let mut trend: Vec<(usize, usize)> = suite()
        .rows
        .iter()
        .filter(|r| r.kind == "wl" && r.instance.starts_with("grid"))
        .map(|r| (r.n, r.stab_iters.unwrap()))
        .collect();
    trend.sort();
    let monotone = trend.windows(2).all(|w| w[0].1 <= w[1].1);
    line.detail.push_str(&format!(
        "; 2-WL iterations on grids {trend:?}, non-decreasing: {monotone}"
    ));
    line
}

fn main() -> ExitCode {
    if let Some(f) = std::env::args().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(f.as_str()) {
            return ExitCode::SUCCESS;
        }
    }
    type Criterion = (&'static str, fn() -> Line);
    let criteria: [Criterion; 9] = [
        ("2-WL and n-walk partitions disagree until stable", remark),
        ("walk refinement stabilizes within 2|V| iterations", || {
            verdict_line("walk-2n-bound")
        }),
        (
            "algebra dimension grows at every non-stable iteration",
            dimensions,
        ),
        ("ceil(log2 k) 2-WL steps refine one k-walk step", || {
            verdict_line("simulation-lemma")
        }),
        ("algebraic k-walk step equals walk enumeration", || {
            verdict_line("oracle-equivalence")
        }),
        (
            "walk and 4-walk distinguishing counts agree and grow",
            lower_bound,
        ),
        (
            "Duplicator bijection is safe and keeps the size bound",
            duplicator,
        ),
        (
            "synthesized formulas match classes; sentence separates",
            formulas,
        ),
        ("2-WL stabilizes within 2|V| ceil(log2 |V|^2)", wl_ceiling),
    ];
    let start = Instant::now();
    let mut unexplained = Vec::new();
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let line = run();
        let tag = if line.pass { "PASS" } else { "FAIL" };
        let note = if line.pass {
            ""
        } else if line.explained {
            " [failure has the analyzed shape]"
        } else {
            " [UNEXPECTED]"
        };
        println!(
            "criterion {}: {tag} {title} ({:.1}s){note} -- {}",
            i + 1,
            t.elapsed().as_secs_f64(),
            line.detail
        );
        failed += usize::from(!line.pass);
        if !line.explained {
            unexplained.push(i + 1);
        }
    }
    println!(
        "acceptance: {} of {} criteria pass, {failed} fail, unexplained outcomes {unexplained:?}, {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if unexplained.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
