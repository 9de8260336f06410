use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use walkref_core::cfi::{build_cfi, default_twist, grid_base};
use walkref_core::experiment::{
    run_lower_bound, run_property_suite, run_remark_disagreement, ExperimentConfig,
    ExperimentReport, ReportRow, SuiteSpec, VERSION,
};
use walkref_core::game::{verify_scenario, Scenario};
use walkref_core::logic::{synth_distinguishing_sentence, EvalBudget};
use walkref_core::refine::{dimension_chain, iterations_to_distinguish, stabilize};
use walkref_core::{ArithMode, Error, RefinementKind, SimpleGraph};

#[derive(Parser)]
#[command(name = "walkref", version, about = "Walk refinement experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Arithmetic for span computations.
    #[arg(long, global = true, default_value = "prime2")]
    arith: ArithMode,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report 0 ms everywhere so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timings: bool,
    /// Per-instance time limit in seconds, 0 for none.
    #[arg(long, global = true, default_value_t = 300)]
    timeout: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    WallAdjacent,
    WallNonadjacent,
    Opening,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::WallAdjacent => Scenario::WallAdjacent,
            ScenarioArg::WallNonadjacent => Scenario::WallNonAdjacent,
            ScenarioArg::Opening => Scenario::Opening,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid CFI graph (with its origin map) or a random graph.
    Gen {
        /// Columns of the grid base graph.
        #[arg(long, conflicts_with_all = ["gnp", "p"], required_unless_present = "gnp")]
        grid: Option<usize>,
        /// Twist the grid graph at its first base edge.
        #[arg(long, requires = "grid")]
        twist: bool,
        /// Order of a G(n, p) graph.
        #[arg(long)]
        gnp: Option<usize>,
        #[arg(long, default_value_t = 0.5, requires = "gnp")]
        p: f64,
    },
    /// Refine one graph to stability.
    Refine {
        #[arg(long)]
        graph: PathBuf,
        /// wl, walk or kwalk:K
        #[arg(long, default_value = "walk")]
        kind: RefinementKind,
    },
    /// Iterations until two graphs get different color multisets.
    Distinguish {
        #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
        graphs: Vec<PathBuf>,
        #[arg(long, default_value = "walk")]
        kind: RefinementKind,
    },
    /// Algebra dimensions along walk refinement.
    Dims {
        #[arg(long)]
        graph: PathBuf,
    },
    /// WL against n-walk partitions on the grid CFI graphs.
    Remark {
        #[arg(long, default_value_t = 2)]
        min: usize,
        #[arg(long, default_value_t = 10)]
        max: usize,
    },
    /// Distinguishing counts on the twisted grid pairs.
    LowerBound {
        #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
        ns: Vec<usize>,
    },
    /// A sentence true on the first graph and false on the second.
    Formula {
        #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
        graphs: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Exhaustive check of the Duplicator bijection on a grid.
    VerifyDuplicator {
        #[arg(long)]
        grid: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
    },
    /// Seeded property checks over random graphs and grids.
    Suite {
        /// Quick smoke configuration.
        #[arg(long)]
        small: bool,
        /// Random graphs per corpus.
        #[arg(long)]
        random: Option<usize>,
        /// Largest random graph order.
        #[arg(long)]
        max_n: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGraph(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Parse { .. }
            | Error::GridTooSmall(_)
            | Error::WalkLength(_)
            | Error::Precondition(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

// only our own values are converted, so this is never bad input
impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

struct Output {
    text: String,
    passed: bool,
}

fn load(path: &Path) -> Result<SimpleGraph, Failure> {
    let s =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    SimpleGraph::from_json(&s).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn json_only(g: &Global, command: &str) -> Result<(), Failure> {
    if g.format == Format::Csv {
        return Err(Failure::Usage(format!("{command} has no csv output")));
    }
    Ok(())
}

fn report(r: ExperimentReport, format: Format) -> Result<Output, Failure> {
    let text = match format {
        Format::Json => r.to_json()?,
        Format::Csv => r.to_csv()?,
    };
    Ok(Output {
        passed: r.passed(),
        text,
    })
}

/// Wraps single-instance results so they share the report formats.
fn single_row(
    experiment: &str,
    cfg: &ExperimentConfig,
    row: ReportRow,
    extra: Value,
    format: Format,
) -> Result<Output, Failure> {
    if format == Format::Csv {
        let r = ExperimentReport {
            experiment: experiment.into(),
            version: VERSION.into(),
            arith: cfg.arith,
            seed: cfg.seed,
            config: Default::default(),
            rows: vec![row],
            verdicts: Vec::new(),
        };
        return report(r, format);
    }
    Ok(Output {
        text: pretty(&extra),
        passed: true,
    })
}

fn row(
    cfg: &ExperimentConfig,
    n: usize,
    kind: RefinementKind,
    instance: String,
    ms: u64,
) -> ReportRow {
    ReportRow {
        n,
        kind: kind.name().into(),
        k: kind.k(),
        stab_iters: None,
        dist_iters: None,
        dim_first: None,
        dim_last: None,
        ms,
        instance,
        version: VERSION.into(),
        arith: cfg.arith,
    }
}

fn run(cli: Cli) -> Result<Output, Failure> {
    let g = &cli.global;
    let cfg = ExperimentConfig {
        arith: g.arith,
        seed: g.seed,
        timings: !g.no_timings,
        instance_timeout: (g.timeout > 0).then(|| Duration::from_secs(g.timeout)),
    };
    let ms = |t: Instant| {
        if cfg.timings {
            t.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    match cli.command {
        Command::Gen {
            grid,
            twist,
            gnp,
            p,
        } => {
            json_only(g, "gen")?;
            let text = if let Some(n) = grid {
                let base = grid_base(n)?;
                let x = build_cfi(&base, twist.then(|| default_twist(&base)))?;
                let mut v: Value = serde_json::from_str(&x.graph().to_json())?;
                let side: Value = serde_json::from_str(&x.sidecar_json())?;
                v.as_object_mut()
                    .expect("graph object")
                    .extend(side.as_object().expect("sidecar object").clone());
                v.to_string()
            } else {
                let n = gnp.expect("clap requires grid or gnp");
                if !(0.0..=1.0).contains(&p) {
                    return Err(Failure::Usage(format!(
                        "edge probability {p} is not in [0, 1]"
                    )));
                }
                SimpleGraph::gnp(n, p, &mut ChaCha8Rng::seed_from_u64(g.seed)).to_json()
            };
            Ok(Output { text, passed: true })
        }
        Command::Refine { graph, kind } => {
            let x = load(&graph)?;
            let t = Instant::now();
            let h = stabilize(&x, kind, &cfg.options())?;
            let mut r = row(&cfg, x.n(), kind, name(&graph), ms(t));
            r.stab_iters = Some(h.stabilization_index());
            r.dim_first = h.dims.first().copied();
            r.dim_last = h.dims.last().copied();
            single_row(
                "refine",
                &cfg,
                r,
                serde_json::to_value(h.report())?,
                g.format,
            )
        }
        Command::Distinguish { graphs, kind } => {
            let (a, b) = (load(&graphs[0])?, load(&graphs[1])?);
            let t = Instant::now();
            let d = iterations_to_distinguish(&a, &b, kind, &cfg.options())?;
            let mut r = row(
                &cfg,
                a.n(),
                kind,
                format!("{}-{}", name(&graphs[0]), name(&graphs[1])),
                ms(t),
            );
            r.dist_iters = d;
            let extra = json!({
                "kind": kind.name(),
                "k": kind.k(),
                "distinguished_at": d,
            });
            single_row("distinguish", &cfg, r, extra, g.format)
        }
        Command::Dims { graph } => {
            let x = load(&graph)?;
            let t = Instant::now();
            let c = dimension_chain(&x, &cfg.options())?;
            let mut r = row(&cfg, x.n(), RefinementKind::Walk, name(&graph), ms(t));
            r.stab_iters = Some(c.iterations);
            r.dim_first = c.dims.first().copied();
            r.dim_last = c.dims.last().copied();
            single_row("dims", &cfg, r, serde_json::to_value(&c)?, g.format)
        }
        Command::Remark { min, max } => {
            if min > max {
                return Err(Failure::Usage(format!("empty range {min}..{max}")));
            }
            let ns: Vec<usize> = (min..=max).collect();
            report(run_remark_disagreement(&ns, &cfg)?, g.format)
        }
        Command::LowerBound { ns } => {
            if ns.is_empty() || ns.iter().any(|&n| n < 3) {
                return Err(Failure::Usage("grid sizes must be at least 3".into()));
            }
            report(run_lower_bound(&ns, &cfg)?, g.format)
        }
        Command::Formula { graphs, k } => {
            json_only(g, "formula")?;
            let (a, b) = (load(&graphs[0])?, load(&graphs[1])?);
            if k < 3 {
                return Err(Failure::Usage(format!("sentences need k >= 3, got {k}")));
            }
            let s = synth_distinguishing_sentence(&a, &b, k, &cfg.options())?;
            let budget = EvalBudget::default();
            let holds = [
                s.formula.eval_sentence(&a, budget)?,
                s.formula.eval_sentence(&b, budget)?,
            ];
            let v = json!({
                "sentence": s.formula.to_sexpr(),
                "depth": s.formula.depth(),
                "iteration": s.iteration,
                "dag_size": s.formula.dag_size(),
                "holds": holds,
            });
            Ok(Output {
                text: pretty(&v),
                passed: holds[0] != holds[1],
            })
        }
        Command::VerifyDuplicator { grid, k, scenario } => {
            json_only(g, "verify-duplicator")?;
            let r = verify_scenario(grid, k, scenario.into())?;
            let passed = r.bijective
                && r.round_safe
                && r.bound_holds
                && r.opening_bound_holds != Some(false);
            let mut v = serde_json::to_value(&r)?;
            v["passed"] = json!(passed);
            Ok(Output {
                text: pretty(&v),
                passed,
            })
        }
        Command::Suite {
            small,
            random,
            max_n,
        } => {
            let mut spec = if small {
                SuiteSpec::small()
            } else {
                SuiteSpec::default()
            };
            if let Some(r) = random {
                spec.random = r;
            }
            if let Some(m) = max_n {
                spec.max_n = m;
                spec.simulation_max_n = spec.simulation_max_n.min(m);
                spec.oracle_max_n = spec.oracle_max_n.min(m);
                spec.rational_max_n = spec.rational_max_n.min(m);
            }
            report(run_property_suite(&spec, &cfg)?, g.format)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.global.out.clone();
    match run(cli) {
        Ok(o) => {
            let mut text = o.text;
            if !text.ends_with('\n') {
                text.push('\n');
            }
            match out {
                Some(p) => {
                    if let Err(e) = fs::write(&p, text) {
                        eprintln!("error: {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions() {
        Cli::command().debug_assert();
    }

    #[test]
    fn globals_after_subcommand() {
        let cli = Cli::try_parse_from(["walkref", "remark", "--arith", "rational", "--seed", "3"])
            .unwrap();
        assert_eq!(cli.global.arith, ArithMode::Rational);
        assert_eq!(cli.global.seed, 3);
        assert!(Cli::try_parse_from(["walkref", "gen", "--grid", "3", "--gnp", "4"]).is_err());
    }
}
