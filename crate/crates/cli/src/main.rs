use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lpe_core::bench::{parse_suite, run_bench_streaming, write_csv, write_jsonl, Suite};
use lpe_core::engine::{Budget, Direction, Engine, EngineConfig, StopCriterion, Strategy, DEFAULT_DELAY};
use lpe_core::interval::IntervalVector;
use lpe_core::netgen::{generate, GenSpec};
use lpe_core::network::{is_polytree, parse_network, serialize_network, BeliefNetwork, Evidence, NodeId};
use lpe_core::oracle::{enumerate_marginal, polytree_exact};

/// Anytime interval inference on belief networks.
#[derive(Parser)]
#[command(name = "lpe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Polytree,
    Loopy,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Bfs,
    NoLoops,
    Delayed,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random network.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long, value_enum, default_value = "polytree")]
        topology: TopologyArg,
        /// Arcs per node for loopy networks.
        #[arg(long, default_value_t = 1.1)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write random evidence drawn from the same seed.
        #[arg(long)]
        with_evidence: bool,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound the belief of one node, refining until the stop rule holds.
    Query {
        file: PathBuf,
        #[arg(long)]
        node: String,
        /// Observation `NODE=STATE`; may be repeated.
        #[arg(long = "evidence", value_name = "NODE=STATE")]
        evidence: Vec<String>,
        #[arg(long, value_enum, default_value = "bfs")]
        strategy: StrategyArg,
        /// Rounds a cycle-closing arc waits under the delayed strategy.
        #[arg(long, default_value_t = DEFAULT_DELAY)]
        delay: usize,
        /// Stop once every state's interval is at most this wide.
        #[arg(long, conflicts_with = "threshold")]
        target_width: Option<f64>,
        /// Stop once `NODE:STATE>P` (or `<`) is decided.
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        budget_ms: Option<u64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Exact marginal by enumeration, and by polytree propagation when the
    /// network is singly connected.
    Exact {
        file: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long = "evidence", value_name = "NODE=STATE")]
        evidence: Vec<String>,
    },
    /// Run a benchmark suite.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        /// JSON lines output.
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV table next to the output, with extension `.csv`.
        #[arg(long)]
        csv: bool,
    },
}

fn load(path: &Path) -> Result<BeliefNetwork> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_network(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Evidence from the file, overridden by command-line observations.
fn evidence(net: &BeliefNetwork, args: &[String]) -> Result<Evidence> {
    let mut ev = net.evidence().clone();
    for a in args {
        let (node, state) = a.split_once('=').with_context(|| format!("evidence `{a}` is not NODE=STATE"))?;
        let (id, s) = net.observation(node, state)?;
        ev.observe(id, s);
    }
    Ok(ev)
}

fn parse_threshold(net: &BeliefNetwork, query: NodeId, spec: &str) -> Result<StopCriterion> {
    let (lhs, direction, p) = if let Some((l, p)) = spec.split_once('>') {
        (l, Direction::Greater, p)
    } else if let Some((l, p)) = spec.split_once('<') {
        (l, Direction::Less, p)
    } else {
        bail!("threshold `{spec}` is not NODE:STATE>P or NODE:STATE<P");
    };
    let (node, state) = lhs.split_once(':').with_context(|| format!("threshold `{spec}` lacks NODE:STATE"))?;
    let (id, state) = net.observation(node.trim(), state.trim())?;
    if id != query {
        bail!("threshold node `{node}` is not the query node");
    }
    let p: f64 = p.trim().parse().with_context(|| format!("invalid probability in `{spec}`"))?;
    if !(0.0..=1.0).contains(&p) {
        bail!("threshold probability {p} is outside [0, 1]");
    }
    Ok(StopCriterion::Threshold { state, direction, p })
}

fn render(net: &BeliefNetwork, q: NodeId, bel: &IntervalVector) -> String {
    let states = net.node(q).states();
    bel.iter()
        .zip(states)
        .map(|(iv, s)| format!("{s}=[{:.9}, {:.9}]", iv.lo(), iv.hi()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

#[allow(clippy::too_many_arguments)]
fn query(
    file: &Path,
    node: &str,
    ev_args: &[String],
    strategy: StrategyArg,
    delay: usize,
    target_width: Option<f64>,
    threshold: Option<&str>,
    budget_ms: Option<u64>,
    max_iterations: Option<usize>,
) -> Result<ExitCode> {
    let net = load(file)?;
    let q = net.require_id(node)?;
    let ev = evidence(&net, ev_args)?;
    let stop = match (target_width, threshold) {
        (_, Some(t)) => parse_threshold(&net, q, t)?,
        (Some(w), None) if (0.0..=1.0).contains(&w) => StopCriterion::TargetWidth(w),
        (Some(w), None) => bail!("target width {w} is outside [0, 1]"),
        (None, None) => StopCriterion::TargetWidth(0.0),
    };
    let strategy = match strategy {
        StrategyArg::Bfs => Strategy::BreadthFirst,
        StrategyArg::NoLoops => Strategy::NoLoops,
        StrategyArg::Delayed => Strategy::DelayedLoops(delay),
    };
    let budget = Budget { time: budget_ms.map(Duration::from_millis), max_iterations };
    let r = Engine::new(&net, q, ev, EngineConfig::default())?.run(strategy, stop, budget)?;

    let mut out = io::stdout().lock();
    for (i, bel) in r.history.iter().enumerate() {
        writeln!(out, "iteration {} active {} width {:.9} {}", i + 1, r.active_nodes[i], r.widths[i], render(&net, q, bel))?;
    }
    writeln!(out, "status {} iterations {} active {} node_visits {}", r.status, r.iterations, r.final_active.len(), r.node_visits)?;
    if let (StopCriterion::Threshold { state, direction, p }, Some(v)) = (stop, r.verdict) {
        let op = if direction == Direction::Greater { '>' } else { '<' };
        writeln!(out, "verdict P({node}={}) {op} {p} is {v}", net.node(q).states()[state])?;
    }
    Ok(ExitCode::from(r.status.exit_code() as u8))
}

fn exact(file: &Path, node: &str, ev_args: &[String]) -> Result<()> {
    let net = load(file)?;
    let q = net.require_id(node)?;
    let ev = evidence(&net, ev_args)?;
    let states = net.node(q).states();
    let show = |m: &[f64]| m.iter().zip(states).map(|(p, s)| format!("{s}={p:.12}")).collect::<Vec<_>>().join(" ");
    println!("enumeration {}", show(&enumerate_marginal(&net, &ev, q)?));
    if is_polytree(&net) {
        println!("polytree {}", show(&polytree_exact(&net, &ev, q)?));
    }
    Ok(())
}

fn bench(suite: &Path, out: &Path, csv: bool) -> Result<()> {
    let text = fs::read_to_string(suite).with_context(|| format!("reading {}", suite.display()))?;
    let suite: Suite = parse_suite(&text).with_context(|| format!("parsing {}", suite.display()))?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let records = run_bench_streaming(&suite, |r| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if n.is_multiple_of(100) {
            eprintln!("{n} records, latest {}", r.id);
        }
    })?;
    write_jsonl(BufWriter::new(File::create(out)?), &records)?;
    if csv {
        write_csv(BufWriter::new(File::create(out.with_extension("csv"))?), &records)?;
    }
    eprintln!("{} records written to {}", records.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { nodes, topology, ratio, seed, with_evidence, out } => {
            let spec = match topology {
                TopologyArg::Polytree => GenSpec::polytree(nodes, seed),
                TopologyArg::Loopy => GenSpec::loopy(nodes, ratio, seed),
            };
            let mut net = generate(&spec)?;
            if with_evidence {
                net = net.with_evidence(spec.evidence(&net))?;
            }
            write_output(out.as_deref(), &serialize_network(&net))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Query { file, node, evidence, strategy, delay, target_width, threshold, budget_ms, max_iterations } => {
            query(&file, &node, &evidence, strategy, delay, target_width, threshold.as_deref(), budget_ms, max_iterations)
        }
        Command::Exact { file, node, evidence } => exact(&file, &node, &evidence).map(|_| ExitCode::SUCCESS),
        Command::Bench { suite, out, csv } => bench(&suite, &out, csv).map(|_| ExitCode::SUCCESS),
    }
}

/// Propagation recurses along the active graph, so long chains need a
/// deep stack.
const STACK: usize = 1 << 30;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let worker = std::thread::Builder::new().stack_size(STACK).spawn(move || run(cli));
    match worker.map_err(anyhow::Error::from).and_then(|h| h.join().unwrap_or_else(|_| bail!("worker panicked"))) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
