//! Benchmark harness: random networks, random queries, one record per
//! (network, query, strategy, target width).

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ActiveSet, Budget, Engine, EngineConfig, QueryStatus, StopCriterion, Strategy};
use crate::netgen::{generate, GenError, GenSpec, Topology};
use crate::network::{is_polytree, BeliefNetwork, Evidence, NodeId};
use crate::oracle::polytree_exact;

pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
pub const DEFAULT_QUERIES: usize = 15;

const QUERY_STREAM: u64 = 2;
/// Propagation recurses along the active graph; deep networks need room.
const WORKER_STACK: usize = 256 << 20;

/// A family of networks: every node count crossed with `seed_count`
/// consecutive seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub node_counts: Vec<usize>,
    pub topology: Topology,
    #[serde(default)]
    pub first_seed: u64,
    pub seed_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    #[serde(default)]
    pub networks: Vec<GenSpec>,
    #[serde(default)]
    pub grids: Vec<Grid>,
    #[serde(default = "default_queries")]
    pub queries_per_network: usize,
    pub strategies: Vec<Strategy>,
    pub target_widths: Vec<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_true")]
    pub baseline: bool,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_queries() -> usize {
    DEFAULT_QUERIES
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_true() -> bool {
    true
}

impl Suite {
    /// Every network spec, grids expanded, in a fixed order.
    pub fn specs(&self) -> Vec<GenSpec> {
        let mut out = self.networks.clone();
        for g in &self.grids {
            for &n in &g.node_counts {
                for seed in g.first_seed..g.first_seed + g.seed_count {
                    let base = GenSpec::polytree(n, seed);
                    out.push(GenSpec { topology: g.topology, ..base });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidSuite(m.to_string()));
        if self.strategies.is_empty() {
            return bad("no strategies");
        }
        if self.target_widths.is_empty() {
            return bad("no target widths");
        }
        if self.target_widths.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return bad("target widths must lie in [0, 1]");
        }
        if self.queries_per_network == 0 {
            return bad("queries_per_network must be positive");
        }
        for s in self.specs() {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    /// Stable identifier, unique within a run.
    pub id: String,
    pub network: String,
    pub seed: u64,
    pub nodes: usize,
    pub arcs: usize,
    pub evidence: usize,
    pub query: String,
    pub strategy: String,
    pub target_width: f64,
    /// `satisfied`, `saturated`, `budget_exhausted` or `error`.
    pub status: String,
    pub width: Option<f64>,
    pub iterations: usize,
    pub active_nodes: usize,
    pub node_visits: u64,
    pub wall_ms: f64,
    /// `polytree_exact` or `full_conditioning`.
    pub baseline: Option<String>,
    pub baseline_ms: Option<f64>,
    pub error: Option<String>,
}

impl BenchRecord {
    fn key(&self) -> (&str, &str, &str, u64) {
        (&self.network, &self.query, &self.strategy, self.target_width.to_bits())
    }
}

/// Query nodes for a network: distinct, uniform, at most `count`.
pub fn sample_queries(net: &BeliefNetwork, seed: u64, count: usize) -> Vec<NodeId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(QUERY_STREAM);
    index::sample(&mut rng, net.len(), count.min(net.len())).into_iter().map(NodeId).collect()
}

struct Baseline {
    kind: &'static str,
    ms: Option<f64>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn baseline(net: &BeliefNetwork, evidence: &Evidence, q: NodeId) -> Baseline {
    let t = Instant::now();
    if is_polytree(net) {
        let ok = polytree_exact(net, evidence, q).is_ok();
        return Baseline { kind: "polytree_exact", ms: ok.then(|| ms(t.elapsed())) };
    }
    let full = ActiveSet::from_parts(q, net.ids(), net.arcs());
    let ok = Engine::new(net, q, evidence.clone(), EngineConfig { parallel: false, ..EngineConfig::default() })
        .and_then(|mut e| e.propagate(&full))
        .is_ok();
    Baseline { kind: "full_conditioning", ms: ok.then(|| ms(t.elapsed())) }
}

struct Pair<'a> {
    spec: &'a GenSpec,
    net: &'a BeliefNetwork,
    evidence: &'a Evidence,
    query: NodeId,
}

fn run_pair(suite: &Suite, p: &Pair<'_>) -> Vec<BenchRecord> {
    let base = suite.baseline.then(|| baseline(p.net, p.evidence, p.query));
    let budget = Budget::with_time(Duration::from_millis(suite.timeout_ms));
    let config = EngineConfig { parallel: false, ..EngineConfig::default() };
    let mut out = Vec::new();
    for &strategy in &suite.strategies {
        for &target in &suite.target_widths {
            let query = p.net.node(p.query).name().to_string();
            let mut rec = BenchRecord {
                id: format!("{}/{}/{}/{}", p.net.name(), query, strategy, target),
                network: p.net.name().to_string(),
                seed: p.spec.seed,
                nodes: p.net.len(),
                arcs: p.net.arc_count(),
                evidence: p.evidence.len(),
                query,
                strategy: strategy.name(),
                target_width: target,
                status: String::new(),
                width: None,
                iterations: 0,
                active_nodes: 0,
                node_visits: 0,
                wall_ms: 0.0,
                baseline: base.as_ref().map(|b| b.kind.to_string()),
                baseline_ms: base.as_ref().and_then(|b| b.ms),
                error: None,
            };
            let t = Instant::now();
            let result = Engine::new(p.net, p.query, p.evidence.clone(), config)
                .and_then(|mut e| e.run(strategy, StopCriterion::TargetWidth(target), budget));
            rec.wall_ms = ms(t.elapsed());
            match result {
                Ok(r) => {
                    rec.status = r.status.to_string();
                    rec.width = Some(r.width());
                    rec.iterations = r.iterations;
                    rec.active_nodes = r.final_active.len();
                    rec.node_visits = r.node_visits;
                }
                Err(e) => {
                    rec.status = "error".into();
                    rec.error = Some(e.to_string());
                }
            }
            out.push(rec);
        }
    }
    out
}

/// Runs every (network, query) pair, in parallel across pairs, and returns
/// the records sorted by network order, then query, strategy and target.
/// `on_record` sees each record as soon as its pair completes.
pub fn run_bench_streaming(
    suite: &Suite,
    on_record: impl Fn(&BenchRecord) + Sync,
) -> Result<Vec<BenchRecord>, BenchError> {
    suite.validate()?;
    let specs = suite.specs();
    let nets = specs.iter().map(generate).collect::<Result<Vec<_>, _>>()?;
    let evidence: Vec<Evidence> = specs.iter().zip(&nets).map(|(s, n)| s.evidence(n)).collect();
    let pairs: Vec<Pair<'_>> = specs
        .iter()
        .zip(&nets)
        .zip(&evidence)
        .flat_map(|((spec, net), evidence)| {
            sample_queries(net, spec.seed, suite.queries_per_network)
                .into_iter()
                .map(move |query| Pair { spec, net, evidence, query })
        })
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new().stack_size(WORKER_STACK);
    if let Some(t) = suite.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| BenchError::Pool(e.to_string()))?;
    let mut records: Vec<(usize, BenchRecord)> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, p)| {
                let recs = run_pair(suite, p);
                recs.iter().for_each(&on_record);
                recs.into_iter().enumerate().map(move |(j, r)| (i * 1_000_000 + j, r))
            })
            .collect()
    });
    records.sort_by_key(|(k, _)| *k);
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn run_bench(suite: &Suite) -> Result<Vec<BenchRecord>, BenchError> {
    run_bench_streaming(suite, |_| {})
}

pub fn parse_suite(json: &str) -> Result<Suite, BenchError> {
    let suite: Suite = serde_json::from_str(json)?;
    suite.validate()?;
    Ok(suite)
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(mut w: W, records: &[BenchRecord]) -> Result<(), BenchError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(w: W, records: &[BenchRecord]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Whether two runs agree on everything except wall times.
pub fn same_outcomes(a: &[BenchRecord], b: &[BenchRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.key() == y.key()
                && (&x.id, x.seed, x.nodes, x.arcs, x.evidence, &x.status, x.iterations, x.active_nodes, x.node_visits)
                    == (&y.id, y.seed, y.nodes, y.arcs, y.evidence, &y.status, y.iterations, y.active_nodes, y.node_visits)
                && x.width.map(f64::to_bits) == y.width.map(f64::to_bits)
                && x.baseline == y.baseline
                && x.error == y.error
        })
}

pub fn status_is_final(status: &str) -> bool {
    [QueryStatus::Satisfied, QueryStatus::Saturated, QueryStatus::BudgetExhausted]
        .iter()
        .any(|s| s.to_string() == status)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suite(json: &str) -> Suite {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn grids_expand_in_order() {
        let s = suite(
            r#"{"grids":[{"node_counts":[5,6],"topology":{"kind":"polytree"},"seed_count":2}],
                "strategies":["bfs"],"target_widths":[0.5]}"#,
        );
        let specs = s.specs();
        assert_eq!(specs.len(), 4);
        assert_eq!((specs[1].node_count, specs[1].seed), (5, 1));
        assert_eq!((specs[2].node_count, specs[2].seed), (6, 0));
        assert_eq!(s.queries_per_network, DEFAULT_QUERIES);
        assert_eq!(s.timeout_ms, DEFAULT_TIMEOUT_MS);
    }

    #[test]
    fn polytree_targets_are_met() {
        let s = suite(
            r#"{"grids":[{"node_counts":[20,40],"topology":{"kind":"polytree"},"seed_count":3}],
                "queries_per_network":5,"strategies":["bfs","no-loops"],"target_widths":[0.5,0.1]}"#,
        );
        let recs = run_bench(&s).unwrap();
        assert_eq!(recs.len(), 6 * 5 * 4);
        for r in &recs {
            assert_eq!(r.status, "satisfied", "{}", r.id);
            assert!(r.width.unwrap() <= r.target_width);
            assert_eq!(r.baseline.as_deref(), Some("polytree_exact"));
        }
        let ids: std::collections::BTreeSet<_> = recs.iter().map(|r| &r.id).collect();
        assert_eq!(ids.len(), recs.len());
    }

    #[test]
    fn no_loops_to_zero_saturates_on_loopy_networks() {
        let s = suite(
            r#"{"grids":[{"node_counts":[15],"topology":{"kind":"loopy","arc_ratio":1.3},"seed_count":3}],
                "queries_per_network":4,"strategies":["no-loops"],"target_widths":[0.0]}"#,
        );
        let recs = run_bench(&s).unwrap();
        assert!(recs.iter().all(|r| r.status == "saturated" || r.width == Some(0.0)));
        assert!(recs.iter().any(|r| r.status == "saturated" && r.width.unwrap() > 0.0));
        assert!(recs.iter().all(|r| r.baseline.as_deref() == Some("full_conditioning")));
    }

    #[test]
    fn reruns_agree_except_for_timing() {
        let s = suite(
            r#"{"grids":[{"node_counts":[12],"topology":{"kind":"loopy","arc_ratio":1.1},"seed_count":3}],
                "queries_per_network":3,"strategies":["bfs","delayed-2"],"target_widths":[0.1],"threads":3}"#,
        );
        let a = run_bench(&s).unwrap();
        let b = run_bench(&s).unwrap();
        assert!(same_outcomes(&a, &b));
        assert!(a.iter().all(|r| status_is_final(&r.status)));
    }

    #[test]
    fn records_export_as_jsonl_and_csv() {
        let s = suite(
            r#"{"networks":[{"node_count":6,"topology":{"kind":"polytree"},"seed":2}],
                "queries_per_network":2,"strategies":["bfs"],"target_widths":[0.5],"baseline":false}"#,
        );
        let recs = run_bench(&s).unwrap();
        let mut json = Vec::new();
        write_jsonl(&mut json, &recs).unwrap();
        let lines: Vec<BenchRecord> =
            String::from_utf8(json).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines, recs);
        let mut csv_out = Vec::new();
        write_csv(&mut csv_out, &recs).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("id,network,seed,"));
        assert_eq!(text.lines().count(), 1 + recs.len());
    }

    #[test]
    fn bad_suites_are_rejected() {
        let s = suite(r#"{"strategies":[],"target_widths":[0.5]}"#);
        assert!(matches!(run_bench(&s), Err(BenchError::InvalidSuite(_))));
        let s = suite(r#"{"strategies":["bfs"],"target_widths":[1.5]}"#);
        assert!(s.validate().is_err());
    }

    #[test]
    fn queries_are_distinct_and_reproducible() {
        let net = generate(&GenSpec::polytree(30, 1)).unwrap();
        let q = sample_queries(&net, 1, 15);
        assert_eq!(q, sample_queries(&net, 1, 15));
        let set: std::collections::BTreeSet<_> = q.iter().collect();
        assert_eq!(set.len(), 15);
        assert_eq!(sample_queries(&net, 1, 100).len(), 30);
    }
}
