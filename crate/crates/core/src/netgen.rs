//! Random networks and evidence for experiments.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`, so a seed
//! reproduces the same network on every platform. Networks are drawn from
//! stream 0 and evidence from stream 1 of the same seed.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{BeliefNetwork, Evidence, NetworkBuilder, NetworkError, NodeId};

pub const DEFAULT_CPT_CAP: usize = 1000;
pub const DEFAULT_EVIDENCE_FRACTION: f64 = 0.25;

const EVIDENCE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    Polytree,
    Loopy { arc_ratio: f64 },
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Polytree => f.write_str("polytree"),
            Topology::Loopy { arc_ratio } => write!(f, "loopy{arc_ratio}"),
        }
    }
}

/// Parameters of one random network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub node_count: usize,
    pub topology: Topology,
    #[serde(default = "default_state_range")]
    pub state_range: (usize, usize),
    #[serde(default = "default_cpt_cap")]
    pub cpt_cap: usize,
    #[serde(default = "default_evidence_fraction")]
    pub evidence_fraction_max: f64,
    pub seed: u64,
}

fn default_state_range() -> (usize, usize) {
    (2, 4)
}

fn default_cpt_cap() -> usize {
    DEFAULT_CPT_CAP
}

fn default_evidence_fraction() -> f64 {
    DEFAULT_EVIDENCE_FRACTION
}

impl GenSpec {
    pub fn polytree(node_count: usize, seed: u64) -> Self {
        GenSpec {
            node_count,
            topology: Topology::Polytree,
            state_range: default_state_range(),
            cpt_cap: DEFAULT_CPT_CAP,
            evidence_fraction_max: DEFAULT_EVIDENCE_FRACTION,
            seed,
        }
    }

    pub fn loopy(node_count: usize, arc_ratio: f64, seed: u64) -> Self {
        GenSpec { topology: Topology::Loopy { arc_ratio }, ..GenSpec::polytree(node_count, seed) }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidSpec(m.to_string()));
        if self.node_count == 0 {
            return bad("node_count must be positive");
        }
        let (lo, hi) = self.state_range;
        if lo < 2 || hi < lo {
            return bad("state_range must satisfy 2 <= min <= max");
        }
        if self.cpt_cap < hi * hi {
            return bad("cpt_cap too small for a single parent");
        }
        if !(0.0..=1.0).contains(&self.evidence_fraction_max) {
            return bad("evidence_fraction_max must lie in [0, 1]");
        }
        if let Topology::Loopy { arc_ratio } = self.topology {
            if !arc_ratio.is_finite() || arc_ratio < 1.0 {
                return bad("arc_ratio must be at least 1");
            }
        }
        Ok(())
    }

    /// Number of arcs the generated network has.
    pub fn target_arcs(&self) -> usize {
        match self.topology {
            Topology::Polytree => self.node_count.saturating_sub(1),
            Topology::Loopy { arc_ratio } => {
                ((arc_ratio * self.node_count as f64 - 1e-9).ceil() as usize).max(self.node_count - 1)
            }
        }
    }

    /// Random evidence for `net`, drawn from this seed's evidence stream.
    pub fn evidence(&self, net: &BeliefNetwork) -> Evidence {
        let mut rng = evidence_rng(self.seed);
        sample_evidence_fraction(net, self.evidence_fraction_max, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("CPT size cap reached at {arcs} arcs, {target} requested")]
    CapReached { arcs: usize, target: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub fn network_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn evidence_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVIDENCE_STREAM);
    rng
}

/// A skewed distribution over `k` states: each entry is `m * 10^-e` with
/// `m` in 1..=10 and `e` in 1..=5, then the row is normalized.
pub fn sample_skewed_row<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    assert!(k >= 2, "a row needs at least two states");
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            let m = rng.random_range(1..=10) as f64;
            let e = rng.random_range(1..=5);
            m * 10f64.powi(-e)
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Network under construction.
struct Draft {
    states: Vec<usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    cpts: Vec<Vec<f64>>,
    cap: usize,
}

impl Draft {
    fn cpt_size(&self, v: usize) -> usize {
        self.parents[v].iter().map(|&p| self.states[p]).product::<usize>() * self.states[v]
    }

    fn fits(&self, parent: usize, child: usize) -> bool {
        self.cpt_size(child) * self.states[parent] <= self.cap
    }

    fn add_arc(&mut self, parent: usize, child: usize) {
        self.parents[child].push(parent);
        self.children[parent].push(child);
    }

    fn has_arc_either_way(&self, a: usize, b: usize) -> bool {
        self.parents[b].contains(&a) || self.parents[a].contains(&b)
    }

    /// Whether `to` is reachable from `from` along arcs.
    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(self.children[v].iter().copied());
            }
        }
        false
    }

    fn can_add(&self, parent: usize, child: usize) -> bool {
        parent != child && !self.has_arc_either_way(parent, child) && self.fits(parent, child) && !self.reaches(child, parent)
    }

    fn fill_cpt<R: Rng + ?Sized>(&mut self, v: usize, rng: &mut R) {
        let rows = self.cpt_size(v) / self.states[v];
        self.cpts[v] = (0..rows).flat_map(|_| sample_skewed_row(self.states[v], rng)).collect();
    }

    fn arc_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    fn build(self, name: String) -> Result<BeliefNetwork, GenError> {
        let mut b = NetworkBuilder::new(name);
        for (i, &k) in self.states.iter().enumerate() {
            let states: Vec<String> = (0..k).map(|s| format!("s{s}")).collect();
            b.add_node(&format!("n{i}"), &states)?;
        }
        for (i, (ps, cpt)) in self.parents.into_iter().zip(self.cpts).enumerate() {
            let ps: Vec<NodeId> = ps.into_iter().map(NodeId).collect();
            b.set_parents(NodeId(i), &ps)?;
            b.set_cpt(NodeId(i), cpt)?;
        }
        Ok(b.build()?)
    }
}

/// Edges of a uniformly random labelled tree on `n` nodes.
fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = leaves.pop_first().expect("a Prüfer sequence always leaves a leaf");
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1]));
    edges
}

fn polytree_draft<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Draft {
    let n = spec.node_count;
    let (lo, hi) = spec.state_range;
    let states: Vec<usize> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    'skeleton: loop {
        let mut d = Draft {
            states: states.clone(),
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
            cpts: vec![Vec::new(); n],
            cap: spec.cpt_cap,
        };
        for (a, b) in random_tree(n, rng) {
            let (p, c) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            if d.fits(p, c) {
                d.add_arc(p, c);
            } else if d.fits(c, p) {
                d.add_arc(c, p);
            } else {
                continue 'skeleton;
            }
        }
        for v in 0..n {
            d.fill_cpt(v, rng);
        }
        return d;
    }
}

/// A random polytree: a random labelled tree with each edge oriented by a
/// coin flip, flipped when the child's table would exceed the size cap.
pub fn gen_polytree(spec: &GenSpec) -> Result<BeliefNetwork, GenError> {
    spec.validate()?;
    let mut rng = network_rng(spec.seed);
    let d = polytree_draft(spec, &mut rng);
    d.build(network_name(spec))
}

/// The polytree for the same seed with random arcs added until the arc
/// count reaches `ceil(ratio * n)`. Arcs are added one at a time from the
/// same random stream, so a larger ratio extends a smaller one.
pub fn gen_loopy(spec: &GenSpec) -> Result<BeliefNetwork, GenError> {
    spec.validate()?;
    let mut rng = network_rng(spec.seed);
    let mut d = polytree_draft(spec, &mut rng);
    let n = spec.node_count;
    let target = spec.target_arcs();
    let max_tries = 64 * n.max(4);
    while d.arc_count() < target {
        let mut pick = None;
        for _ in 0..max_tries {
            let (p, c) = (rng.random_range(0..n), rng.random_range(0..n));
            if d.can_add(p, c) {
                pick = Some((p, c));
                break;
            }
        }
        if pick.is_none() {
            let all: Vec<(usize, usize)> =
                (0..n).flat_map(|p| (0..n).map(move |c| (p, c))).filter(|&(p, c)| d.can_add(p, c)).collect();
            if all.is_empty() {
                return Err(GenError::CapReached { arcs: d.arc_count(), target });
            }
            pick = Some(all[rng.random_range(0..all.len())]);
        }
        let (p, c) = pick.expect("set above");
        d.add_arc(p, c);
        d.fill_cpt(c, &mut rng);
    }
    d.build(network_name(spec))
}

pub fn generate(spec: &GenSpec) -> Result<BeliefNetwork, GenError> {
    match spec.topology {
        Topology::Polytree => gen_polytree(spec),
        Topology::Loopy { .. } => gen_loopy(spec),
    }
}

fn network_name(spec: &GenSpec) -> String {
    format!("{}-n{}-s{}", spec.topology, spec.node_count, spec.seed)
}

/// Evidence on a uniform number in `[0, n/4]` of distinct random nodes,
/// each in a uniform state.
pub fn sample_evidence<R: Rng + ?Sized>(net: &BeliefNetwork, rng: &mut R) -> Evidence {
    sample_evidence_fraction(net, DEFAULT_EVIDENCE_FRACTION, rng)
}

pub fn sample_evidence_fraction<R: Rng + ?Sized>(net: &BeliefNetwork, fraction: f64, rng: &mut R) -> Evidence {
    let n = net.len();
    let max = ((n as f64 * fraction) + 1e-9).floor() as usize;
    let count = rng.random_range(0..=max.min(n));
    index::sample(rng, n, count)
        .into_iter()
        .map(|i| {
            let id = NodeId(i);
            (id, rng.random_range(0..net.state_count(id)))
        })
        .collect()
}
