//! Multiply-connected parts of the active set.
//!
//! A knot of the active graph is evaluated by conditioning on a loop
//! cutset. Each instance of the cutset leaves a forest, propagated with
//! messages that carry their mass separately from their normalized shape so
//! the instance probabilities come out of the same pass. The instance
//! results are mixed with A/R against the normalized instance masses.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::engine::messages::{Local, Output, Scaled};
use crate::engine::{ActiveSet, Engine, EngineConfig, EngineError};
use crate::interval::{ar_dot_slices, Interval, IntervalError, IntervalVector};
use crate::network::{find_knots_in, Arc, BeliefNetwork, Evidence, Knot, KnotDecomposition, NodeId, Odometer};

/// Default limit on the number of cutset instances per knot.
pub const DEFAULT_INSTANCE_CAP: usize = 1 << 16;

/// Instances at or above this count are evaluated in parallel.
const PARALLEL_THRESHOLD: usize = 16;

/// One instance of a cutset and its interval-valued probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CutsetAssignment {
    pub cutset: Vec<NodeId>,
    pub instance: Vec<usize>,
    pub weight: Interval,
}

/// Per-instance conditional results and weights of one conditioning run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningTable {
    pub cutset: Vec<NodeId>,
    pub entries: Vec<(IntervalVector, CutsetAssignment)>,
}

impl ConditioningTable {
    /// The instance weights as one interval vector.
    pub fn weights(&self) -> Option<IntervalVector> {
        IntervalVector::new(self.entries.iter().map(|(_, a)| a.weight).collect()).ok()
    }
}

/// Splits the network's knots into those whose nodes and arcs all lie in
/// the active set and those that are only partly covered. Knots with no
/// active node are in neither list.
pub fn contained_knots(knots: &KnotDecomposition, active: &ActiveSet) -> (Vec<Knot>, Vec<Knot>) {
    let mut whole = Vec::new();
    let mut partial = Vec::new();
    for k in &knots.knots {
        let nodes_in = k.nodes.iter().filter(|n| active.contains(**n)).count();
        if nodes_in == 0 {
            continue;
        }
        if nodes_in == k.nodes.len() && k.arcs.iter().all(|a| active.has_arc(*a)) {
            whole.push(k.clone());
        } else {
            partial.push(k.clone());
        }
    }
    (whole, partial)
}

/// A loop cutset for `knot`: instantiating these nodes (cutting their
/// outgoing arcs inside the knot) leaves the knot's skeleton acyclic.
///
/// Greedy: repeatedly take the node of highest degree among the arcs still
/// on a cycle, lowest index first on ties, among nodes with an outgoing arc
/// on a cycle.
pub fn select_cutset(knot: &Knot) -> Vec<NodeId> {
    select_cutset_with(knot, &Evidence::new())
}

/// Like [`select_cutset`], but observed nodes are taken first since they
/// add no instances.
pub(crate) fn select_cutset_with(knot: &Knot, evidence: &Evidence) -> Vec<NodeId> {
    let mut remaining: Vec<Arc> = knot.arcs.iter().copied().collect();
    let mut cutset = Vec::new();
    loop {
        let cyclic: Vec<Arc> = find_knots_in(&remaining).knots.into_iter().flat_map(|k| k.arcs).collect();
        if cyclic.is_empty() {
            return cutset;
        }
        let mut degree: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut has_out: BTreeSet<NodeId> = BTreeSet::new();
        for a in &cyclic {
            *degree.entry(a.parent).or_default() += 1;
            *degree.entry(a.child).or_default() += 1;
            has_out.insert(a.parent);
        }
        let pick = has_out
            .iter()
            .copied()
            .max_by(|a, b| {
                let key = |n: &NodeId| (evidence.contains(*n), degree[n]);
                key(a).cmp(&key(b)).then(b.cmp(a))
            })
            .expect("a cyclic arc set has a parent node");
        cutset.push(pick);
        remaining.retain(|a| a.parent != pick);
    }
}

/// Information arriving at a knot node from outside the conditioned forest.
#[derive(Debug, Clone)]
pub(crate) enum Boundary {
    /// Nothing known about the message.
    Vacuous,
    /// A constant λ: skipped.
    Uniform,
    Msg(IntervalVector),
}

/// What a conditioning run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnotTarget {
    /// Belief of a node inside the knot.
    Bel(NodeId),
    /// The message over the bridge arc leaving the knot at `from`.
    Exit { from: NodeId, to: NodeId },
}

impl KnotTarget {
    fn anchor(&self) -> NodeId {
        match self {
            KnotTarget::Bel(n) => *n,
            KnotTarget::Exit { from, .. } => *from,
        }
    }
}

pub(crate) struct KnotProblem<'a> {
    pub net: &'a BeliefNetwork,
    pub evidence: &'a Evidence,
    pub knot: &'a Knot,
    pub cutset: Vec<NodeId>,
    /// Inputs keyed by (knot node, neighbor) for every neighbor not joined by
    /// a knot arc, except the exit neighbor.
    pub boundary: HashMap<(NodeId, NodeId), Boundary>,
    pub target: KnotTarget,
    pub instance_cap: usize,
    pub parallel: bool,
}

pub(crate) struct KnotOutcome {
    pub value: IntervalVector,
    pub table: ConditioningTable,
    pub visits: u64,
}

#[derive(Debug, Clone)]
enum ParentSlot {
    Internal(NodeId),
    Cut(NodeId),
    Outside(Scaled),
    Exit,
}

#[derive(Debug, Clone)]
enum ChildSlot {
    Internal(NodeId),
    Cut,
    Outside(Option<Scaled>),
    Exit,
}

struct Slots {
    parents: Vec<ParentSlot>,
    children: Vec<ChildSlot>,
}

/// Structure shared by every instance.
struct Plan<'a> {
    p: &'a KnotProblem<'a>,
    slots: HashMap<NodeId, Slots>,
    components: Vec<Vec<NodeId>>,
    target_component: usize,
}

fn degenerate_to_zero<T>(r: Result<T, IntervalError>) -> Result<Option<T>, EngineError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(IntervalError::Degenerate) => Ok(None),
        Err(e) => Err(EngineError::Interval(e)),
    }
}

impl<'a> Plan<'a> {
    fn new(p: &'a KnotProblem<'a>) -> Self {
        let net = p.net;
        let cut: BTreeSet<NodeId> = p.cutset.iter().copied().collect();
        let vacuous = |n: NodeId| Scaled::fixed(IntervalVector::vacuous(net.state_count(n)).unwrap());
        let outside = |v: NodeId, m: NodeId| p.boundary.get(&(v, m)).cloned().unwrap_or(Boundary::Vacuous);
        let exit = match p.target {
            KnotTarget::Exit { from, to } => Some((from, to)),
            KnotTarget::Bel(_) => None,
        };

        let mut slots = HashMap::new();
        for &v in &p.knot.nodes {
            let parents = net
                .parents(v)
                .iter()
                .map(|&u| {
                    if exit == Some((v, u)) {
                        ParentSlot::Exit
                    } else if p.knot.arcs.contains(&Arc::new(u, v)) {
                        if cut.contains(&u) {
                            ParentSlot::Cut(u)
                        } else {
                            ParentSlot::Internal(u)
                        }
                    } else {
                        match outside(v, u) {
                            Boundary::Msg(m) => ParentSlot::Outside(Scaled::fixed(m)),
                            Boundary::Vacuous | Boundary::Uniform => ParentSlot::Outside(vacuous(u)),
                        }
                    }
                })
                .collect();
            let children = net
                .children(v)
                .iter()
                .map(|&c| {
                    if exit == Some((v, c)) {
                        ChildSlot::Exit
                    } else if p.knot.arcs.contains(&Arc::new(v, c)) {
                        if cut.contains(&v) {
                            ChildSlot::Cut
                        } else {
                            ChildSlot::Internal(c)
                        }
                    } else {
                        match outside(v, c) {
                            Boundary::Msg(m) => ChildSlot::Outside(Some(Scaled::fixed(m))),
                            Boundary::Vacuous => ChildSlot::Outside(Some(vacuous(v))),
                            Boundary::Uniform => ChildSlot::Outside(None),
                        }
                    }
                })
                .collect();
            slots.insert(v, Slots { parents, children });
        }

        // Components of the knot once the cut arcs are removed.
        let nodes: Vec<NodeId> = p.knot.nodes.iter().copied().collect();
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut sets = crate::network::DisjointSets::new(nodes.len());
        for a in &p.knot.arcs {
            if !cut.contains(&a.parent) {
                sets.union(index[&a.parent], index[&a.child]);
            }
        }
        let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for &n in &nodes {
            groups.entry(sets.find(index[&n])).or_default().push(n);
        }
        let components: Vec<Vec<NodeId>> = groups.into_values().collect();
        let anchor = p.target.anchor();
        let target_component = components.iter().position(|c| c.contains(&anchor)).unwrap();
        Plan { p, slots, components, target_component }
    }

    fn domains(&self) -> Vec<Vec<usize>> {
        self.p
            .cutset
            .iter()
            .map(|&c| match self.p.evidence.get(c) {
                Some(s) => vec![s],
                None => (0..self.p.net.state_count(c)).collect(),
            })
            .collect()
    }
}

struct Instance<'p, 'a> {
    plan: &'p Plan<'a>,
    states: HashMap<NodeId, (usize, bool)>,
    memo: HashMap<(NodeId, NodeId), Scaled>,
    visits: u64,
}

impl Instance<'_, '_> {
    fn observed(&self, v: NodeId) -> (Option<usize>, bool) {
        match self.states.get(&v) {
            Some(&(s, varies)) => (Some(s), varies),
            None => (self.plan.p.evidence.get(v), false),
        }
    }

    /// Computes `out` at `v`, treating neighbor `toward` as the receiver.
    fn local(&mut self, v: NodeId, out: Output, toward: Option<NodeId>) -> Result<Scaled, IntervalError> {
        let plan = self.plan;
        let net = plan.p.net;
        let slots = &plan.slots[&v];
        let mut parents: Vec<Scaled> = Vec::with_capacity(slots.parents.len());
        for (i, s) in slots.parents.iter().enumerate() {
            let u = net.parents(v)[i];
            let m = match s {
                ParentSlot::Internal(u) if Some(*u) != toward => self.message(*u, v)?,
                ParentSlot::Internal(_) | ParentSlot::Exit => {
                    Scaled::fixed(IntervalVector::vacuous(net.state_count(u)).unwrap())
                }
                ParentSlot::Cut(u) => {
                    let (state, varies) = self.states[u];
                    Scaled { scale: Interval::ONE, dist: IntervalVector::indicator(net.state_count(*u), state), varies }
                }
                ParentSlot::Outside(m) => m.clone(),
            };
            parents.push(m);
        }
        let mut children: Vec<Option<Scaled>> = Vec::with_capacity(slots.children.len());
        for s in &slots.children {
            let m = match s {
                ChildSlot::Internal(c) if Some(*c) != toward => Some(self.message(*c, v)?),
                ChildSlot::Internal(_) | ChildSlot::Cut | ChildSlot::Exit => None,
                ChildSlot::Outside(m) => m.clone(),
            };
            children.push(m);
        }
        let (observed, observed_varies) = self.observed(v);
        let local = Local {
            node: net.node(v),
            observed,
            observed_varies,
            parents: parents.iter().collect(),
            children: children.iter().map(|c| c.as_ref()).collect(),
        };
        self.visits += 1;
        local.compute(out)
    }

    fn message(&mut self, from: NodeId, to: NodeId) -> Result<Scaled, IntervalError> {
        if let Some(m) = self.memo.get(&(from, to)) {
            return Ok(m.clone());
        }
        let net = self.plan.p.net;
        let out = match net.children(from).iter().position(|&c| c == to) {
            Some(j) => Output::PiTo(j),
            None => Output::LambdaTo(net.parents(from).iter().position(|&u| u == to).unwrap()),
        };
        let m = self.local(from, out, Some(to))?;
        self.memo.insert((from, to), m.clone());
        Ok(m)
    }

    /// Instance mass and normalized target shape.
    fn evaluate(&mut self) -> Result<Option<(Interval, IntervalVector)>, EngineError> {
        let plan = self.plan;
        let net = plan.p.net;
        let target = match plan.p.target {
            KnotTarget::Bel(q) => self.local(q, Output::Bel, None),
            KnotTarget::Exit { from, to } => {
                let out = match net.children(from).iter().position(|&c| c == to) {
                    Some(j) => Output::PiTo(j),
                    None => Output::LambdaTo(net.parents(from).iter().position(|&u| u == to).unwrap()),
                };
                self.local(from, out, Some(to))
            }
        };
        let Some(target) = degenerate_to_zero(target)? else { return Ok(None) };
        let mut mass = target.scale;
        for (i, comp) in plan.components.iter().enumerate() {
            if i == plan.target_component {
                continue;
            }
            let Some(bel) = degenerate_to_zero(self.local(comp[0], Output::Bel, None))? else {
                return Ok(None);
            };
            mass = mass.mul_nonneg(bel.scale);
        }
        Ok(Some((mass, target.dist)))
    }
}

/// Per-instance (mass, shape) pairs in instance order, plus visit counts.
type InstanceResults = Vec<(Vec<usize>, Option<(Interval, IntervalVector)>, u64)>;

fn run_instances(plan: &Plan<'_>) -> Result<InstanceResults, EngineError> {
    let domains = plan.domains();
    let count = domains.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len()));
    let count = match count {
        Some(c) if c <= plan.p.instance_cap => c,
        _ => {
            let n = domains.iter().map(|d| d.len() as f64).product::<f64>();
            return Err(EngineError::InstanceCap { instances: n, cap: plan.p.instance_cap });
        }
    };
    let mut configs = Vec::with_capacity(count);
    let mut od = Odometer::new(domains.iter().map(|d| d.len()).collect());
    loop {
        configs.push(od.digits().iter().zip(&domains).map(|(&i, d)| d[i]).collect::<Vec<usize>>());
        if !od.advance() {
            break;
        }
    }
    let eval = |states: &Vec<usize>| -> Result<_, EngineError> {
        let map = plan
            .p
            .cutset
            .iter()
            .zip(states)
            .zip(&domains)
            .map(|((&c, &s), d)| (c, (s, d.len() > 1)))
            .collect();
        let mut inst = Instance { plan, states: map, memo: HashMap::new(), visits: 0 };
        let r = inst.evaluate()?;
        Ok((states.clone(), r, inst.visits))
    };
    if plan.p.parallel && configs.len() >= PARALLEL_THRESHOLD {
        configs.par_iter().map(eval).collect()
    } else {
        configs.iter().map(eval).collect()
    }
}

pub(crate) fn condition(p: &KnotProblem<'_>) -> Result<KnotOutcome, EngineError> {
    let plan = Plan::new(p);
    let results = run_instances(&plan)?;
    let k = match p.target {
        KnotTarget::Bel(q) => p.net.state_count(q),
        KnotTarget::Exit { from, to } => {
            if p.net.parents(to).contains(&from) {
                p.net.state_count(from)
            } else {
                p.net.state_count(to)
            }
        }
    };
    let visits = results.iter().map(|r| r.2).sum();
    let masses: Vec<Interval> = results.iter().map(|r| r.1.as_ref().map_or(Interval::ZERO, |x| x.0)).collect();
    if masses.iter().all(|m| m.hi() == 0.0) {
        return Err(EngineError::ConflictingEvidence);
    }
    let weights = IntervalVector::new(masses)?.normalize()?;
    let vacuous = IntervalVector::vacuous(k)?;
    let shapes: Vec<&IntervalVector> = results.iter().map(|r| r.1.as_ref().map_or(&vacuous, |x| &x.1)).collect();
    let mut column = Vec::with_capacity(shapes.len());
    let mixed = (0..k)
        .map(|x| {
            column.clear();
            column.extend(shapes.iter().map(|s| s[x]));
            ar_dot_slices(&column, weights.entries())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mixed = IntervalVector::new(mixed)?;
    let value = {
        let n = mixed.normalize()?;
        n.intersect(&mixed).unwrap_or(n)
    };
    let entries = results
        .iter()
        .zip(weights.iter())
        .map(|(r, w)| {
            let shape = r.1.as_ref().map_or_else(|| vacuous.clone(), |x| x.1.clone());
            (shape, CutsetAssignment { cutset: p.cutset.clone(), instance: r.0.clone(), weight: *w })
        })
        .collect();
    Ok(KnotOutcome { value, table: ConditioningTable { cutset: p.cutset.clone(), entries }, visits })
}

/// Result of [`condition_knot`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedKnot {
    pub value: IntervalVector,
    pub table: ConditioningTable,
}

/// Conditions one knot of the active graph. Messages entering the knot are
/// computed by ordinary propagation over the rest of the active set.
pub fn condition_knot(
    net: &BeliefNetwork,
    evidence: &Evidence,
    active: &ActiveSet,
    knot: &Knot,
    target: KnotTarget,
) -> Result<ConditionedKnot, EngineError> {
    let mut engine = Engine::new(net, active.query(), evidence.clone(), EngineConfig::default())?;
    engine.condition_knot(active, knot, target)
}

/// Query belief over an active set that may hold whole knots, partial
/// knots and tree sections.
pub fn propagate_mixed(
    net: &BeliefNetwork,
    evidence: &Evidence,
    active: &ActiveSet,
) -> Result<IntervalVector, EngineError> {
    Engine::new(net, active.query(), evidence.clone(), EngineConfig::default())?.propagate(active)
}
