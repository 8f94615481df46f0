//! The propagation pass: messages are pulled toward the query, recursing
//! outward over the active graph. Tree arcs use the node-local formulas;
//! a knot of the active graph is entered once, through the bridge arc that
//! leads to the query, and evaluated by conditioning.

use std::collections::HashMap;

use super::cache::{Dep, MessageCache, MessageKind, Slot};
use super::messages::{Local, Output, Scaled};
use super::{ActiveSet, EngineConfig, EngineError};
use crate::interval::IntervalVector;
use crate::loops::{condition, select_cutset_with, Boundary, ConditionedKnot, KnotProblem, KnotTarget};
use crate::network::{find_knots_in, Arc, BeliefNetwork, Evidence, Knot, KnotDecomposition, NodeId, Relevance};

/// Boundary inputs of a knot and the cache dependencies they imply.
type KnotInputs = (HashMap<(NodeId, NodeId), Boundary>, Vec<Dep>);

/// A message arriving at a node from one neighbor.
enum Incoming {
    Vacuous,
    Uniform,
    Msg(IntervalVector, u64),
}

pub(crate) struct Walker<'a> {
    net: &'a BeliefNetwork,
    evidence: &'a Evidence,
    relevance: &'a Relevance,
    config: &'a EngineConfig,
    cache: &'a mut MessageCache,
    visits: &'a mut u64,
    active: &'a ActiveSet,
    knots: KnotDecomposition,
    knot_of: HashMap<NodeId, usize>,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(
        net: &'a BeliefNetwork,
        evidence: &'a Evidence,
        relevance: &'a Relevance,
        config: &'a EngineConfig,
        cache: &'a mut MessageCache,
        visits: &'a mut u64,
        active: &'a ActiveSet,
    ) -> Self {
        let arcs: Vec<Arc> = active
            .arcs()
            .iter()
            .copied()
            .filter(|a| relevance.contains(a.parent) && relevance.contains(a.child))
            .collect();
        let knots = find_knots_in(&arcs);
        let knot_of = knots
            .knots
            .iter()
            .enumerate()
            .flat_map(|(i, k)| k.nodes.iter().map(move |&n| (n, i)))
            .collect();
        Walker { net, evidence, relevance, config, cache, visits, active, knots, knot_of }
    }

    fn arc_between(&self, v: NodeId, m: NodeId) -> (Arc, bool) {
        if self.net.parents(v).contains(&m) {
            (Arc::new(m, v), true)
        } else {
            (Arc::new(v, m), false)
        }
    }

    /// What `v` receives from neighbor `m`.
    fn input(&mut self, v: NodeId, m: NodeId) -> Result<Incoming, EngineError> {
        let (arc, from_parent) = self.arc_between(v, m);
        if !self.relevance.contains(m) {
            // An irrelevant child is barren: its λ is constant.
            return Ok(if from_parent { Incoming::Vacuous } else { Incoming::Uniform });
        }
        if !self.active.has_arc(arc) || !self.relevance.contains(v) {
            return Ok(Incoming::Vacuous);
        }
        let (value, version) = self.message(m, v)?;
        Ok(Incoming::Msg(value, version))
    }

    /// Normalized message from `from` to its neighbor `to`.
    pub(crate) fn message(&mut self, from: NodeId, to: NodeId) -> Result<(IntervalVector, u64), EngineError> {
        if let Some(&k) = self.knot_of.get(&from) {
            if self.knot_of.get(&to) != Some(&k) {
                return self.knot_output(k, KnotTarget::Exit { from, to });
            }
        }
        self.tree_output(from, Some(to))
    }

    pub(crate) fn belief(&mut self, q: NodeId) -> Result<IntervalVector, EngineError> {
        let r = match self.knot_of.get(&q) {
            Some(&k) => self.knot_output(k, KnotTarget::Bel(q))?,
            None => self.tree_output(q, None)?,
        };
        Ok(r.0)
    }

    fn slot(&self, from: NodeId, to: Option<NodeId>) -> Slot {
        match to {
            None => Slot::Bel(from),
            Some(to) => {
                let (arc, to_is_parent) = self.arc_between(from, to);
                let kind = if to_is_parent { MessageKind::Lambda } else { MessageKind::Pi };
                Slot::Msg { kind, arc }
            }
        }
    }

    fn tree_output(&mut self, v: NodeId, toward: Option<NodeId>) -> Result<(IntervalVector, u64), EngineError> {
        let net = self.net;
        let mut deps = Vec::new();
        let mut parents = Vec::with_capacity(net.parents(v).len());
        let mut out = Output::Bel;
        for (i, &u) in net.parents(v).iter().enumerate() {
            let vac = || Scaled::fixed(IntervalVector::vacuous(net.state_count(u)).unwrap());
            if Some(u) == toward {
                out = Output::LambdaTo(i);
                parents.push(vac());
                continue;
            }
            parents.push(match self.input(v, u)? {
                Incoming::Msg(m, ver) => {
                    deps.push(Dep::Version(u, ver));
                    Scaled::fixed(m)
                }
                Incoming::Vacuous | Incoming::Uniform => {
                    deps.push(Dep::Vacuous(u));
                    vac()
                }
            });
        }
        let mut children = Vec::with_capacity(net.children(v).len());
        for (j, &c) in net.children(v).iter().enumerate() {
            if Some(c) == toward {
                out = Output::PiTo(j);
                children.push(None);
                continue;
            }
            children.push(match self.input(v, c)? {
                Incoming::Msg(m, ver) => {
                    deps.push(Dep::Version(c, ver));
                    Some(Scaled::fixed(m))
                }
                Incoming::Vacuous => {
                    deps.push(Dep::Vacuous(c));
                    Some(Scaled::fixed(IntervalVector::vacuous(net.state_count(v)).unwrap()))
                }
                Incoming::Uniform => {
                    deps.push(Dep::Uniform(c));
                    None
                }
            });
        }

        let slot = self.slot(v, toward);
        if self.config.caching {
            if let Some(hit) = self.cache.lookup(slot, &deps) {
                return Ok(hit);
            }
        }
        *self.visits += 1;
        let local = Local {
            node: net.node(v),
            observed: self.evidence.get(v),
            observed_varies: false,
            parents: parents.iter().collect(),
            children: children.iter().map(|c| c.as_ref()).collect(),
        };
        let value = local.compute(out)?.dist;
        let (version, _) = self.cache.store(slot, value.clone(), deps);
        Ok((value, version))
    }

    /// Boundary inputs of `knot` and the matching cache dependencies.
    fn knot_inputs(
        &mut self,
        knot: &Knot,
        target: KnotTarget,
    ) -> Result<KnotInputs, EngineError> {
        let exit = match target {
            KnotTarget::Exit { from, to } => Some((from, to)),
            KnotTarget::Bel(_) => None,
        };
        let mut boundary = HashMap::new();
        let mut deps = Vec::new();
        for &v in &knot.nodes {
            let neighbors: Vec<NodeId> = self.net.neighbors(v).collect();
            for m in neighbors {
                let (arc, _) = self.arc_between(v, m);
                if knot.arcs.contains(&arc) || exit == Some((v, m)) {
                    continue;
                }
                let b = match self.input(v, m)? {
                    Incoming::Vacuous => {
                        deps.push(Dep::Vacuous(m));
                        Boundary::Vacuous
                    }
                    Incoming::Uniform => {
                        deps.push(Dep::Uniform(m));
                        Boundary::Uniform
                    }
                    Incoming::Msg(value, ver) => {
                        deps.push(Dep::Version(m, ver));
                        Boundary::Msg(value)
                    }
                };
                boundary.insert((v, m), b);
            }
        }
        Ok((boundary, deps))
    }

    fn problem<'p>(
        &'p self,
        knot: &'p Knot,
        target: KnotTarget,
        boundary: HashMap<(NodeId, NodeId), Boundary>,
    ) -> KnotProblem<'p> {
        KnotProblem {
            net: self.net,
            evidence: self.evidence,
            knot,
            cutset: select_cutset_with(knot, self.evidence),
            boundary,
            target,
            instance_cap: self.config.instance_cap,
            parallel: self.config.parallel,
        }
    }

    fn knot_output(&mut self, k: usize, target: KnotTarget) -> Result<(IntervalVector, u64), EngineError> {
        let knot = self.knots.knots[k].clone();
        let (boundary, inputs) = self.knot_inputs(&knot, target)?;
        let problem = self.problem(&knot, target, boundary);
        let mut deps: Vec<Dep> = knot.arcs.iter().map(|&a| Dep::KnotArc(a)).collect();
        deps.extend(problem.cutset.iter().map(|&c| Dep::Cut(c)));
        deps.extend(inputs);

        let slot = match target {
            KnotTarget::Bel(q) => self.slot(q, None),
            KnotTarget::Exit { from, to } => self.slot(from, Some(to)),
        };
        if self.config.caching {
            if let Some(hit) = self.cache.lookup(slot, &deps) {
                return Ok(hit);
            }
        }
        let outcome = condition(&problem)?;
        *self.visits += outcome.visits;
        let (version, _) = self.cache.store(slot, outcome.value.clone(), deps);
        Ok((outcome.value, version))
    }

    pub(crate) fn condition_with_table(
        &mut self,
        knot: &Knot,
        target: KnotTarget,
    ) -> Result<ConditionedKnot, EngineError> {
        // Boundary messages are only well defined for knots of the active graph.
        if !self.knots.knots.contains(knot) {
            return Err(EngineError::KnotNotContained);
        }
        let (boundary, _) = self.knot_inputs(knot, target)?;
        let problem = self.problem(knot, target, boundary);
        let outcome = condition(&problem)?;
        *self.visits += outcome.visits;
        Ok(ConditionedKnot { value: outcome.value, table: outcome.table })
    }
}
