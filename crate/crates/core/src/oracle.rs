//! Exact reference answers: brute-force joint enumeration and point-valued
//! polytree propagation.

use std::collections::HashMap;

use thiserror::Error;

use crate::network::{is_polytree, BeliefNetwork, Evidence, NodeId, Odometer};

/// Largest joint state space the enumerators will walk.
pub const MAX_JOINT_STATES: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("joint state space has {0} configurations, above the 2^24 limit")]
    StateSpaceOverflow(u128),
    #[error("evidence has probability zero")]
    ZeroEvidence,
    #[error("network is not a polytree")]
    NotPolytree,
}

fn checked_space(net: &BeliefNetwork, nodes: impl Iterator<Item = NodeId>) -> Result<u128, OracleError> {
    let mut size: u128 = 1;
    for n in nodes {
        size = size.saturating_mul(net.state_count(n) as u128);
        if size > MAX_JOINT_STATES {
            return Err(OracleError::StateSpaceOverflow(size));
        }
    }
    Ok(size)
}

fn cpt_entry(net: &BeliefNetwork, id: NodeId, states: &[usize]) -> f64 {
    let node = net.node(id);
    let row = node.parents().iter().fold(0, |r, &p| r * net.state_count(p) + states[p.0]);
    node.prob(row, states[id.0])
}

/// The full joint distribution, one probability per configuration. Nodes
/// are digits in network order with the last node varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    radices: Vec<usize>,
    probabilities: Vec<f64>,
}

impl JointTable {
    pub fn new(net: &BeliefNetwork) -> Result<Self, OracleError> {
        checked_space(net, net.ids())?;
        let radices: Vec<usize> = net.ids().map(|n| net.state_count(n)).collect();
        let mut od = Odometer::new(radices.clone());
        let mut probabilities = Vec::new();
        loop {
            let states = od.digits();
            probabilities.push(net.ids().map(|n| cpt_entry(net, n, states)).product());
            if !od.advance() {
                break;
            }
        }
        Ok(JointTable { radices, probabilities })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// State of every node in configuration `index`.
    pub fn configuration(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = index % r;
            index /= r;
        }
        out
    }

    pub fn marginal(&self, evidence: &Evidence, node: NodeId) -> Result<Vec<f64>, OracleError> {
        let mut acc = vec![0.0; self.radices[node.0]];
        for (i, &p) in self.probabilities.iter().enumerate() {
            let config = self.configuration(i);
            if evidence.iter().all(|(n, s)| config[n.0] == s) {
                acc[config[node.0]] += p;
            }
        }
        normalized(acc)
    }
}

fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let total: f64 = v.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(OracleError::ZeroEvidence);
    }
    v.iter_mut().for_each(|x| *x /= total);
    Ok(v)
}

struct Enumerator<'a> {
    net: &'a BeliefNetwork,
    evidence: &'a Evidence,
    order: Vec<NodeId>,
    states: Vec<usize>,
    targets: Vec<NodeId>,
    acc: Vec<Vec<f64>>,
}

impl Enumerator<'_> {
    fn walk(&mut self, depth: usize, weight: f64) {
        if weight == 0.0 {
            return;
        }
        let Some(&id) = self.order.get(depth) else {
            for (slot, &t) in self.acc.iter_mut().zip(&self.targets) {
                slot[self.states[t.0]] += weight;
            }
            return;
        };
        let range = match self.evidence.get(id) {
            Some(s) => s..s + 1,
            None => 0..self.net.state_count(id),
        };
        for s in range {
            self.states[id.0] = s;
            let p = cpt_entry(self.net, id, &self.states);
            self.walk(depth + 1, weight * p);
        }
    }
}

fn enumerate(
    net: &BeliefNetwork,
    evidence: &Evidence,
    nodes: &[bool],
    targets: Vec<NodeId>,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let order: Vec<NodeId> =
        net.topological_order().iter().copied().filter(|n| nodes[n.0]).collect();
    checked_space(net, order.iter().copied())?;
    let acc = targets.iter().map(|&t| vec![0.0; net.state_count(t)]).collect();
    let mut e = Enumerator { net, evidence, order, states: vec![0; net.len()], targets, acc };
    e.walk(0, 1.0);
    e.acc.into_iter().map(normalized).collect()
}

/// Exact conditional marginal of `node` by summing the joint over every
/// configuration consistent with `evidence`.
///
/// Only the ancestors of the node and of the evidence are enumerated; the
/// rest of the network sums out to one.
pub fn enumerate_marginal(
    net: &BeliefNetwork,
    evidence: &Evidence,
    node: NodeId,
) -> Result<Vec<f64>, OracleError> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<NodeId> = evidence.iter().map(|(n, _)| n).chain([node]).collect();
    while let Some(n) = stack.pop() {
        if !keep[n.0] {
            keep[n.0] = true;
            stack.extend(net.parents(n).iter().copied());
        }
    }
    Ok(enumerate(net, evidence, &keep, vec![node])?.pop().unwrap())
}

/// Exact conditional marginals of every node, indexed by node.
pub fn enumerate_marginals(
    net: &BeliefNetwork,
    evidence: &Evidence,
) -> Result<Vec<Vec<f64>>, OracleError> {
    enumerate(net, evidence, &vec![true; net.len()], net.ids().collect())
}

struct Pearl<'a> {
    net: &'a BeliefNetwork,
    evidence: &'a Evidence,
    memo: HashMap<(NodeId, NodeId), Vec<f64>>,
}

impl Pearl<'_> {
    fn pi(&mut self, x: NodeId) -> Result<Vec<f64>, OracleError> {
        let net = self.net;
        let parents = net.parents(x);
        let msgs = parents.iter().map(|&u| self.message(u, x)).collect::<Result<Vec<_>, _>>()?;
        let node = net.node(x);
        let mut out = vec![0.0; node.state_count()];
        let mut od = Odometer::new(parents.iter().map(|&u| net.state_count(u)).collect());
        let mut row = 0;
        loop {
            let w: f64 = od.digits().iter().zip(&msgs).map(|(&s, m)| m[s]).product();
            if w != 0.0 {
                for (o, p) in out.iter_mut().zip(node.row(row)) {
                    *o += w * p;
                }
            }
            row += 1;
            if !od.advance() {
                break;
            }
        }
        Ok(out)
    }

    fn lambda(&mut self, x: NodeId, except: Option<NodeId>) -> Result<Vec<f64>, OracleError> {
        let mut out = match self.evidence.get(x) {
            Some(s) => (0..self.net.state_count(x)).map(|i| if i == s { 1.0 } else { 0.0 }).collect(),
            None => vec![1.0; self.net.state_count(x)],
        };
        for &c in self.net.children(x) {
            if Some(c) == except {
                continue;
            }
            let m = self.message(c, x)?;
            out.iter_mut().zip(&m).for_each(|(o, v)| *o *= v);
        }
        Ok(out)
    }

    /// Normalized message from `from` to its neighbor `to`.
    fn message(&mut self, from: NodeId, to: NodeId) -> Result<Vec<f64>, OracleError> {
        if let Some(m) = self.memo.get(&(from, to)) {
            return Ok(m.clone());
        }
        let net = self.net;
        let raw = if net.parents(to).contains(&from) {
            let pi = self.pi(from)?;
            let lambda = self.lambda(from, Some(to))?;
            pi.iter().zip(&lambda).map(|(a, b)| a * b).collect()
        } else {
            let lambda = self.lambda(from, None)?;
            let parents = net.parents(from);
            let pos = parents.iter().position(|&p| p == to).unwrap();
            let others = parents
                .iter()
                .enumerate()
                .map(|(i, &u)| if i == pos { Ok(Vec::new()) } else { self.message(u, from) })
                .collect::<Result<Vec<_>, _>>()?;
            let node = net.node(from);
            let mut out = vec![0.0; net.state_count(to)];
            let mut od = Odometer::new(parents.iter().map(|&u| net.state_count(u)).collect());
            let mut row = 0;
            loop {
                let d = od.digits();
                let w: f64 = (0..parents.len()).filter(|&i| i != pos).map(|i| others[i][d[i]]).product();
                let inner: f64 = node.row(row).iter().zip(&lambda).map(|(p, l)| p * l).sum();
                out[d[pos]] += w * inner;
                row += 1;
                if !od.advance() {
                    break;
                }
            }
            out
        };
        let m = normalized(raw)?;
        self.memo.insert((from, to), m.clone());
        Ok(m)
    }
}

/// Exact conditional marginal of `node` by point-valued message passing.
/// Rejects networks whose skeleton has a cycle.
pub fn polytree_exact(
    net: &BeliefNetwork,
    evidence: &Evidence,
    node: NodeId,
) -> Result<Vec<f64>, OracleError> {
    if !is_polytree(net) {
        return Err(OracleError::NotPolytree);
    }
    let mut p = Pearl { net, evidence, memo: HashMap::new() };
    let pi = p.pi(node)?;
    let lambda = p.lambda(node, None)?;
    normalized(pi.iter().zip(&lambda).map(|(a, b)| a * b).collect())
}
