//! Discrete belief networks: nodes, ordered parents, conditional probability
//! tables, and evidence.
//!
//! CPT rows are indexed by parent configuration with the last-listed parent
//! varying fastest; each row holds one probability per state of the node.

mod format;
mod structure;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{parse_network, serialize_network};
pub(crate) use structure::DisjointSets;
pub use structure::{
    d_separated, find_knots, find_knots_in, is_polytree, is_polytree_in, relevant_set, Knot,
    KnotDecomposition, Relevance,
};

/// Row sums must be within this distance of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Directed arc `parent -> child`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arc {
    pub parent: NodeId,
    pub child: NodeId,
}

impl Arc {
    pub fn new(parent: NodeId, child: NodeId) -> Self {
        Arc { parent, child }
    }

    /// The endpoint that is not `n`.
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.parent == n {
            self.child
        } else {
            self.parent
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node `{0}` needs at least two states")]
    TooFewStates(String),
    #[error("node `{node}` lists parent `{parent}` twice")]
    DuplicateParent { node: String, parent: String },
    #[error("cycle through node `{0}`")]
    Cycle(String),
    #[error("node `{node}`: CPT has {got} entries, expected {expected}")]
    CptShape { node: String, got: usize, expected: usize },
    #[error("node `{node}`: CPT entry {value} outside [0, 1]")]
    CptValue { node: String, value: f64 },
    #[error("node `{node}`: CPT row {row} sums to {sum}")]
    RowSum { node: String, row: usize, sum: f64 },
    #[error("node `{0}` has no CPT")]
    MissingCpt(String),
    #[error("node `{0}` observed twice")]
    DuplicateEvidence(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    name: String,
    states: Vec<String>,
    parents: Vec<NodeId>,
    cpt: Vec<f64>,
}

impl Node {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn parents(&self) -> &[NodeId] {
        &self.parents
    }

    /// Flat table, `row * state_count + state`.
    pub fn cpt(&self) -> &[f64] {
        &self.cpt
    }

    pub fn row_count(&self) -> usize {
        self.cpt.len() / self.states.len()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let k = self.states.len();
        &self.cpt[row * k..(row + 1) * k]
    }

    /// `P(state | parent configuration row)`.
    #[inline]
    pub fn prob(&self, row: usize, state: usize) -> f64 {
        self.cpt[row * self.states.len() + state]
    }
}

/// Observed states, keyed by node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence(BTreeMap<NodeId, usize>);

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    /// Records an observation; returns the previous one for this node, if any.
    pub fn observe(&mut self, node: NodeId, state: usize) -> Option<usize> {
        self.0.insert(node, state)
    }

    pub fn get(&self, node: NodeId) -> Option<usize> {
        self.0.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.0.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, usize)> + '_ {
        self.0.iter().map(|(&n, &s)| (n, s))
    }

    /// Copy of `self` without the observation on `node`.
    pub fn without(&self, node: NodeId) -> Evidence {
        let mut e = self.clone();
        e.0.remove(&node);
        e
    }

    /// Checks that every referenced node and state exists in `net`.
    pub fn validate(&self, net: &BeliefNetwork) -> Result<(), NetworkError> {
        for (n, s) in self.iter() {
            let node = net.nodes.get(n.0).ok_or_else(|| NetworkError::UnknownNode(n.to_string()))?;
            if s >= node.state_count() {
                return Err(NetworkError::UnknownState {
                    node: node.name.clone(),
                    state: s.to_string(),
                });
            }
        }
        Ok(())
    }
}

impl FromIterator<(NodeId, usize)> for Evidence {
    fn from_iter<T: IntoIterator<Item = (NodeId, usize)>>(iter: T) -> Self {
        Evidence(iter.into_iter().collect())
    }
}

/// Validated directed acyclic belief network.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNetwork {
    name: String,
    nodes: Vec<Node>,
    children: Vec<Vec<NodeId>>,
    topo: Vec<NodeId>,
    index: HashMap<String, NodeId>,
    evidence: Evidence,
}

impl BeliefNetwork {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn require_id(&self, name: &str) -> Result<NodeId, NetworkError> {
        self.id(name).ok_or_else(|| NetworkError::UnknownNode(name.to_string()))
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].parents
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    /// Parents followed by children.
    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.parents(id).iter().chain(self.children(id)).copied()
    }

    pub fn state_count(&self, id: NodeId) -> usize {
        self.nodes[id.0].states.len()
    }

    /// Arcs in node order, each node's parents in declared order.
    pub fn arcs(&self) -> Vec<Arc> {
        self.ids()
            .flat_map(|c| self.parents(c).iter().map(move |&p| Arc::new(p, c)))
            .collect()
    }

    pub fn arc_count(&self) -> usize {
        self.nodes.iter().map(|n| n.parents.len()).sum()
    }

    pub fn has_arc(&self, parent: NodeId, child: NodeId) -> bool {
        self.parents(child).contains(&parent)
    }

    /// Nodes ordered so that parents precede children.
    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    /// Evidence declared in the network file.
    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    /// CPT row for the given parent states (listed in parent order).
    pub fn row_index(&self, id: NodeId, parent_states: &[usize]) -> usize {
        let node = &self.nodes[id.0];
        debug_assert_eq!(parent_states.len(), node.parents.len());
        node.parents.iter().zip(parent_states).fold(0, |row, (&p, &s)| row * self.state_count(p) + s)
    }

    /// Parses `name=state` style evidence against this network.
    pub fn observation(&self, node: &str, state: &str) -> Result<(NodeId, usize), NetworkError> {
        let id = self.require_id(node)?;
        let s = self.node(id).state_index(state).ok_or_else(|| NetworkError::UnknownState {
            node: node.to_string(),
            state: state.to_string(),
        })?;
        Ok((id, s))
    }

    /// Copy of the network with different declared evidence.
    pub fn with_evidence(&self, evidence: Evidence) -> Result<BeliefNetwork, NetworkError> {
        evidence.validate(self)?;
        let mut net = self.clone();
        net.evidence = evidence;
        Ok(net)
    }
}

/// Incremental construction of a [`BeliefNetwork`]; `build` validates.
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    name: String,
    nodes: Vec<Node>,
    index: HashMap<String, NodeId>,
    cpt_set: Vec<bool>,
    evidence: Evidence,
}

impl NetworkBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        NetworkBuilder { name: name.into(), ..Default::default() }
    }

    pub fn add_node<S: AsRef<str>>(
        &mut self,
        name: &str,
        states: &[S],
    ) -> Result<NodeId, NetworkError> {
        if self.index.contains_key(name) {
            return Err(NetworkError::DuplicateNode(name.to_string()));
        }
        if states.len() < 2 {
            return Err(NetworkError::TooFewStates(name.to_string()));
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            name: name.to_string(),
            states: states.iter().map(|s| s.as_ref().to_string()).collect(),
            parents: Vec::new(),
            cpt: Vec::new(),
        });
        self.index.insert(name.to_string(), id);
        self.cpt_set.push(false);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn state_count(&self, id: NodeId) -> usize {
        self.nodes[id.0].states.len()
    }

    pub fn state_names(&self, id: NodeId) -> &[String] {
        &self.nodes[id.0].states
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].parents
    }

    pub fn set_parents(&mut self, child: NodeId, parents: &[NodeId]) -> Result<(), NetworkError> {
        for (i, p) in parents.iter().enumerate() {
            if p.0 >= self.nodes.len() {
                return Err(NetworkError::UnknownNode(p.to_string()));
            }
            if parents[..i].contains(p) {
                return Err(NetworkError::DuplicateParent {
                    node: self.nodes[child.0].name.clone(),
                    parent: self.nodes[p.0].name.clone(),
                });
            }
        }
        self.nodes[child.0].parents = parents.to_vec();
        Ok(())
    }

    /// Number of CPT rows implied by the current parent list.
    pub fn row_count(&self, id: NodeId) -> usize {
        self.nodes[id.0].parents.iter().map(|p| self.nodes[p.0].states.len()).product()
    }

    pub fn set_cpt(&mut self, id: NodeId, cpt: Vec<f64>) -> Result<(), NetworkError> {
        let node = &self.nodes[id.0];
        let expected = self.row_count(id) * node.states.len();
        if cpt.len() != expected {
            return Err(NetworkError::CptShape { node: node.name.clone(), got: cpt.len(), expected });
        }
        self.nodes[id.0].cpt = cpt;
        self.cpt_set[id.0] = true;
        Ok(())
    }

    pub fn observe(&mut self, id: NodeId, state: usize) -> Result<(), NetworkError> {
        let node = &self.nodes[id.0];
        if state >= node.states.len() {
            return Err(NetworkError::UnknownState {
                node: node.name.clone(),
                state: state.to_string(),
            });
        }
        if self.evidence.observe(id, state).is_some() {
            return Err(NetworkError::DuplicateEvidence(node.name.clone()));
        }
        Ok(())
    }

    pub fn build(self) -> Result<BeliefNetwork, NetworkError> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if !self.cpt_set[i] {
                return Err(NetworkError::MissingCpt(node.name.clone()));
            }
            let k = node.states.len();
            let rows: usize = node.parents.iter().map(|p| self.nodes[p.0].states.len()).product();
            if node.cpt.len() != rows * k {
                return Err(NetworkError::CptShape {
                    node: node.name.clone(),
                    got: node.cpt.len(),
                    expected: rows * k,
                });
            }
            if let Some(&bad) = node.cpt.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(NetworkError::CptValue { node: node.name.clone(), value: bad });
            }
            for (r, row) in node.cpt.chunks(k).enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(NetworkError::RowSum { node: node.name.clone(), row: r, sum });
                }
            }
        }

        let mut children = vec![Vec::new(); n];
        for (c, node) in self.nodes.iter().enumerate() {
            for p in &node.parents {
                children[p.0].push(NodeId(c));
            }
        }

        // Kahn's algorithm, lowest index first.
        let mut indegree: Vec<usize> = self.nodes.iter().map(|n| n.parents.len()).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            topo.push(NodeId(i));
            for c in &children[i] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.insert(c.0);
                }
            }
        }
        if topo.len() < n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(NetworkError::Cycle(self.nodes[stuck].name.clone()));
        }

        Ok(BeliefNetwork {
            name: self.name,
            nodes: self.nodes,
            children,
            topo,
            index: self.index,
            evidence: self.evidence,
        })
    }
}

/// Mixed-radix counter with the last digit varying fastest, matching CPT
/// row order.
#[derive(Debug, Clone)]
pub(crate) struct Odometer {
    radices: Vec<usize>,
    digits: Vec<usize>,
}

impl Odometer {
    pub(crate) fn new(radices: Vec<usize>) -> Self {
        let digits = vec![0; radices.len()];
        Odometer { radices, digits }
    }

    pub(crate) fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// Steps to the next configuration; false once every one has been seen.
    pub(crate) fn advance(&mut self) -> bool {
        for i in (0..self.digits.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.radices[i] {
                return true;
            }
            self.digits[i] = 0;
        }
        false
    }
}
