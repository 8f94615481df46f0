//! Active sets and the strategies that grow them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::network::{is_polytree_in, Arc, BeliefNetwork, NodeId, Relevance};

/// Delay used by [`Strategy::DelayedLoops`] when none is given.
pub const DEFAULT_DELAY: usize = 5;

/// How the active set grows between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// Add every relevant neighbor and every arc among active nodes.
    BreadthFirst,
    /// Breadth-first, but arcs that would close an undirected cycle are
    /// never added.
    NoLoops,
    /// Breadth-first, but arcs that would close a cycle wait this many
    /// rounds before being added.
    DelayedLoops(usize),
}

impl Strategy {
    /// Short name used on the command line and in benchmark records.
    pub fn name(&self) -> String {
        match self {
            Strategy::BreadthFirst => "bfs".into(),
            Strategy::NoLoops => "no-loops".into(),
            Strategy::DelayedLoops(k) => format!("delayed-{k}"),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    /// Accepts `bfs`, `no-loops`, `delayed` and `delayed-K`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bfs" | "breadth-first" => Ok(Strategy::BreadthFirst),
            "no-loops" | "no_loops" => Ok(Strategy::NoLoops),
            "delayed" => Ok(Strategy::DelayedLoops(DEFAULT_DELAY)),
            _ => s
                .strip_prefix("delayed-")
                .and_then(|k| k.parse().ok())
                .map(Strategy::DelayedLoops)
                .ok_or_else(|| format!("unknown strategy `{s}`")),
        }
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name()
    }
}

impl TryFrom<String> for Strategy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// The nodes and arcs over which messages are computed. Arcs of the network
/// joining two active nodes but absent here are missing arcs: their messages
/// are vacuous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    query: NodeId,
    member: BTreeSet<NodeId>,
    order: Vec<NodeId>,
    arcs: BTreeSet<Arc>,
}

impl ActiveSet {
    /// The active set holding only the query.
    pub fn new(query: NodeId) -> Self {
        ActiveSet { query, member: BTreeSet::from([query]), order: vec![query], arcs: BTreeSet::new() }
    }

    /// Builds an arbitrary active set. Every arc endpoint must be listed in
    /// `nodes`; the query is always included.
    pub fn from_parts(
        query: NodeId,
        nodes: impl IntoIterator<Item = NodeId>,
        arcs: impl IntoIterator<Item = Arc>,
    ) -> Self {
        let mut a = ActiveSet::new(query);
        for n in nodes {
            a.insert_node(n);
        }
        for arc in arcs {
            a.insert_arc(arc);
        }
        a
    }

    pub fn query(&self) -> NodeId {
        self.query
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.member.contains(&n)
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.member
    }

    /// Nodes in the order they were added.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn arcs(&self) -> &BTreeSet<Arc> {
        &self.arcs
    }

    pub fn has_arc(&self, arc: Arc) -> bool {
        self.arcs.contains(&arc)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn insert_node(&mut self, n: NodeId) -> bool {
        let fresh = self.member.insert(n);
        if fresh {
            self.order.push(n);
        }
        fresh
    }

    /// # Panics
    /// If either endpoint is not active.
    pub fn insert_arc(&mut self, arc: Arc) -> bool {
        assert!(
            self.contains(arc.parent) && self.contains(arc.child),
            "arc {}->{} has an endpoint outside the active set",
            arc.parent,
            arc.child
        );
        self.arcs.insert(arc)
    }

    /// Network arcs between active nodes that are not themselves active.
    pub fn missing_arcs(&self, net: &BeliefNetwork) -> Vec<Arc> {
        self.order
            .iter()
            .flat_map(|&c| net.parents(c).iter().map(move |&p| Arc::new(p, c)))
            .filter(|a| self.contains(a.parent) && !self.arcs.contains(a))
            .collect()
    }

    /// True iff the active arcs form no undirected cycle.
    pub fn is_polytree(&self, net: &BeliefNetwork) -> bool {
        is_polytree_in(net.len(), self.arcs.iter())
    }

    /// True iff the active arcs connect every active node.
    pub fn is_connected(&self) -> bool {
        let mut seen = BTreeSet::from([self.query]);
        let mut stack = vec![self.query];
        while let Some(n) = stack.pop() {
            for a in &self.arcs {
                if a.parent == n || a.child == n {
                    let m = a.other(n);
                    if seen.insert(m) {
                        stack.push(m);
                    }
                }
            }
        }
        seen.len() == self.member.len()
    }
}

/// Grows an active set round by round under one strategy.
#[derive(Debug, Clone)]
pub struct Expander {
    strategy: Strategy,
    round: usize,
    excluded: BTreeSet<Arc>,
    pending: Vec<(usize, Arc)>,
}

impl Expander {
    pub fn new(strategy: Strategy) -> Self {
        Expander { strategy, round: 0, excluded: BTreeSet::new(), pending: Vec::new() }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Arcs permanently left out (no-loops strategy).
    pub fn excluded(&self) -> &BTreeSet<Arc> {
        &self.excluded
    }

    /// Arcs waiting to be added, with the round they become due.
    pub fn pending(&self) -> &[(usize, Arc)] {
        &self.pending
    }

    /// One round of growth. Returns false at a fixed point: no node can be
    /// added, no arc can be added, and nothing is waiting.
    ///
    /// When nothing else changes but delayed arcs are still waiting, the
    /// round counter jumps ahead to the earliest due arc.
    pub fn expand(&mut self, active: &mut ActiveSet, net: &BeliefNetwork, relevance: &Relevance) -> bool {
        self.round += 1;
        let mut changed = false;

        let frontier: Vec<NodeId> = active.order().to_vec();
        for v in frontier {
            for nb in net.neighbors(v).collect::<Vec<_>>() {
                if !relevance.contains(nb) || active.contains(nb) {
                    continue;
                }
                active.insert_node(nb);
                changed = true;
                let arc = if net.parents(v).contains(&nb) { Arc::new(nb, v) } else { Arc::new(v, nb) };
                if self.strategy != Strategy::BreadthFirst {
                    active.insert_arc(arc);
                }
            }
        }

        if !changed && !self.pending.is_empty() && self.pending.iter().all(|(due, _)| *due > self.round) {
            self.round = self.pending.iter().map(|(due, _)| *due).min().unwrap();
        }
        let round = self.round;
        let (due, waiting): (Vec<_>, Vec<_>) = self.pending.drain(..).partition(|(d, _)| *d <= round);
        self.pending = waiting;
        for (_, arc) in due {
            changed |= active.insert_arc(arc);
        }

        let waiting: BTreeSet<Arc> = self.pending.iter().map(|(_, a)| *a).collect();
        for arc in active.missing_arcs(net) {
            if self.excluded.contains(&arc) || waiting.contains(&arc) {
                continue;
            }
            match self.strategy {
                Strategy::BreadthFirst => {
                    active.insert_arc(arc);
                    changed = true;
                }
                Strategy::NoLoops => {
                    self.excluded.insert(arc);
                }
                Strategy::DelayedLoops(k) => {
                    self.pending.push((round + k.max(1), arc));
                    changed = true;
                }
            }
        }
        changed || !self.pending.is_empty()
    }
}
