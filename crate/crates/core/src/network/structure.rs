//! Structural queries: polytree test, d-separation, query relevance, and the
//! decomposition of the skeleton into knots (maximal multiply-connected parts).

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{Arc, BeliefNetwork, Evidence, NodeId};

/// Minimal union-find over dense indices.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// True iff the undirected skeleton of `net` has no cycle.
pub fn is_polytree(net: &BeliefNetwork) -> bool {
    is_polytree_in(net.len(), net.arcs().iter())
}

/// Acyclicity of the skeleton formed by `arcs` over nodes `0..n`.
pub fn is_polytree_in<'a>(n: usize, arcs: impl IntoIterator<Item = &'a Arc>) -> bool {
    let mut sets = DisjointSets::new(n);
    arcs.into_iter().all(|a| sets.union(a.parent.0, a.child.0))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    // Arrived from a child, travelling towards parents.
    Up,
    // Arrived from a parent.
    Down,
}

/// Nodes that are observed or have an observed descendant.
fn observed_or_ancestor(net: &BeliefNetwork, evidence: &Evidence) -> Vec<bool> {
    let mut mark = vec![false; net.len()];
    let mut queue: VecDeque<NodeId> = evidence.iter().map(|(n, _)| n).collect();
    while let Some(n) = queue.pop_front() {
        if mark[n.0] {
            continue;
        }
        mark[n.0] = true;
        queue.extend(net.parents(n).iter().copied());
    }
    mark
}

/// Active-trail search from `source`. Returns, per node, whether it was
/// reached travelling up and travelling down.
fn reach(net: &BeliefNetwork, source: NodeId, evidence: &Evidence) -> Vec<[bool; 2]> {
    let anc = observed_or_ancestor(net, evidence);
    let mut seen = vec![[false; 2]; net.len()];
    let mut queue = VecDeque::from([(source, Dir::Up)]);
    while let Some((y, d)) = queue.pop_front() {
        let slot = match d {
            Dir::Up => 0,
            Dir::Down => 1,
        };
        if seen[y.0][slot] {
            continue;
        }
        seen[y.0][slot] = true;
        let observed = evidence.contains(y);
        match d {
            Dir::Up if !observed => {
                queue.extend(net.parents(y).iter().map(|&z| (z, Dir::Up)));
                queue.extend(net.children(y).iter().map(|&z| (z, Dir::Down)));
            }
            Dir::Up => {}
            Dir::Down => {
                if !observed {
                    queue.extend(net.children(y).iter().map(|&z| (z, Dir::Down)));
                }
                if anc[y.0] {
                    queue.extend(net.parents(y).iter().map(|&z| (z, Dir::Up)));
                }
            }
        }
    }
    seen
}

/// Standard d-separation of `x` and `y` given the observed nodes of
/// `evidence` (observations on `x` or `y` themselves are ignored).
pub fn d_separated(net: &BeliefNetwork, x: NodeId, y: NodeId, evidence: &Evidence) -> bool {
    if x == y {
        return false;
    }
    let given = evidence.without(x).without(y);
    let seen = reach(net, x, &given);
    !(seen[y.0][0] || seen[y.0][1])
}

/// The nodes whose parameters or observations can influence the posterior
/// of a query node.
///
/// A node's CPT matters iff a fresh root parent attached to it would be
/// d-connected to the query; an observed node matters iff it is d-connected
/// to the query given the rest of the evidence. Nodes outside this set can be
/// ignored without changing the query's exact posterior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relevance {
    query: NodeId,
    relevant: Vec<bool>,
}

impl Relevance {
    pub fn query(&self) -> NodeId {
        self.query
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.relevant[n.0]
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.relevant.iter().enumerate().filter(|(_, r)| **r).map(|(i, _)| NodeId(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.relevant.iter().filter(|r| **r).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn relevant_set(net: &BeliefNetwork, query: NodeId, evidence: &Evidence) -> Relevance {
    let mut relevant = vec![false; net.len()];
    relevant[query.0] = true;
    if evidence.contains(query) {
        return Relevance { query, relevant };
    }
    let anc = observed_or_ancestor(net, evidence);
    let seen = reach(net, query, evidence);
    for v in net.ids() {
        let [up, down] = seen[v.0];
        let observed = evidence.contains(v);
        let cpt_matters = (up && !observed) || (down && anc[v.0]);
        let observation_matters = observed && (up || down);
        if cpt_matters || observation_matters {
            relevant[v.0] = true;
        }
    }
    Relevance { query, relevant }
}

/// A maximal multiply-connected part of a skeleton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Knot {
    pub nodes: BTreeSet<NodeId>,
    pub arcs: BTreeSet<Arc>,
}

impl Knot {
    pub fn contains_node(&self, n: NodeId) -> bool {
        self.nodes.contains(&n)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnotDecomposition {
    pub knots: Vec<Knot>,
}

impl KnotDecomposition {
    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    /// Index of the knot containing `n`, if any.
    pub fn knot_of(&self, n: NodeId) -> Option<usize> {
        self.knots.iter().position(|k| k.nodes.contains(&n))
    }
}

pub fn find_knots(net: &BeliefNetwork) -> KnotDecomposition {
    find_knots_in(&net.arcs())
}

/// Knots of the skeleton spanned by `arcs`: biconnected components that
/// contain a cycle, merged when they share a node.
pub fn find_knots_in(arcs: &[Arc]) -> KnotDecomposition {
    // Dense relabelling of the nodes touched by `arcs`.
    let mut local: HashMap<NodeId, usize> = HashMap::new();
    let mut ids: Vec<NodeId> = Vec::new();
    for a in arcs {
        for n in [a.parent, a.child] {
            local.entry(n).or_insert_with(|| {
                ids.push(n);
                ids.len() - 1
            });
        }
    }
    let n = ids.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, a) in arcs.iter().enumerate() {
        let (u, v) = (local[&a.parent], local[&a.child]);
        adj[u].push((v, e));
        adj[v].push((u, e));
    }

    // Iterative Tarjan biconnected components over edges.
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    let mut edge_stack: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        // (node, edge used to enter, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        while let Some(&mut (u, via, ref mut pos)) = stack.last_mut() {
            if *pos < adj[u].len() {
                let (v, e) = adj[u][*pos];
                *pos += 1;
                if e == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    edge_stack.push(e);
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, e, 0));
                } else if disc[v] < disc[u] {
                    edge_stack.push(e);
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] >= disc[p] {
                        let mut comp = Vec::new();
                        while let Some(e) = edge_stack.pop() {
                            comp.push(e);
                            if e == via {
                                break;
                            }
                        }
                        components.push(comp);
                    }
                }
            }
        }
    }

    // A simple-graph block with two or more edges contains a cycle.
    let cyclic: Vec<Vec<usize>> = components.into_iter().filter(|c| c.len() >= 2).collect();
    let mut sets = DisjointSets::new(n);
    for comp in &cyclic {
        let first = local[&arcs[comp[0]].parent];
        for &e in comp {
            sets.union(first, local[&arcs[e].parent]);
            sets.union(first, local[&arcs[e].child]);
        }
    }
    let mut by_root: std::collections::BTreeMap<NodeId, Knot> = Default::default();
    for comp in &cyclic {
        let root = ids[sets.find(local[&arcs[comp[0]].parent])];
        let knot = by_root
            .entry(root)
            .or_insert_with(|| Knot { nodes: BTreeSet::new(), arcs: BTreeSet::new() });
        for &e in comp {
            knot.arcs.insert(arcs[e]);
            knot.nodes.insert(arcs[e].parent);
            knot.nodes.insert(arcs[e].child);
        }
    }
    let mut knots: Vec<Knot> = by_root.into_values().collect();
    knots.sort_by_key(|k| *k.nodes.iter().next().unwrap());
    KnotDecomposition { knots }
}
