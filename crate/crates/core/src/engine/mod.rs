//! Anytime interval inference: one-pass propagation toward the query over an
//! active set that grows between iterations.

mod active;
mod cache;
pub(crate) mod messages;
mod walk;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use active::{ActiveSet, Expander, Strategy, DEFAULT_DELAY};
pub use cache::{Message, MessageCache, MessageKind};
pub use messages::{bel_hat, lambda_hat, lambda_msg, pi_hat, pi_msg};

use crate::interval::{IntervalError, IntervalVector};
use crate::loops::{ConditionedKnot, KnotTarget, DEFAULT_INSTANCE_CAP};
use crate::network::{BeliefNetwork, Evidence, Knot, NetworkError, NodeId, Relevance, relevant_set};
use walk::Walker;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("conflicting evidence: the observations have probability zero")]
    ConflictingEvidence,
    #[error("cutset has {instances} instances, above the cap of {cap}")]
    InstanceCap { instances: f64, cap: usize },
    #[error("interval arithmetic failed: {0}")]
    Interval(IntervalError),
    #[error("knot is not a whole knot of the relevant part of the active set")]
    KnotNotContained,
}

impl From<IntervalError> for EngineError {
    fn from(e: IntervalError) -> Self {
        match e {
            IntervalError::Degenerate => EngineError::ConflictingEvidence,
            other => EngineError::Interval(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Largest number of cutset instances a single knot may need.
    pub instance_cap: usize,
    /// Reuse messages whose inputs did not change since the last pass.
    pub caching: bool,
    /// Evaluate cutset instances on the rayon pool.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { instance_cap: DEFAULT_INSTANCE_CAP, caching: true, parallel: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Greater,
    Less,
}

/// When the anytime loop may stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    /// Every state's interval is at most this wide.
    TargetWidth(f64),
    /// Decides `P(state) > p` (or `< p`): stops once the interval for the
    /// state lies entirely on one side of `p`.
    Threshold { state: usize, direction: Direction, p: f64 },
}

impl StopCriterion {
    /// `Some(verdict)` once the criterion is met. For a width target the
    /// verdict is always true; for a threshold it is the truth of the test.
    pub fn check(&self, bel: &IntervalVector) -> Option<bool> {
        match *self {
            StopCriterion::TargetWidth(w) => (bel.width() <= w).then_some(true),
            StopCriterion::Threshold { state, direction, p } => {
                let iv = bel[state];
                let above = iv.lo() > p;
                let below = iv.hi() < p;
                match direction {
                    Direction::Greater if above || below => Some(above),
                    Direction::Less if above || below => Some(below),
                    _ => None,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    /// The stop criterion was met.
    Satisfied,
    /// The active set stopped growing first.
    Saturated,
    /// Time or iteration budget ran out first.
    BudgetExhausted,
}

impl QueryStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            QueryStatus::Satisfied => 0,
            QueryStatus::Saturated => 2,
            QueryStatus::BudgetExhausted => 3,
        }
    }
}

impl fmt::Display for QueryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryStatus::Satisfied => "satisfied",
            QueryStatus::Saturated => "saturated",
            QueryStatus::BudgetExhausted => "budget_exhausted",
        })
    }
}

/// Limits on the anytime loop; checked between iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub time: Option<Duration>,
    pub max_iterations: Option<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn with_time(time: Duration) -> Self {
        Budget { time: Some(time), max_iterations: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub bel: IntervalVector,
    pub status: QueryStatus,
    pub verdict: Option<bool>,
    pub iterations: usize,
    /// Active set size at each iteration.
    pub active_nodes: Vec<usize>,
    /// Result width at each iteration.
    pub widths: Vec<f64>,
    pub elapsed: Vec<Duration>,
    /// Belief interval at each iteration.
    pub history: Vec<IntervalVector>,
    /// Node-local message computations performed over the whole query.
    pub node_visits: u64,
    pub final_active: ActiveSet,
}

impl QueryResult {
    pub fn width(&self) -> f64 {
        self.bel.width()
    }

    pub fn total_elapsed(&self) -> Duration {
        self.elapsed.iter().sum()
    }
}

/// Inference state for one query: evidence, relevance, and the message cache
/// that survives between iterations.
pub struct Engine<'a> {
    net: &'a BeliefNetwork,
    query: NodeId,
    evidence: Evidence,
    relevance: Relevance,
    config: EngineConfig,
    cache: MessageCache,
    visits: u64,
}

impl<'a> Engine<'a> {
    pub fn new(
        net: &'a BeliefNetwork,
        query: NodeId,
        evidence: Evidence,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        if query.0 >= net.len() {
            return Err(NetworkError::UnknownNode(query.to_string()).into());
        }
        evidence.validate(net)?;
        let relevance = relevant_set(net, query, &evidence);
        Ok(Engine { net, query, evidence, relevance, config, cache: MessageCache::new(), visits: 0 })
    }

    pub fn query(&self) -> NodeId {
        self.query
    }

    pub fn relevance(&self) -> &Relevance {
        &self.relevance
    }

    pub fn node_visits(&self) -> u64 {
        self.visits
    }

    pub fn cache(&self) -> &MessageCache {
        &self.cache
    }

    fn walker<'s>(&'s mut self, active: &'s ActiveSet) -> Walker<'s> {
        assert_eq!(active.query(), self.query, "active set belongs to another query");
        Walker::new(
            self.net,
            &self.evidence,
            &self.relevance,
            &self.config,
            &mut self.cache,
            &mut self.visits,
            active,
        )
    }

    /// Belief interval of the query over `active`.
    pub fn propagate(&mut self, active: &ActiveSet) -> Result<IntervalVector, EngineError> {
        let q = self.query;
        self.walker(active).belief(q)
    }

    /// Conditions `knot`, which must be a whole knot of the active graph
    /// restricted to nodes relevant to the query.
    pub fn condition_knot(
        &mut self,
        active: &ActiveSet,
        knot: &Knot,
        target: KnotTarget,
    ) -> Result<ConditionedKnot, EngineError> {
        if !knot.nodes.iter().all(|n| active.contains(*n)) || !knot.arcs.iter().all(|a| active.has_arc(*a)) {
            return Err(EngineError::KnotNotContained);
        }
        self.walker(active).condition_with_table(knot, target)
    }

    /// The anytime loop: propagate, test the stop criterion, grow the active
    /// set, repeat.
    pub fn run(&mut self, strategy: Strategy, stop: StopCriterion, budget: Budget) -> Result<QueryResult, EngineError> {
        let start = Instant::now();
        let relevance = self.relevance.clone();
        let mut active = ActiveSet::new(self.query);
        let mut expander = Expander::new(strategy);
        let mut active_nodes = Vec::new();
        let mut widths = Vec::new();
        let mut elapsed = Vec::new();
        let mut history = Vec::new();
        let visits_before = self.visits;
        loop {
            let t0 = Instant::now();
            let bel = self.propagate(&active)?;
            active_nodes.push(active.len());
            widths.push(bel.width());
            elapsed.push(t0.elapsed());
            history.push(bel.clone());

            let verdict = stop.check(&bel);
            let status = if verdict.is_some() {
                Some(QueryStatus::Satisfied)
            } else if !expander.expand(&mut active, self.net, &relevance) {
                Some(QueryStatus::Saturated)
            } else if budget.time.is_some_and(|t| start.elapsed() >= t)
                || budget.max_iterations.is_some_and(|m| history.len() >= m)
            {
                Some(QueryStatus::BudgetExhausted)
            } else {
                None
            };
            if let Some(status) = status {
                return Ok(QueryResult {
                    bel,
                    status,
                    verdict,
                    iterations: history.len(),
                    active_nodes,
                    widths,
                    elapsed,
                    history,
                    node_visits: self.visits - visits_before,
                    final_active: active,
                });
            }
        }
    }
}

/// Belief interval of `query` over one fixed active set.
pub fn propagate(
    net: &BeliefNetwork,
    active: &ActiveSet,
    evidence: &Evidence,
) -> Result<IntervalVector, EngineError> {
    Engine::new(net, active.query(), evidence.clone(), EngineConfig::default())?.propagate(active)
}

/// Runs the anytime loop for `query` with the default engine settings.
pub fn answer_query(
    net: &BeliefNetwork,
    query: NodeId,
    evidence: &Evidence,
    strategy: Strategy,
    stop: StopCriterion,
    budget: Budget,
) -> Result<QueryResult, EngineError> {
    Engine::new(net, query, evidence.clone(), EngineConfig::default())?.run(strategy, stop, budget)
}
