//! Per-scenario interaction graphs and retrieval of first- and second-order
//! high-risk situations.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{FilterConfig, SecondOrderRule};
use crate::path::extract_path;
use crate::prediction::AgentForecast;
use crate::risk::{
    forecast_scenario, integrate_risk, pair_collision_profile, sum_profiles, survival_curve,
    CollisionProfile, RiskError, SurvivalMode,
};
use crate::scenario::{initial_state, Scenario, Track};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("edge references unknown node `{0}`")]
    UnknownNode(String),
    #[error("self edge on `{0}`")]
    SelfEdge(String),
    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),
    #[error("risk on `{0}` -> `{1}` is not a finite non-negative number")]
    BadRisk(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEdge {
    pub ego_id: String,
    pub other_id: String,
    pub risk: f64,
}

/// Agents as nodes, directed risk edges between eligible pairs.
///
/// Node order is the scenario's track order and fixes the order of every
/// retrieval result.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    scenario_id: String,
    nodes: Vec<String>,
    edges: Vec<RiskEdge>,
    /// Row-major `nodes × nodes`; `None` where no edge exists.
    matrix: Vec<Option<f64>>,
}

impl InteractionGraph {
    pub fn new(
        scenario_id: impl Into<String>,
        nodes: Vec<String>,
        edges: Vec<RiskEdge>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        let n = nodes.len();
        let mut matrix = vec![None; n * n];
        for e in &edges {
            let lookup = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
            };
            let (i, j) = (lookup(&e.ego_id)?, lookup(&e.other_id)?);
            if i == j {
                return Err(GraphError::SelfEdge(e.ego_id.clone()));
            }
            if !(e.risk.is_finite() && e.risk >= 0.0) {
                return Err(GraphError::BadRisk(e.ego_id.clone(), e.other_id.clone()));
            }
            let slot = &mut matrix[i * n + j];
            if slot.is_some() {
                return Err(GraphError::DuplicateEdge(
                    e.ego_id.clone(),
                    e.other_id.clone(),
                ));
            }
            *slot = Some(e.risk);
        }
        Ok(Self {
            scenario_id: scenario_id.into(),
            nodes,
            edges,
            matrix,
        })
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RiskEdge] {
        &self.edges
    }

    fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.matrix[i * self.nodes.len() + j]
    }

    pub fn risk(&self, ego_id: &str, other_id: &str) -> Option<f64> {
        let i = self.nodes.iter().position(|n| n == ego_id)?;
        let j = self.nodes.iter().position(|n| n == other_id)?;
        self.at(i, j)
    }

    /// For every node, the targets of its edges at or above `r_thr`, in node order.
    fn high_risk_adjacency(&self, r_thr: f64) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| self.at(i, j).is_some_and(|r| r >= r_thr))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderSituation {
    pub ego_id: String,
    pub first_id: String,
    pub r_first: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderSituation {
    pub ego_id: String,
    pub first_id: String,
    pub second_id: String,
    pub r_first: f64,
    pub r_second: f64,
}

/// Agent features the eligibility rule looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSummary {
    pub speed: f64,
    pub path_length: f64,
}

impl MotionSummary {
    fn from_forecast(f: &AgentForecast) -> Self {
        Self {
            speed: f.initial.speed,
            path_length: f.path.length(),
        }
    }

    /// Nearly stationary or moving along a short recorded path.
    pub fn is_negligible(&self, config: &FilterConfig) -> bool {
        self.speed < config.v_min || self.path_length < config.path_min
    }
}

fn eligible(a: &MotionSummary, b: &MotionSummary, config: &FilterConfig) -> bool {
    !(a.is_negligible(config) && b.is_negligible(config))
}

/// A pair is excluded when both agents are negligible movers.
pub fn eligible_pair(a: &Track, b: &Track, config: &FilterConfig) -> bool {
    let summary = |t: &Track| {
        initial_state(t).ok().map(|s| MotionSummary {
            speed: s.speed,
            path_length: extract_path(t, config.prediction.eps_dedupe).length(),
        })
    };
    match (summary(a), summary(b)) {
        (Some(sa), Some(sb)) => eligible(&sa, &sb, config),
        _ => false,
    }
}

/// Computes risk for every ordered eligible pair of the scenario.
///
/// Pair profiles are evaluated once per unordered pair and shared by both
/// orientations and by the survival totals.
pub fn build_graph(
    scenario: &Scenario,
    config: &FilterConfig,
) -> Result<InteractionGraph, RiskError> {
    let forecasts = forecast_scenario(scenario, config);
    let predicted: Vec<usize> = (0..forecasts.len())
        .filter(|&i| forecasts[i].is_some())
        .collect();
    let summaries: Vec<Option<MotionSummary>> = forecasts
        .iter()
        .map(|f| f.as_ref().map(MotionSummary::from_forecast))
        .collect();
    let is_eligible = |i: usize, j: usize| match (&summaries[i], &summaries[j]) {
        (Some(a), Some(b)) => eligible(a, b, config),
        _ => false,
    };
    let need_all = config.risk.survival_mode == SurvivalMode::AllAgents;

    let pairs: Vec<(usize, usize)> = predicted
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| predicted[a + 1..].iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| need_all || is_eligible(i, j))
        .collect();

    let prediction = |i: usize| &forecasts[i].as_ref().expect("predicted agent").prediction;
    let profiles: Vec<CollisionProfile> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (prediction(i), prediction(j));
            pair_collision_profile(a, b, config.risk.area_for(a, b))
        })
        .collect::<Result<_, _>>()?;
    let profile_of: HashMap<(usize, usize), &CollisionProfile> =
        pairs.iter().copied().zip(profiles.iter()).collect();
    let profile = |i: usize, j: usize| profile_of[&(i.min(j), i.max(j))];

    let steps = config.prediction.step_count() + 1;
    let dt = config.prediction.dt;
    let survivals: HashMap<usize, _> = if need_all {
        predicted
            .iter()
            .map(|&e| {
                let others = predicted
                    .iter()
                    .filter(|&&o| o != e)
                    .map(|&o| profile(e, o));
                sum_profiles(steps, dt, others)
                    .map(|total| (e, survival_curve(&total, config.risk.tau0_inv)))
            })
            .collect::<Result<_, _>>()?
    } else {
        HashMap::new()
    };

    let mut edges = Vec::new();
    let n = scenario.tracks.len();
    for e in 0..n {
        for o in 0..n {
            if e == o || !is_eligible(e, o) {
                continue;
            }
            let pair = profile(e, o);
            let risk = match survivals.get(&e) {
                Some(surv) => integrate_risk(pair, surv)?,
                None => integrate_risk(pair, &survival_curve(pair, config.risk.tau0_inv))?,
            };
            edges.push(RiskEdge {
                ego_id: scenario.tracks[e].user.id.clone(),
                other_id: scenario.tracks[o].user.id.clone(),
                risk,
            });
        }
    }

    let nodes = scenario.tracks.iter().map(|t| t.user.id.clone()).collect();
    Ok(
        InteractionGraph::new(scenario.scenario_id.clone(), nodes, edges)
            .expect("graph built from a validated scenario"),
    )
}

/// Every ordered pair whose edge risk is at least `r_thr`.
pub fn retrieve_first_order(graph: &InteractionGraph, r_thr: f64) -> Vec<FirstOrderSituation> {
    let adjacency = graph.high_risk_adjacency(r_thr);
    adjacency
        .iter()
        .enumerate()
        .flat_map(|(e, firsts)| {
            firsts.iter().map(move |&f| FirstOrderSituation {
                ego_id: graph.nodes[e].clone(),
                first_id: graph.nodes[f].clone(),
                r_first: graph.at(e, f).unwrap_or_default(),
            })
        })
        .collect()
}

/// Chain-rule second-order retrieval: `(ego, first, second)` with both
/// `ego→first` and `first→second` at or above `r_thr`.
pub fn retrieve_second_order(graph: &InteractionGraph, r_thr: f64) -> Vec<SecondOrderSituation> {
    retrieve_second_order_with(graph, r_thr, SecondOrderRule::Chain)
}

/// Second-order retrieval by joining high-risk edges on the shared node.
/// Output order is lexicographic in node order of (ego, first, second).
pub fn retrieve_second_order_with(
    graph: &InteractionGraph,
    r_thr: f64,
    rule: SecondOrderRule,
) -> Vec<SecondOrderSituation> {
    let adjacency = graph.high_risk_adjacency(r_thr);
    let mut out = Vec::new();
    for (e, firsts) in adjacency.iter().enumerate() {
        for &f in firsts {
            let (anchor, seconds) = match rule {
                SecondOrderRule::Chain => (f, &adjacency[f]),
                SecondOrderRule::EgoCentric => (e, firsts),
            };
            for &s in seconds {
                if s == e || s == f {
                    continue;
                }
                out.push(SecondOrderSituation {
                    ego_id: graph.nodes[e].clone(),
                    first_id: graph.nodes[f].clone(),
                    second_id: graph.nodes[s].clone(),
                    r_first: graph.at(e, f).unwrap_or_default(),
                    r_second: graph.at(anchor, s).unwrap_or_default(),
                });
            }
        }
    }
    out
}

/// Keeps the first of each group of situations that describe the same agents
/// in the same roles: reversed chains under [`SecondOrderRule::Chain`], swapped
/// partners under [`SecondOrderRule::EgoCentric`].
pub fn dedupe_second_order(
    situations: Vec<SecondOrderSituation>,
    rule: SecondOrderRule,
) -> Vec<SecondOrderSituation> {
    let mut seen = HashSet::new();
    situations
        .into_iter()
        .filter(|s| {
            let key = match rule {
                SecondOrderRule::Chain => {
                    let (lo, hi) = if s.ego_id <= s.second_id {
                        (&s.ego_id, &s.second_id)
                    } else {
                        (&s.second_id, &s.ego_id)
                    };
                    (lo.clone(), s.first_id.clone(), hi.clone())
                }
                SecondOrderRule::EgoCentric => {
                    let (lo, hi) = if s.first_id <= s.second_id {
                        (&s.first_id, &s.second_id)
                    } else {
                        (&s.second_id, &s.first_id)
                    };
                    (s.ego_id.clone(), lo.clone(), hi.clone())
                }
            };
            seen.insert(key)
        })
        .collect()
}

/// Every agent taking part in any retrieved situation.
pub fn valuable_users(
    first: &[FirstOrderSituation],
    second: &[SecondOrderSituation],
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in first {
        out.insert(s.ego_id.clone());
        out.insert(s.first_id.clone());
    }
    for s in second {
        out.insert(s.ego_id.clone());
        out.insert(s.first_id.clone());
        out.insert(s.second_id.clone());
    }
    out
}
