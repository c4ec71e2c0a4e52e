//! Output record types and the writers for line-delimited records and CSV tables.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{confusion, AgentKey, AnalysisError, ConfusionMatrix2x2, TypeHistogram};
use crate::baselines::BaselineVerdict;
use crate::graph::{FirstOrderSituation, InteractionGraph, SecondOrderSituation};
use crate::scenario::RoadUserType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationRecord {
    pub scenario_id: String,
    pub order: u8,
    pub ego_id: String,
    pub first_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_id: Option<String>,
    pub r_first: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_second: Option<f64>,
}

impl SituationRecord {
    pub fn first_order(scenario_id: &str, ego: &str, first: &str, r_first: f64) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            order: 1,
            ego_id: ego.into(),
            first_id: first.into(),
            second_id: None,
            r_first,
            r_second: None,
        }
    }

    pub fn from_first(scenario_id: &str, s: &FirstOrderSituation) -> Self {
        Self::first_order(scenario_id, &s.ego_id, &s.first_id, s.r_first)
    }

    pub fn from_second(scenario_id: &str, s: &SecondOrderSituation) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            order: 2,
            ego_id: s.ego_id.clone(),
            first_id: s.first_id.clone(),
            second_id: Some(s.second_id.clone()),
            r_first: s.r_first,
            r_second: Some(s.r_second),
        }
    }

    pub fn participants(&self) -> impl Iterator<Item = &str> {
        [
            Some(self.ego_id.as_str()),
            Some(self.first_id.as_str()),
            self.second_id.as_deref(),
        ]
        .into_iter()
        .flatten()
    }

    pub fn sort_key(&self) -> (&str, u8, &str, &str, &str) {
        (
            &self.scenario_id,
            self.order,
            &self.ego_id,
            &self.first_id,
            self.second_id.as_deref().unwrap_or(""),
        )
    }
}

/// One entry of a per-scenario risk matrix dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub scenario_id: String,
    pub ego_id: String,
    pub other_id: String,
    pub risk: f64,
}

impl RiskRecord {
    pub fn from_graph(graph: &InteractionGraph) -> Vec<Self> {
        graph
            .edges()
            .iter()
            .map(|e| Self {
                scenario_id: graph.scenario_id().to_string(),
                ego_id: e.ego_id.clone(),
                other_id: e.other_id.clone(),
                risk: e.risk,
            })
            .collect()
    }
}

/// Agent types per scenario, needed to build type histograms from situation files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub scenario_id: String,
    pub agent_id: String,
    #[serde(rename = "type")]
    pub kind: RoadUserType,
    pub dimensions_defaulted: bool,
    pub late_start: bool,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), idx + 1),
            )
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Confusion matrices of the risk filter (first order, second order, either)
/// against the Kalman and TTP baselines.
///
/// The universe is every agent with a baseline record. TTP comparisons are
/// restricted to agents whose source carries the flag and are omitted when none does.
pub fn confusion_tables(
    situations: &[SituationRecord],
    baselines: &[BaselineVerdict],
) -> Result<Vec<(String, ConfusionMatrix2x2)>, AnalysisError> {
    let key = |s: &str, a: &str| -> AgentKey { (s.to_string(), a.to_string()) };
    let universe: BTreeSet<AgentKey> = baselines
        .iter()
        .map(|b| key(&b.scenario_id, &b.agent_id))
        .collect();
    let users = |order: Option<u8>| -> BTreeSet<AgentKey> {
        situations
            .iter()
            .filter(|s| order.is_none_or(|o| s.order == o))
            .flat_map(|s| s.participants().map(|p| key(&s.scenario_id, p)))
            .collect()
    };
    let kalman: BTreeSet<AgentKey> = baselines
        .iter()
        .filter(|b| b.kalman_valuable)
        .map(|b| key(&b.scenario_id, &b.agent_id))
        .collect();
    let ttp_universe: BTreeSet<AgentKey> = baselines
        .iter()
        .filter(|b| b.ttp_valuable.is_some())
        .map(|b| key(&b.scenario_id, &b.agent_id))
        .collect();
    let ttp: BTreeSet<AgentKey> = baselines
        .iter()
        .filter(|b| b.ttp_valuable == Some(true))
        .map(|b| key(&b.scenario_id, &b.agent_id))
        .collect();

    let mut out = Vec::new();
    for (label, order) in [
        ("first_order", Some(1)),
        ("second_order", Some(2)),
        ("any_order", None),
    ] {
        let risk = users(order);
        out.push((
            format!("{label}_vs_kalman"),
            confusion(&risk, &kalman, &universe)?,
        ));
        if !ttp_universe.is_empty() {
            let restricted: BTreeSet<AgentKey> =
                risk.intersection(&ttp_universe).cloned().collect();
            out.push((
                format!("{label}_vs_ttp"),
                confusion(&restricted, &ttp, &ttp_universe)?,
            ));
        }
    }
    Ok(out)
}

pub fn write_confusion_csv(path: &Path, tables: &[(String, ConfusionMatrix2x2)]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["comparison", "risk", "baseline", "count", "percent"])?;
    for (label, m) in tables {
        let pct = m.percentages();
        let cells = [
            ("not_valuable", "not_valuable", m.not_not, pct[0]),
            ("not_valuable", "valuable", m.not_val, pct[1]),
            ("valuable", "not_valuable", m.val_not, pct[2]),
            ("valuable", "valuable", m.val_val, pct[3]),
        ];
        for (risk, baseline, count, p) in cells {
            w.write_record([
                label.as_str(),
                risk,
                baseline,
                &count.to_string(),
                &format!("{p:.6}"),
            ])?;
        }
    }
    w.flush()
}

pub fn write_histogram_csv(path: &Path, histograms: &[(u8, &TypeHistogram)]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["order", "types", "count", "percent"])?;
    for (order, h) in histograms {
        for (key, count) in &h.counts {
            w.write_record([
                order.to_string(),
                key.to_string(),
                count.to_string(),
                format!("{:.6}", h.percentage(key)),
            ])?;
        }
    }
    w.flush()
}

/// Agent type lookup keyed by `(scenario_id, agent_id)`.
pub fn type_index(agents: &[AgentRecord]) -> HashMap<AgentKey, RoadUserType> {
    agents
        .iter()
        .map(|a| ((a.scenario_id.clone(), a.agent_id.clone()), a.kind))
        .collect()
}
