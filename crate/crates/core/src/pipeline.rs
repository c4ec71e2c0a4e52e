//! Batch driver: scenarios in, risk matrices, situations, baselines and
//! aggregate reports out.
//!
//! Everything except `timings.jsonl` is a pure function of the inputs and the
//! configuration. Records are sorted before writing, so worker count and
//! scheduling never change the output bytes.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{histogram, AnalysisError, TypeHistogram};
use crate::baselines::{evaluate_baselines, BaselineVerdict};
use crate::config::FilterConfig;
use crate::graph::{
    build_graph, dedupe_second_order, retrieve_first_order, retrieve_second_order_with,
};
use crate::report::{
    confusion_tables, type_index, write_confusion_csv, write_histogram_csv, write_jsonl,
    AgentRecord, RiskRecord, SituationRecord,
};
use crate::risk::RiskError;
use crate::scenario::{initial_state, read_scenarios, Scenario};

pub const RISK_MATRIX_FILE: &str = "risk_matrix.jsonl";
pub const SITUATIONS_FILE: &str = "situations.jsonl";
pub const BASELINES_FILE: &str = "baselines.jsonl";
pub const AGENTS_FILE: &str = "agents.jsonl";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

trait IoContext<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, PipelineError>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Io {
            context: what(),
            source,
        })
    }
}

/// Everything derived from one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub scenario_id: String,
    pub risks: Vec<RiskRecord>,
    pub situations: Vec<SituationRecord>,
    pub baselines: Vec<BaselineVerdict>,
    pub agents: Vec<AgentRecord>,
}

pub fn process_scenario(
    scenario: &Scenario,
    config: &FilterConfig,
) -> Result<ScenarioOutcome, RiskError> {
    let graph = build_graph(scenario, config)?;
    let id = scenario.scenario_id.as_str();
    let mut second = retrieve_second_order_with(&graph, config.r_thr, config.second_order_rule);
    if config.dedupe_chains {
        second = dedupe_second_order(second, config.second_order_rule);
    }
    let situations = retrieve_first_order(&graph, config.r_thr)
        .iter()
        .map(|s| SituationRecord::from_first(id, s))
        .chain(second.iter().map(|s| SituationRecord::from_second(id, s)))
        .collect();
    let agents = scenario
        .tracks
        .iter()
        .map(|t| AgentRecord {
            scenario_id: id.to_string(),
            agent_id: t.user.id.clone(),
            kind: t.user.kind,
            dimensions_defaulted: t.user.dimensions_defaulted,
            late_start: initial_state(t).map_or(true, |s| s.late_start),
        })
        .collect();
    Ok(ScenarioOutcome {
        scenario_id: id.to_string(),
        risks: RiskRecord::from_graph(&graph),
        situations,
        baselines: evaluate_baselines(scenario, config),
        agents,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedRecord {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub input_files: Vec<String>,
    pub scenarios_processed: usize,
    pub scenarios_skipped: usize,
    pub agents: usize,
    pub risk_edges: usize,
    pub first_order_situations: usize,
    pub second_order_situations: usize,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    config: Vec<&'a str>,
    outputs: [&'static str; 7],
}

#[derive(Debug, Serialize)]
struct Timing {
    scenario_id: String,
    agents: usize,
    micros: u128,
}

/// Interchange files in `dir`: every `*.jsonl` / `*.ndjson`, sorted by name.
pub fn list_inputs(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("jsonl") | Some("ndjson")
                )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Runs the full pipeline over `input_dir` and writes every report into `output_dir`.
///
/// Unreadable scenarios are logged, skipped and counted in the summary.
/// `workers = None` uses rayon's default pool size.
pub fn run_pipeline(
    input_dir: &Path,
    config: &FilterConfig,
    output_dir: &Path,
    workers: Option<usize>,
) -> Result<RunSummary, PipelineError> {
    let inputs = list_inputs(input_dir).context(|| format!("listing {}", input_dir.display()))?;
    fs::create_dir_all(output_dir).context(|| format!("creating {}", output_dir.display()))?;

    let mut skipped = Vec::new();
    let mut scenarios = Vec::new();
    let mut seen_ids = HashSet::new();
    for path in &inputs {
        let label = file_label(path);
        let file = File::open(path).context(|| format!("opening {}", path.display()))?;
        for parsed in read_scenarios(BufReader::new(file), &config.dimensions) {
            match parsed {
                Ok(s) if !seen_ids.insert(s.scenario_id.clone()) => {
                    warn!("{label}: duplicate scenario `{}` skipped", s.scenario_id);
                    skipped.push(SkippedRecord {
                        file: label.clone(),
                        reason: format!("duplicate scenario_id `{}`", s.scenario_id),
                    });
                }
                Ok(s) => scenarios.push(s),
                Err(e) => {
                    warn!("{label}: {e}");
                    skipped.push(SkippedRecord {
                        file: label.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    info!(
        "{} scenarios from {} files ({} skipped while reading)",
        scenarios.len(),
        inputs.len(),
        skipped.len()
    );

    let work = || {
        scenarios
            .par_iter()
            .map(|s| {
                let started = Instant::now();
                let outcome = process_scenario(s, config);
                let timing = Timing {
                    scenario_id: s.scenario_id.clone(),
                    agents: s.tracks.len(),
                    micros: started.elapsed().as_micros(),
                };
                (outcome, timing)
            })
            .collect::<Vec<_>>()
    };
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| PipelineError::Io {
                context: "building worker pool".into(),
                source: std::io::Error::other(e),
            })?
            .install(work),
        None => work(),
    };

    let mut risks = Vec::new();
    let mut situations = Vec::new();
    let mut baselines = Vec::new();
    let mut agents = Vec::new();
    let mut timings = Vec::new();
    for ((outcome, timing), scenario) in results.into_iter().zip(&scenarios) {
        match outcome {
            Ok(o) => {
                risks.extend(o.risks);
                situations.extend(o.situations);
                baselines.extend(o.baselines);
                agents.extend(o.agents);
                timings.push(timing);
            }
            Err(e) => {
                warn!("scenario `{}`: {e}", scenario.scenario_id);
                skipped.push(SkippedRecord {
                    file: scenario.scenario_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }

    // Scenario order is already the input order; sort by the documented keys
    // so that reports do not depend on file naming either.
    risks.sort_by(|a, b| {
        (&a.scenario_id, &a.ego_id, &a.other_id).cmp(&(&b.scenario_id, &b.ego_id, &b.other_id))
    });
    situations.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    baselines.sort_by(|a, b| (&a.scenario_id, &a.agent_id).cmp(&(&b.scenario_id, &b.agent_id)));
    agents.sort_by(|a, b| (&a.scenario_id, &a.agent_id).cmp(&(&b.scenario_id, &b.agent_id)));
    timings.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));

    let out = |name: &str| output_dir.join(name);
    let write_err = |name: &str| format!("writing {}", out(name).display());
    write_jsonl(&out(RISK_MATRIX_FILE), &risks).context(|| write_err(RISK_MATRIX_FILE))?;
    write_jsonl(&out(SITUATIONS_FILE), &situations).context(|| write_err(SITUATIONS_FILE))?;
    write_jsonl(&out(BASELINES_FILE), &baselines).context(|| write_err(BASELINES_FILE))?;
    write_jsonl(&out(AGENTS_FILE), &agents).context(|| write_err(AGENTS_FILE))?;
    write_jsonl(&out(TIMINGS_FILE), &timings).context(|| write_err(TIMINGS_FILE))?;

    let tables = confusion_tables(&situations, &baselines)?;
    write_confusion_csv(&out(CONFUSION_FILE), &tables).context(|| write_err(CONFUSION_FILE))?;
    let (first_hist, second_hist) = type_histograms(&situations, &agents)?;
    write_histogram_csv(&out(HISTOGRAM_FILE), &[(1, &first_hist), (2, &second_hist)])
        .context(|| write_err(HISTOGRAM_FILE))?;

    let summary = RunSummary {
        config_hash: config.hash(),
        input_files: inputs.iter().map(|p| file_label(p)).collect(),
        scenarios_processed: timings.len(),
        scenarios_skipped: skipped.len(),
        agents: agents.len(),
        risk_edges: risks.len(),
        first_order_situations: situations.iter().filter(|s| s.order == 1).count(),
        second_order_situations: situations.iter().filter(|s| s.order == 2).count(),
        skipped,
    };
    let config_text = config.to_kv_string();
    let manifest = Manifest {
        summary: &summary,
        config: config_text.lines().collect(),
        outputs: [
            RISK_MATRIX_FILE,
            SITUATIONS_FILE,
            BASELINES_FILE,
            AGENTS_FILE,
            CONFUSION_FILE,
            HISTOGRAM_FILE,
            TIMINGS_FILE,
        ],
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out(MANIFEST_FILE), manifest_json + "\n").context(|| write_err(MANIFEST_FILE))?;
    info!(
        "processed {} scenarios, {} skipped, {} first-order and {} second-order situations",
        summary.scenarios_processed,
        summary.scenarios_skipped,
        summary.first_order_situations,
        summary.second_order_situations
    );
    Ok(summary)
}

/// First-order and second-order type histograms.
pub fn type_histograms(
    situations: &[SituationRecord],
    agents: &[AgentRecord],
) -> Result<(TypeHistogram, TypeHistogram), AnalysisError> {
    let types = type_index(agents);
    let by_order = |o: u8| -> Vec<SituationRecord> {
        situations
            .iter()
            .filter(|s| s.order == o)
            .cloned()
            .collect()
    };
    Ok((
        histogram(&by_order(1), &types)?,
        histogram(&by_order(2), &types)?,
    ))
}
