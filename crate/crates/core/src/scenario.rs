//! Neutral scenario data model and the line-delimited interchange format.
//!
//! One record per line, JSON encoded:
//!
//! ```text
//! {"scenario_id": "...", "sample_period_s": 0.1, "tracks": [
//!   {"id": "...", "type": "car", "length_m": 4.8, "width_m": 2.1, "ttp": 1,
//!    "points": [{"t_s": 0.0, "x_m": 0.0, "y_m": 0.0, "heading_rad": 0.0,
//!                "speed_mps": 5.0, "valid": 1}, ...]}]}
//! ```
//!
//! `length_m`, `width_m` and `ttp` may be omitted. Missing dimensions fall back
//! to per-type defaults and the agent is flagged.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::normalize_angle;

/// Times within this distance of zero count as "timestep zero".
const T_ZERO_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: malformed record at `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("scenario `{scenario_id}` failed validation: {}", violations.join("; "))]
    Validation {
        scenario_id: String,
        violations: Vec<String>,
    },
    #[error("track `{0}` has no valid points")]
    NoValidPoints(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadUserType {
    Car,
    Pedestrian,
    Bicycle,
}

impl RoadUserType {
    pub const ALL: [RoadUserType; 3] = [Self::Car, Self::Pedestrian, Self::Bicycle];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Car => "car",
            Self::Pedestrian => "pedestrian",
            Self::Bicycle => "bicycle",
        }
    }
}

impl fmt::Display for RoadUserType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical footprint of a road user, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions {
    pub length: f64,
    pub width: f64,
}

/// Footprints used when the source record omits an agent's size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultDimensions {
    pub car: Dimensions,
    pub pedestrian: Dimensions,
    pub bicycle: Dimensions,
}

impl Default for DefaultDimensions {
    fn default() -> Self {
        Self {
            car: Dimensions {
                length: 4.8,
                width: 2.1,
            },
            pedestrian: Dimensions {
                length: 0.8,
                width: 0.8,
            },
            bicycle: Dimensions {
                length: 1.8,
                width: 0.7,
            },
        }
    }
}

impl DefaultDimensions {
    pub fn for_type(&self, kind: RoadUserType) -> Dimensions {
        match kind {
            RoadUserType::Car => self.car,
            RoadUserType::Pedestrian => self.pedestrian,
            RoadUserType::Bicycle => self.bicycle,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadUser {
    pub id: String,
    pub kind: RoadUserType,
    pub length: f64,
    pub width: f64,
    /// Set when length/width were absent in the source and filled from defaults.
    pub dimensions_defaulted: bool,
}

impl RoadUser {
    pub fn footprint_area(&self) -> f64 {
        self.length * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub valid: bool,
}

impl TrackPoint {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub user: RoadUser,
    pub points: Vec<TrackPoint>,
    pub ttp_flag: Option<bool>,
}

impl Track {
    pub fn id(&self) -> &str {
        &self.user.id
    }

    pub fn kind(&self) -> RoadUserType {
        self.user.kind
    }

    pub fn valid_points(&self) -> impl Iterator<Item = &TrackPoint> + '_ {
        self.points.iter().filter(|p| p.valid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub sample_period: f64,
    pub tracks: Vec<Track>,
}

impl Scenario {
    pub fn track(&self, id: &str) -> Option<&Track> {
        self.tracks.iter().find(|t| t.user.id == id)
    }

    pub fn track_index(&self, id: &str) -> Option<usize> {
        self.tracks.iter().position(|t| t.user.id == id)
    }

    /// Serializes back into one interchange line (no trailing newline).
    pub fn to_record_line(&self) -> String {
        let record = ScenarioRecord {
            scenario_id: self.scenario_id.clone(),
            sample_period_s: self.sample_period,
            tracks: self
                .tracks
                .iter()
                .map(|track| TrackRecord {
                    id: track.user.id.clone(),
                    kind: track.user.kind,
                    length_m: (!track.user.dimensions_defaulted).then_some(track.user.length),
                    width_m: (!track.user.dimensions_defaulted).then_some(track.user.width),
                    ttp: track.ttp_flag.map(u8::from),
                    points: track
                        .points
                        .iter()
                        .map(|p| PointRecord {
                            t_s: p.t,
                            x_m: p.x,
                            y_m: p.y,
                            heading_rad: p.heading,
                            speed_mps: p.speed,
                            valid: u8::from(p.valid),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&record).expect("scenario record serializes")
    }
}

/// Kinematic state the predictor starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub position: Vector2<f64>,
    pub heading: f64,
    pub speed: f64,
    pub t: f64,
    /// No valid point at timestep zero; the earliest valid point was used instead.
    pub late_start: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRecord {
    scenario_id: String,
    sample_period_s: f64,
    tracks: Vec<TrackRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRecord {
    id: String,
    #[serde(rename = "type")]
    kind: RoadUserType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ttp: Option<u8>,
    points: Vec<PointRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    t_s: f64,
    x_m: f64,
    y_m: f64,
    heading_rad: f64,
    speed_mps: f64,
    valid: u8,
}

/// Parses one interchange record with default agent dimensions.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario_at(text, 1, &DefaultDimensions::default())
}

/// Parses one record; `line` is only used for error reporting.
pub fn parse_scenario_at(
    text: &str,
    line: usize,
    defaults: &DefaultDimensions,
) -> Result<Scenario, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text.trim());
    let record: ScenarioRecord =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ScenarioError::Parse {
            line,
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    de.end().map_err(|e| ScenarioError::Parse {
        line,
        field: ".".into(),
        message: e.to_string(),
    })?;
    build_scenario(record, defaults)
}

/// Reads every non-blank line of `reader` as a scenario record.
///
/// Each entry carries its own result so one bad record does not poison the file.
pub fn read_scenarios<R: BufRead>(
    reader: R,
    defaults: &DefaultDimensions,
) -> Vec<Result<Scenario, ScenarioError>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        match line {
            Ok(line) if line.trim().is_empty() => {}
            Ok(line) => out.push(parse_scenario_at(&line, idx + 1, defaults)),
            Err(e) => {
                out.push(Err(ScenarioError::Io(e)));
                break;
            }
        }
    }
    out
}

fn build_scenario(
    record: ScenarioRecord,
    defaults: &DefaultDimensions,
) -> Result<Scenario, ScenarioError> {
    let mut violations = Vec::new();
    if record.scenario_id.is_empty() {
        violations.push("empty scenario_id".to_string());
    }
    if !(record.sample_period_s.is_finite() && record.sample_period_s > 0.0) {
        violations.push(format!(
            "sample_period_s must be > 0, got {}",
            record.sample_period_s
        ));
    }

    let mut seen = HashSet::new();
    let mut tracks = Vec::with_capacity(record.tracks.len());
    for tr in record.tracks {
        let id = tr.id;
        if !seen.insert(id.clone()) {
            violations.push(format!("duplicate id `{id}`"));
        }

        let fallback = defaults.for_type(tr.kind);
        let dimensions_defaulted = tr.length_m.is_none() || tr.width_m.is_none();
        let (length, width) = if dimensions_defaulted {
            (fallback.length, fallback.width)
        } else {
            (
                tr.length_m.unwrap_or_default(),
                tr.width_m.unwrap_or_default(),
            )
        };
        if !(length.is_finite() && length > 0.0) || !(width.is_finite() && width > 0.0) {
            violations.push(format!(
                "track `{id}`: dimensions must be positive, got {length}x{width}"
            ));
        } else if length < width {
            violations.push(format!(
                "track `{id}`: length {length} shorter than width {width}"
            ));
        }

        let ttp_flag = match tr.ttp {
            None => None,
            Some(0) => Some(false),
            Some(1) => Some(true),
            Some(v) => {
                violations.push(format!("track `{id}`: ttp must be 0 or 1, got {v}"));
                None
            }
        };

        let mut points = Vec::with_capacity(tr.points.len());
        let mut last_valid_t: Option<f64> = None;
        for (k, p) in tr.points.into_iter().enumerate() {
            let valid = match p.valid {
                0 => false,
                1 => true,
                v => {
                    violations.push(format!(
                        "track `{id}` point {k}: valid must be 0 or 1, got {v}"
                    ));
                    false
                }
            };
            let finite = [p.t_s, p.x_m, p.y_m, p.heading_rad, p.speed_mps]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                violations.push(format!("track `{id}` point {k}: non-finite value"));
                continue;
            }
            if valid {
                if p.speed_mps < 0.0 {
                    violations.push(format!(
                        "track `{id}` point {k}: negative speed {}",
                        p.speed_mps
                    ));
                }
                if let Some(prev) = last_valid_t {
                    if p.t_s <= prev {
                        violations.push(format!(
                            "track `{id}` point {k}: time {} not after {prev}",
                            p.t_s
                        ));
                    }
                }
                last_valid_t = Some(p.t_s);
            }
            points.push(TrackPoint {
                t: p.t_s,
                x: p.x_m,
                y: p.y_m,
                heading: normalize_angle(p.heading_rad),
                speed: p.speed_mps,
                valid,
            });
        }
        if last_valid_t.is_none() {
            violations.push(format!("track `{id}`: no valid points"));
        }

        tracks.push(Track {
            user: RoadUser {
                id,
                kind: tr.kind,
                length,
                width,
                dimensions_defaulted,
            },
            points,
            ttp_flag,
        });
    }

    if !violations.is_empty() {
        return Err(ScenarioError::Validation {
            scenario_id: record.scenario_id,
            violations,
        });
    }
    Ok(Scenario {
        scenario_id: record.scenario_id,
        sample_period: record.sample_period_s,
        tracks,
    })
}

/// State at timestep zero, or the earliest valid point flagged as a late start.
pub fn initial_state(track: &Track) -> Result<InitialState, ScenarioError> {
    let state = |p: &TrackPoint, late_start| InitialState {
        position: p.position(),
        heading: p.heading,
        speed: p.speed,
        t: p.t,
        late_start,
    };
    if let Some(p) = track.valid_points().find(|p| p.t.abs() <= T_ZERO_TOLERANCE) {
        return Ok(state(p, false));
    }
    track
        .valid_points()
        .next()
        .map(|p| state(p, true))
        .ok_or_else(|| ScenarioError::NoValidPoints(track.user.id.clone()))
}
