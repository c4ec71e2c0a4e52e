//! Comparison baselines: Kalman difficulty (final displacement error of a
//! constant-velocity extrapolation) and the dataset's tracks-to-predict flag.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::config::FilterConfig;
use crate::geometry::unit;
use crate::scenario::{initial_state, Scenario, Track};

/// Ground-truth position at time `t`, interpolated between valid samples.
/// Past the last sample the last position is held.
fn position_at(track: &Track, t: f64) -> Option<Vector2<f64>> {
    let mut prev: Option<(f64, Vector2<f64>)> = None;
    for p in track.valid_points() {
        if p.t >= t {
            return Some(match prev {
                Some((t0, x0)) if p.t > t0 => {
                    let u = (t - t0) / (p.t - t0);
                    x0 + (p.position() - x0) * u
                }
                _ => p.position(),
            });
        }
        prev = Some((p.t, p.position()));
    }
    prev.map(|(_, x)| x)
}

/// Distance between a straight-line constant-velocity extrapolation from the
/// timestep-zero state and the recorded position `horizon` seconds later.
///
/// `None` when the track has no state at timestep zero or its recording ends
/// more than one sample period before the horizon.
pub fn kalman_difficulty(track: &Track, horizon: f64, sample_period: f64) -> Option<f64> {
    let start = initial_state(track).ok().filter(|s| !s.late_start)?;
    let target = start.t + horizon;
    let last_t = track.valid_points().last()?.t;
    if last_t < target - sample_period {
        return None;
    }
    let predicted = start.position + unit(start.heading) * (start.speed * horizon);
    position_at(track, target).map(|truth| (predicted - truth).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KalmanVerdict {
    pub valuable: bool,
    /// The displacement error could not be computed.
    pub insufficient_track: bool,
}

pub fn kalman_valuable(fde: Option<f64>, threshold: f64) -> KalmanVerdict {
    match fde {
        Some(d) => KalmanVerdict {
            valuable: d >= threshold,
            insufficient_track: false,
        },
        None => KalmanVerdict {
            valuable: false,
            insufficient_track: true,
        },
    }
}

pub fn ttp_valuable(track: &Track) -> Option<bool> {
    track.ttp_flag
}

/// One baseline record per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineVerdict {
    pub scenario_id: String,
    pub agent_id: String,
    pub kalman_fde_m: Option<f64>,
    pub kalman_valuable: bool,
    pub ttp_valuable: Option<bool>,
}

pub fn evaluate_baselines(scenario: &Scenario, config: &FilterConfig) -> Vec<BaselineVerdict> {
    scenario
        .tracks
        .iter()
        .map(|track| {
            let fde = kalman_difficulty(track, config.kalman_horizon, scenario.sample_period);
            BaselineVerdict {
                scenario_id: scenario.scenario_id.clone(),
                agent_id: track.user.id.clone(),
                kalman_fde_m: fde,
                kalman_valuable: kalman_valuable(fde, config.kalman_threshold).valuable,
                ttp_valuable: ttp_valuable(track),
            }
        })
        .collect()
}
