//! Pairwise collision risk: Gaussian overlap per prediction step, a survival
//! weighting over the horizon, and the survival-weighted sum.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::FilterConfig;
use crate::prediction::{forecast, AgentForecast, GaussianComponent, MixturePrediction};
use crate::scenario::{Scenario, ScenarioError};

/// Overlap densities below this are flushed to zero.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("prediction step mismatch: {ego} has {ego_steps} steps (dt {ego_dt}), {other} has {other_steps} (dt {other_dt})")]
    StepMismatch {
        ego: String,
        other: String,
        ego_steps: usize,
        other_steps: usize,
        ego_dt: f64,
        other_dt: f64,
    },
    #[error("profile length {profile} does not match survival curve length {survival}")]
    LengthMismatch { profile: usize, survival: usize },
    #[error("combined covariance is not positive definite (det {0})")]
    SingularCovariance(f64),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{0}` is not predictable under the current late-start policy")]
    Unpredictable(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// How an overlap density (1/m²) becomes a per-step probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionArea {
    /// Mean of the two road users' length·width footprints.
    MeanFootprint,
    /// Fixed cross-section, m².
    Fixed(f64),
}

/// Which collision probabilities feed the survival weighting of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurvivalMode {
    /// Sum over every other predicted agent in the scenario.
    AllAgents,
    /// Only the pair's own profile; makes risk symmetric.
    PairOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskParams {
    /// Avoidance event rate, 1/s.
    pub tau0_inv: f64,
    pub collision_area: CollisionArea,
    pub survival_mode: SurvivalMode,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            tau0_inv: 0.56,
            collision_area: CollisionArea::MeanFootprint,
            survival_mode: SurvivalMode::AllAgents,
        }
    }
}

impl RiskParams {
    pub fn area_for(&self, ego: &MixturePrediction, other: &MixturePrediction) -> f64 {
        match self.collision_area {
            CollisionArea::MeanFootprint => (ego.footprint_area + other.footprint_area) / 2.0,
            CollisionArea::Fixed(area) => area,
        }
    }
}

/// ∫ f_a(x) f_b(x) dx for weighted 2-D Gaussians, in closed form:
/// `w_a · w_b · N(μ_a − μ_b; 0, Σ_a + Σ_b)`.
pub fn gaussian_overlap(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64, RiskError> {
    let sxx = a.cov[(0, 0)] + b.cov[(0, 0)];
    let sxy = a.cov[(0, 1)] + b.cov[(0, 1)];
    let syy = a.cov[(1, 1)] + b.cov[(1, 1)];
    let det = sxx * syy - sxy * sxy;
    if !(det.is_finite() && det > 0.0) {
        return Err(RiskError::SingularCovariance(det));
    }
    let dx = a.mean.x - b.mean.x;
    let dy = a.mean.y - b.mean.y;
    let mahalanobis2 = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
    let density = a.weight * b.weight * (-0.5 * mahalanobis2).exp() / (2.0 * PI * det.sqrt());
    Ok(if density < UNDERFLOW_FLOOR {
        0.0
    } else {
        density
    })
}

/// Per-step collision probabilities, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionProfile {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl CollisionProfile {
    pub fn zeros(len: usize, dt: f64) -> Self {
        Self {
            values: vec![0.0; len],
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

fn check_compatible(ego: &MixturePrediction, other: &MixturePrediction) -> Result<(), RiskError> {
    if ego.step_count() != other.step_count() || ego.dt != other.dt {
        return Err(RiskError::StepMismatch {
            ego: ego.user_id.clone(),
            other: other.user_id.clone(),
            ego_steps: ego.step_count(),
            other_steps: other.step_count(),
            ego_dt: ego.dt,
            other_dt: other.dt,
        });
    }
    Ok(())
}

/// Collision probability per step for one pair: summed component overlaps times
/// the collision cross-section `area`, clamped to [0, 1].
pub fn pair_collision_profile(
    ego: &MixturePrediction,
    other: &MixturePrediction,
    area: f64,
) -> Result<CollisionProfile, RiskError> {
    check_compatible(ego, other)?;
    let mut values = Vec::with_capacity(ego.step_count());
    for (ego_step, other_step) in ego.steps.iter().zip(&other.steps) {
        let mut density = 0.0;
        for a in ego_step {
            for b in other_step {
                density += gaussian_overlap(a, b)?;
            }
        }
        values.push((density * area).clamp(0.0, 1.0));
    }
    Ok(CollisionProfile { values, dt: ego.dt })
}

/// Step-wise sum of pair profiles, clamped to [0, 1].
pub fn sum_profiles<'a>(
    len: usize,
    dt: f64,
    profiles: impl IntoIterator<Item = &'a CollisionProfile>,
) -> Result<CollisionProfile, RiskError> {
    let mut total = vec![0.0; len];
    for p in profiles {
        if p.len() != len {
            return Err(RiskError::LengthMismatch {
                profile: p.len(),
                survival: len,
            });
        }
        for (t, v) in total.iter_mut().zip(&p.values) {
            *t += v;
        }
    }
    for t in &mut total {
        *t = t.clamp(0.0, 1.0);
    }
    Ok(CollisionProfile { values: total, dt })
}

/// Total collision probability of `ego` against every agent in `others`.
pub fn total_collision_profile(
    ego: &MixturePrediction,
    others: &[&MixturePrediction],
    params: &RiskParams,
) -> Result<CollisionProfile, RiskError> {
    let pairs = others
        .iter()
        .map(|o| pair_collision_profile(ego, o, params.area_for(ego, o)))
        .collect::<Result<Vec<_>, _>>()?;
    sum_profiles(ego.step_count(), ego.dt, &pairs)
}

/// Probability of no avoidance or collision event before each step.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub values: Vec<f64>,
    pub tau0_inv: f64,
    pub dt: f64,
}

/// `S(0) = 1`, `S(k+1) = S(k) · exp(−(τ₀⁻¹ + P(k)/Δt) · Δt)`.
/// Computed from the accumulated exponent rather than as a running product.
pub fn survival_curve(total: &CollisionProfile, tau0_inv: f64) -> SurvivalCurve {
    let dt = total.dt;
    let mut values = Vec::with_capacity(total.len());
    let mut exponent = 0.0;
    if !total.is_empty() {
        values.push(1.0);
    }
    for p in total.values.iter().take(total.len().saturating_sub(1)) {
        exponent += (tau0_inv + p / dt) * dt;
        values.push((-exponent).exp());
    }
    SurvivalCurve {
        values,
        tau0_inv,
        dt,
    }
}

/// Left-rectangle sum of `S(k) · P(k)/Δt · Δt` over every step.
pub fn integrate_risk(pair: &CollisionProfile, surv: &SurvivalCurve) -> Result<f64, RiskError> {
    if pair.len() != surv.values.len() {
        return Err(RiskError::LengthMismatch {
            profile: pair.len(),
            survival: surv.values.len(),
        });
    }
    Ok(pair
        .values
        .iter()
        .zip(&surv.values)
        .map(|(p, s)| s * p)
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskValue {
    pub value: f64,
    pub ego_id: String,
    pub other_id: String,
}

/// Forecasts every agent of the scenario that the late-start policy admits.
/// Entries are `None` for agents left out of the risk model.
pub fn forecast_scenario(scenario: &Scenario, config: &FilterConfig) -> Vec<Option<AgentForecast>> {
    use rayon::prelude::*;
    scenario
        .tracks
        .par_iter()
        .map(|track| match forecast(track, &config.prediction) {
            Ok(f) if !f.initial.late_start || config.include_late_starters => Some(f),
            _ => None,
        })
        .collect()
}

/// Risk that `other_id` poses to `ego_id`, computed from scratch for this one pair.
pub fn pair_risk(
    scenario: &Scenario,
    ego_id: &str,
    other_id: &str,
    config: &FilterConfig,
) -> Result<RiskValue, RiskError> {
    let index = |id: &str| {
        scenario
            .track_index(id)
            .ok_or_else(|| RiskError::UnknownAgent(id.to_string()))
    };
    let ego_idx = index(ego_id)?;
    let other_idx = index(other_id)?;
    let forecasts = forecast_scenario(scenario, config);
    let predicted = |i: usize, id: &str| {
        forecasts[i]
            .as_ref()
            .map(|f| &f.prediction)
            .ok_or_else(|| RiskError::Unpredictable(id.to_string()))
    };
    let ego = predicted(ego_idx, ego_id)?;
    let other = predicted(other_idx, other_id)?;

    let risk = &config.risk;
    let pair = pair_collision_profile(ego, other, risk.area_for(ego, other))?;
    let total = match risk.survival_mode {
        SurvivalMode::PairOnly => pair.clone(),
        SurvivalMode::AllAgents => {
            let others: Vec<&MixturePrediction> = forecasts
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != ego_idx)
                .filter_map(|(_, f)| f.as_ref().map(|f| &f.prediction))
                .collect();
            total_collision_profile(ego, &others, risk)?
        }
    };
    let surv = survival_curve(&total, risk.tau0_inv);
    Ok(RiskValue {
        value: integrate_risk(&pair, &surv)?,
        ego_id: ego_id.to_string(),
        other_id: other_id.to_string(),
    })
}
