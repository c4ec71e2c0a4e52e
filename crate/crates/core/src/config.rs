//! Run configuration and its flat `key=value` file format.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; unknown
//! keys are rejected so typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::Path as FsPath;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prediction::PredictionParams;
use crate::risk::{CollisionArea, RiskParams, SurvivalMode};
use crate::scenario::DefaultDimensions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

/// Which pair carries the second risk of a second-order situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderRule {
    /// `(first, second)`: risk propagates along the chain ego ← first ← second.
    Chain,
    /// `(ego, second)`: the ego is exposed to both others directly.
    EgoCentric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub prediction: PredictionParams,
    pub risk: RiskParams,
    /// Valuable-situation threshold on integrated risk.
    pub r_thr: f64,
    pub v_min: f64,
    pub path_min: f64,
    pub include_late_starters: bool,
    pub second_order_rule: SecondOrderRule,
    /// Report `(a, b, c)` and `(c, b, a)` chains once.
    pub dedupe_chains: bool,
    pub kalman_horizon: f64,
    pub kalman_threshold: f64,
    pub dimensions: DefaultDimensions,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            prediction: PredictionParams::default(),
            risk: RiskParams::default(),
            r_thr: 1e-9,
            v_min: 0.5,
            path_min: 5.0,
            include_late_starters: false,
            second_order_rule: SecondOrderRule::Chain,
            dedupe_chains: false,
            kalman_horizon: 8.0,
            kalman_threshold: 10.0,
            dimensions: DefaultDimensions::default(),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.into(),
        value: value.into(),
    })
}

fn parse_growth(line: usize, key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_value(line, key, value).map(Some)
    }
}

fn render_growth(g: Option<f64>) -> String {
    g.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl FilterConfig {
    pub fn from_file(path: &FsPath) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_str(&text)
    }

    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.prediction;
        let bad = || ConfigError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
        };
        match key {
            "sigma_car_max_m" => p.car.sigma_long_max = parse_value(line, key, value)?,
            "sigma_car_lat_max_m" => p.car.sigma_lat_max = parse_value(line, key, value)?,
            "sigma_ped_max_m" => p.pedestrian.sigma_lat_max = parse_value(line, key, value)?,
            "sigma_ped_long_max_m" => p.pedestrian.sigma_long_max = parse_value(line, key, value)?,
            "sigma_cyc_max_m" => p.bicycle.sigma_long_max = parse_value(line, key, value)?,
            "sigma_cyc_lat_max_m" => p.bicycle.sigma_lat_max = parse_value(line, key, value)?,
            "growth_car_long_mps" => p.car.growth_long = parse_growth(line, key, value)?,
            "growth_car_lat_mps" => p.car.growth_lat = parse_growth(line, key, value)?,
            "growth_ped_long_mps" => p.pedestrian.growth_long = parse_growth(line, key, value)?,
            "growth_ped_lat_mps" => p.pedestrian.growth_lat = parse_growth(line, key, value)?,
            "growth_cyc_long_mps" => p.bicycle.growth_long = parse_growth(line, key, value)?,
            "growth_cyc_lat_mps" => p.bicycle.growth_lat = parse_growth(line, key, value)?,
            "s_max_s" => p.horizon = parse_value(line, key, value)?,
            "dt_s" => p.dt = parse_value(line, key, value)?,
            "mixture_components" => p.mixture_components = parse_value(line, key, value)?,
            "mixture_curvature_deg" => p.mixture_curvature_deg = parse_value(line, key, value)?,
            "eps_dedupe_m" => p.eps_dedupe = parse_value(line, key, value)?,
            "tau0_inv_per_s" => self.risk.tau0_inv = parse_value(line, key, value)?,
            "collision_area_m2" => {
                self.risk.collision_area = if value == "mean_footprint" {
                    CollisionArea::MeanFootprint
                } else {
                    CollisionArea::Fixed(parse_value(line, key, value)?)
                }
            }
            "survival_mode" => {
                self.risk.survival_mode = match value {
                    "all_agents" => SurvivalMode::AllAgents,
                    "pair_only" => SurvivalMode::PairOnly,
                    _ => return Err(bad()),
                }
            }
            "r_valuable" => self.r_thr = parse_value(line, key, value)?,
            "v_min_mps" => self.v_min = parse_value(line, key, value)?,
            "path_min_m" => self.path_min = parse_value(line, key, value)?,
            "include_late_starters" => self.include_late_starters = parse_value(line, key, value)?,
            "second_order_rule" => {
                self.second_order_rule = match value {
                    "chain" => SecondOrderRule::Chain,
                    "ego_centric" => SecondOrderRule::EgoCentric,
                    _ => return Err(bad()),
                }
            }
            "dedupe_chains" => self.dedupe_chains = parse_value(line, key, value)?,
            "kalman_horizon_s" => self.kalman_horizon = parse_value(line, key, value)?,
            "kalman_threshold_m" => self.kalman_threshold = parse_value(line, key, value)?,
            "car_length_m" => self.dimensions.car.length = parse_value(line, key, value)?,
            "car_width_m" => self.dimensions.car.width = parse_value(line, key, value)?,
            "ped_length_m" => self.dimensions.pedestrian.length = parse_value(line, key, value)?,
            "ped_width_m" => self.dimensions.pedestrian.width = parse_value(line, key, value)?,
            "cyc_length_m" => self.dimensions.bicycle.length = parse_value(line, key, value)?,
            "cyc_width_m" => self.dimensions.bicycle.width = parse_value(line, key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let p = &self.prediction;
        let positive = [
            ("dt_s", p.dt),
            ("s_max_s", p.horizon),
            ("r_valuable", self.r_thr),
            ("sigma_car_max_m", p.car.sigma_long_max),
            ("sigma_car_lat_max_m", p.car.sigma_lat_max),
            ("sigma_ped_max_m", p.pedestrian.sigma_lat_max),
            ("sigma_ped_long_max_m", p.pedestrian.sigma_long_max),
            ("sigma_cyc_max_m", p.bicycle.sigma_long_max),
            ("sigma_cyc_lat_max_m", p.bicycle.sigma_lat_max),
            ("kalman_horizon_s", self.kalman_horizon),
            ("car_length_m", self.dimensions.car.length),
            ("car_width_m", self.dimensions.car.width),
            ("ped_length_m", self.dimensions.pedestrian.length),
            ("ped_width_m", self.dimensions.pedestrian.width),
            ("cyc_length_m", self.dimensions.bicycle.length),
            ("cyc_width_m", self.dimensions.bicycle.width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be > 0 (got {v})"));
            }
        }
        let non_negative = [
            ("tau0_inv_per_s", self.risk.tau0_inv),
            ("v_min_mps", self.v_min),
            ("path_min_m", self.path_min),
            ("eps_dedupe_m", p.eps_dedupe),
            ("kalman_threshold_m", self.kalman_threshold),
            ("mixture_curvature_deg", p.mixture_curvature_deg),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name} must be >= 0 (got {v})"));
            }
        }
        for t in [&p.car, &p.pedestrian, &p.bicycle] {
            for g in [t.growth_long, t.growth_lat].into_iter().flatten() {
                if !(g.is_finite() && g >= 0.0) {
                    problems.push(format!("growth rates must be >= 0 (got {g})"));
                }
            }
        }
        if p.horizon < p.dt {
            problems.push("s_max_s must be at least dt_s".into());
        }
        if p.mixture_components == 0 {
            problems.push("mixture_components must be >= 1".into());
        }
        if let CollisionArea::Fixed(a) = self.risk.collision_area {
            if !(a.is_finite() && a > 0.0) {
                problems.push(format!("collision_area_m2 must be > 0 (got {a})"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }

    /// Canonical rendering of every knob; parsing it back yields the same config.
    pub fn to_kv_string(&self) -> String {
        let p = &self.prediction;
        let d = &self.dimensions;
        let entries: Vec<(&str, String)> = vec![
            ("sigma_car_max_m", p.car.sigma_long_max.to_string()),
            ("sigma_car_lat_max_m", p.car.sigma_lat_max.to_string()),
            ("sigma_ped_max_m", p.pedestrian.sigma_lat_max.to_string()),
            (
                "sigma_ped_long_max_m",
                p.pedestrian.sigma_long_max.to_string(),
            ),
            ("sigma_cyc_max_m", p.bicycle.sigma_long_max.to_string()),
            ("sigma_cyc_lat_max_m", p.bicycle.sigma_lat_max.to_string()),
            ("growth_car_long_mps", render_growth(p.car.growth_long)),
            ("growth_car_lat_mps", render_growth(p.car.growth_lat)),
            (
                "growth_ped_long_mps",
                render_growth(p.pedestrian.growth_long),
            ),
            ("growth_ped_lat_mps", render_growth(p.pedestrian.growth_lat)),
            ("growth_cyc_long_mps", render_growth(p.bicycle.growth_long)),
            ("growth_cyc_lat_mps", render_growth(p.bicycle.growth_lat)),
            ("tau0_inv_per_s", self.risk.tau0_inv.to_string()),
            ("s_max_s", p.horizon.to_string()),
            ("dt_s", p.dt.to_string()),
            ("r_valuable", format!("{:e}", self.r_thr)),
            ("mixture_components", p.mixture_components.to_string()),
            ("mixture_curvature_deg", p.mixture_curvature_deg.to_string()),
            ("eps_dedupe_m", p.eps_dedupe.to_string()),
            (
                "collision_area_m2",
                match self.risk.collision_area {
                    CollisionArea::MeanFootprint => "mean_footprint".to_string(),
                    CollisionArea::Fixed(a) => a.to_string(),
                },
            ),
            (
                "survival_mode",
                match self.risk.survival_mode {
                    SurvivalMode::AllAgents => "all_agents",
                    SurvivalMode::PairOnly => "pair_only",
                }
                .to_string(),
            ),
            ("v_min_mps", self.v_min.to_string()),
            ("path_min_m", self.path_min.to_string()),
            (
                "include_late_starters",
                self.include_late_starters.to_string(),
            ),
            (
                "second_order_rule",
                match self.second_order_rule {
                    SecondOrderRule::Chain => "chain",
                    SecondOrderRule::EgoCentric => "ego_centric",
                }
                .to_string(),
            ),
            ("dedupe_chains", self.dedupe_chains.to_string()),
            ("kalman_horizon_s", self.kalman_horizon.to_string()),
            ("kalman_threshold_m", self.kalman_threshold.to_string()),
            ("car_length_m", d.car.length.to_string()),
            ("car_width_m", d.car.width.to_string()),
            ("ped_length_m", d.pedestrian.length.to_string()),
            ("ped_width_m", d.pedestrian.width.to_string()),
            ("cyc_length_m", d.bicycle.length.to_string()),
            ("cyc_width_m", d.bicycle.width.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv_string().as_bytes()))
    }
}
