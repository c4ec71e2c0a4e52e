//! Constant-velocity prediction along recorded paths with growing, type-dependent
//! Gaussian position uncertainty.

use nalgebra::{Matrix2, Vector2};

use crate::geometry::normalize_angle;
use crate::path::{extract_path, Path, Pose};
use crate::scenario::{initial_state, InitialState, RoadUser, RoadUserType, ScenarioError, Track};

/// Relative slack used to land exactly on a saturation cap despite rounding.
const SATURATION_SNAP: f64 = 4.0 * f64::EPSILON;

/// Per-type uncertainty caps and optional growth rates.
///
/// A `None` growth rate means "reach the cap exactly at the prediction horizon".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeUncertainty {
    pub sigma_long_max: f64,
    pub sigma_lat_max: f64,
    pub growth_long: Option<f64>,
    pub growth_lat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionParams {
    pub dt: f64,
    pub horizon: f64,
    pub car: TypeUncertainty,
    pub pedestrian: TypeUncertainty,
    pub bicycle: TypeUncertainty,
    /// Components used on curved stretches; 1 disables mixture mode.
    pub mixture_components: usize,
    /// Heading change over the ±2σ window that triggers the mixture, degrees.
    pub mixture_curvature_deg: f64,
    pub eps_dedupe: f64,
}

impl Default for PredictionParams {
    fn default() -> Self {
        Self {
            dt: 0.25,
            horizon: 8.0,
            car: TypeUncertainty {
                sigma_long_max: 15.0,
                sigma_lat_max: 1.5,
                growth_long: None,
                growth_lat: None,
            },
            pedestrian: TypeUncertainty {
                sigma_long_max: 1.5,
                sigma_lat_max: 1.5,
                growth_long: None,
                growth_lat: None,
            },
            bicycle: TypeUncertainty {
                sigma_long_max: 3.3,
                sigma_lat_max: 1.0,
                growth_long: None,
                growth_lat: None,
            },
            mixture_components: 5,
            mixture_curvature_deg: 15.0,
            eps_dedupe: crate::path::DEFAULT_EPS_DEDUPE,
        }
    }
}

impl PredictionParams {
    pub fn for_type(&self, kind: RoadUserType) -> &TypeUncertainty {
        match kind {
            RoadUserType::Car => &self.car,
            RoadUserType::Pedestrian => &self.pedestrian,
            RoadUserType::Bicycle => &self.bicycle,
        }
    }

    /// K, the index of the last prediction step.
    pub fn step_count(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySpec {
    pub sigma_long_0: f64,
    pub sigma_lat_0: f64,
    pub sigma_long_max: f64,
    pub sigma_lat_max: f64,
    pub growth_long: f64,
    pub growth_lat: f64,
}

impl UncertaintySpec {
    /// Starts at the half-extents of the road user. A cap smaller than the
    /// starting size is raised to it, so oversized agents keep their footprint.
    pub fn for_user(user: &RoadUser, params: &TypeUncertainty, horizon: f64) -> Self {
        let sigma_long_0 = user.length / 2.0;
        let sigma_lat_0 = user.width / 2.0;
        let sigma_long_max = params.sigma_long_max.max(sigma_long_0);
        let sigma_lat_max = params.sigma_lat_max.max(sigma_lat_0);
        Self {
            sigma_long_0,
            sigma_lat_0,
            sigma_long_max,
            sigma_lat_max,
            growth_long: params
                .growth_long
                .unwrap_or((sigma_long_max - sigma_long_0) / horizon),
            growth_lat: params
                .growth_lat
                .unwrap_or((sigma_lat_max - sigma_lat_0) / horizon),
        }
    }
}

fn saturating(start: f64, rate: f64, cap: f64, s: f64) -> f64 {
    let v = start + rate * s;
    if v >= cap * (1.0 - SATURATION_SNAP) {
        cap
    } else {
        v
    }
}

/// `(sigma_long, sigma_lat)` after `s` seconds: linear growth capped at the maxima.
pub fn uncertainty_at(spec: &UncertaintySpec, s: f64) -> (f64, f64) {
    (
        saturating(spec.sigma_long_0, spec.growth_long, spec.sigma_long_max, s),
        saturating(spec.sigma_lat_0, spec.growth_lat, spec.sigma_lat_max, s),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

/// One-component Gaussian with its long axis along `heading`.
pub fn build_component(
    position: Vector2<f64>,
    heading: f64,
    sigma_long: f64,
    sigma_lat: f64,
) -> GaussianComponent {
    let (s, c) = heading.sin_cos();
    let a = sigma_long * sigma_long;
    let b = sigma_lat * sigma_lat;
    // R · diag(a, b) · Rᵀ written out; keeps the off-diagonals bitwise symmetric.
    let xx = c * c * a + s * s * b;
    let yy = s * s * a + c * c * b;
    let xy = c * s * (a - b);
    GaussianComponent {
        weight: 1.0,
        mean: position,
        cov: Matrix2::new(xx, xy, xy, yy),
    }
}

/// Splits a longitudinal Gaussian into `n` equal-weight components strung along
/// the path around `center_arclength`, each following the local tangent.
///
/// Component centres are equally spaced with step `σℓ·√(12 / (n(n+1)))` and
/// each component keeps `σℓ/√n` longitudinally, so on a straight path the
/// mixture reproduces the original longitudinal variance exactly.
pub fn decompose_along_path(
    path: &Path,
    center_arclength: f64,
    sigma_long: f64,
    sigma_lat: f64,
    n_components: usize,
) -> Vec<GaussianComponent> {
    let n = n_components.max(1);
    if n == 1 {
        let pose = path.pose_at(center_arclength);
        return vec![build_component(
            pose.position,
            pose.heading,
            sigma_long,
            sigma_lat,
        )];
    }
    let nf = n as f64;
    let spacing = sigma_long * (12.0 / (nf * (nf + 1.0))).sqrt();
    let sigma_component = sigma_long / nf.sqrt();
    let weight = 1.0 / nf;
    (0..n)
        .map(|i| {
            let offset = (i as f64 - (nf - 1.0) / 2.0) * spacing;
            let pose = path.pose_at(center_arclength + offset);
            GaussianComponent {
                weight,
                ..build_component(pose.position, pose.heading, sigma_component, sigma_lat)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedState {
    pub arclength: f64,
    pub pose: Pose,
}

/// Constant-speed motion along `path` starting from the projection of the
/// initial position. Returns K + 1 states, K = round(horizon / dt).
pub fn predict_cv_states(
    path: &Path,
    initial: &InitialState,
    dt: f64,
    horizon: f64,
) -> Vec<PredictedState> {
    let steps = (horizon / dt).round() as usize;
    let s0 = path.project(&initial.position);
    (0..=steps)
        .map(|k| {
            let arclength = s0 + initial.speed * k as f64 * dt;
            PredictedState {
                arclength,
                pose: path.pose_at(arclength),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrediction {
    pub user_id: String,
    /// length · width of the road user, m².
    pub footprint_area: f64,
    pub dt: f64,
    pub horizon: f64,
    pub steps: Vec<Vec<GaussianComponent>>,
}

impl MixturePrediction {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }
}

/// Everything the risk model needs about one agent, computed once.
#[derive(Debug, Clone)]
pub struct AgentForecast {
    pub path: Path,
    pub initial: InitialState,
    pub prediction: MixturePrediction,
}

fn heading_change(path: &Path, center: f64, half_window: f64) -> f64 {
    normalize_angle(path.heading_at(center + half_window) - path.heading_at(center - half_window))
        .abs()
}

/// Full per-agent prediction: path, constant-velocity states, growing
/// uncertainty and, on curved stretches, a mixture decomposition.
pub fn forecast(track: &Track, params: &PredictionParams) -> Result<AgentForecast, ScenarioError> {
    let initial = initial_state(track)?;
    let path = extract_path(track, params.eps_dedupe);
    let spec =
        UncertaintySpec::for_user(&track.user, params.for_type(track.kind()), params.horizon);
    let threshold = params.mixture_curvature_deg.to_radians();

    let steps = predict_cv_states(&path, &initial, params.dt, params.horizon)
        .into_iter()
        .enumerate()
        .map(|(k, state)| {
            let (sigma_long, sigma_lat) = uncertainty_at(&spec, k as f64 * params.dt);
            let n = if params.mixture_components > 1
                && heading_change(&path, state.arclength, 2.0 * sigma_long) > threshold
            {
                params.mixture_components
            } else {
                1
            };
            decompose_along_path(&path, state.arclength, sigma_long, sigma_lat, n)
        })
        .collect();

    Ok(AgentForecast {
        prediction: MixturePrediction {
            user_id: track.user.id.clone(),
            footprint_area: track.user.footprint_area(),
            dt: params.dt,
            horizon: params.horizon,
            steps,
        },
        path,
        initial,
    })
}

pub fn predict_mixture(
    track: &Track,
    params: &PredictionParams,
) -> Result<MixturePrediction, ScenarioError> {
    forecast(track, params).map(|f| f.prediction)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use super::*;
    use crate::scenario::TrackPoint;

    fn user(kind: RoadUserType, length: f64, width: f64) -> RoadUser {
        RoadUser {
            id: "u".into(),
            kind,
            length,
            width,
            dimensions_defaulted: false,
        }
    }

    fn state_at(x: f64, y: f64, speed: f64) -> InitialState {
        InitialState {
            position: Vector2::new(x, y),
            heading: 0.0,
            speed,
            t: 0.0,
            late_start: false,
        }
    }

    fn straight_path(len: f64) -> Path {
        Path::from_vertices(vec![Vector2::new(0.0, 0.0), Vector2::new(len, 0.0)], 0.0)
    }

    /// Densely sampled circular arc centred at the origin, counter-clockwise from angle 0.
    fn arc_path(radius: f64, sweep: f64, samples: usize) -> Path {
        let vertices = (0..=samples)
            .map(|i| {
                let a = sweep * i as f64 / samples as f64;
                Vector2::new(radius * a.cos(), radius * a.sin())
            })
            .collect();
        Path::from_vertices(vertices, 0.0)
    }

    #[test]
    fn cv_states_on_straight_path() {
        let states = predict_cv_states(&straight_path(100.0), &state_at(0.0, 0.0, 4.0), 0.25, 8.0);
        assert_eq!(states.len(), 33);
        assert!((states[32].pose.position.x - 32.0).abs() < 1e-12);
        for w in states.windows(2) {
            assert!((w[1].arclength - w[0].arclength - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_speed_is_constant() {
        let states = predict_cv_states(&straight_path(10.0), &state_at(3.0, 0.0, 0.0), 0.25, 8.0);
        for s in &states {
            assert_eq!(s.pose.position, Vector2::new(3.0, 0.0));
        }
    }

    #[test]
    fn extrapolates_past_path_end() {
        let states = predict_cv_states(&straight_path(10.0), &state_at(0.0, 0.0, 4.0), 0.25, 8.0);
        assert!((states[32].pose.position - Vector2::new(32.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cv_states_follow_circular_arc() {
        // 20 000 chords: chord-vs-arc error ~ r·δ²/24 ≈ 5e-9 m.
        let r = 20.0;
        let path = arc_path(r, FRAC_PI_2, 20_000);
        let states = predict_cv_states(&path, &state_at(r, 0.0, 5.0), 0.25, 8.0);
        let expected = Vector2::new(r * 1.0f64.cos(), r * 1.0f64.sin());
        assert!((states[16].pose.position - expected).norm() < 1e-6);
    }

    #[test]
    fn uncertainty_initial_and_saturated() {
        let params = PredictionParams::default();
        let spec = UncertaintySpec::for_user(&user(RoadUserType::Car, 4.8, 2.1), &params.car, 8.0);
        assert_eq!(uncertainty_at(&spec, 0.0), (2.4, 1.05));
        let (long, lat) = uncertainty_at(&spec, 8.0);
        assert_eq!(long, 15.0);
        assert_eq!(lat, 1.5);
        assert_eq!(uncertainty_at(&spec, 30.0), (15.0, 1.5));
    }

    #[test]
    fn uncertainty_midpoint() {
        let params = PredictionParams::default();
        let spec = UncertaintySpec::for_user(&user(RoadUserType::Car, 4.8, 2.1), &params.car, 8.0);
        let (long, lat) = uncertainty_at(&spec, 4.0);
        assert!((long - (2.4 + 15.0) / 2.0).abs() < 1e-12);
        assert!((lat - (1.05 + 1.5) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_agent_keeps_its_footprint() {
        let params = PredictionParams::default();
        let spec = UncertaintySpec::for_user(&user(RoadUserType::Car, 12.0, 3.4), &params.car, 8.0);
        assert_eq!(spec.sigma_lat_max, 1.7);
        assert_eq!(spec.growth_lat, 0.0);
        assert_eq!(uncertainty_at(&spec, 5.0).1, 1.7);
    }

    #[test]
    fn component_rotation() {
        let c0 = build_component(Vector2::zeros(), 0.0, 2.0, 1.0);
        assert_eq!(c0.cov, Matrix2::new(4.0, 0.0, 0.0, 1.0));

        let c90 = build_component(Vector2::zeros(), FRAC_PI_2, 2.0, 1.0);
        assert!((c90.cov - Matrix2::new(1.0, 0.0, 0.0, 4.0)).abs().max() < 1e-12);

        // R(π/4)·diag(4, 1)·R(π/4)ᵀ = [[2.5, 1.5], [1.5, 2.5]]
        let c45 = build_component(Vector2::zeros(), FRAC_PI_4, 2.0, 1.0);
        assert!((c45.cov - Matrix2::new(2.5, 1.5, 1.5, 2.5)).abs().max() < 1e-12);
        assert_eq!(c45.cov[(0, 1)], c45.cov[(1, 0)]);
    }

    #[test]
    fn single_component_decomposition_is_identity() {
        let path = arc_path(10.0, 1.0, 200);
        let pose = path.pose_at(3.0);
        let single = decompose_along_path(&path, 3.0, 2.0, 0.5, 1);
        assert_eq!(
            single,
            vec![build_component(pose.position, pose.heading, 2.0, 0.5)]
        );
    }

    #[test]
    fn straight_decomposition_is_symmetric_and_variance_preserving() {
        let path = straight_path(100.0);
        let sigma = 4.0;
        let comps = decompose_along_path(&path, 50.0, sigma, 1.0, 5);
        assert_eq!(comps.len(), 5);
        let mean: Vector2<f64> = comps.iter().map(|c| c.mean * c.weight).sum();
        assert!((mean - Vector2::new(50.0, 0.0)).norm() < 1e-12);
        for c in &comps {
            assert_eq!(c.cov[(0, 1)], 0.0);
            assert!((c.weight - 0.2).abs() < 1e-15);
        }
        let var: f64 = comps
            .iter()
            .map(|c| c.weight * (c.cov[(0, 0)] + (c.mean.x - 50.0).powi(2)))
            .sum();
        assert!((var - sigma * sigma).abs() / (sigma * sigma) < 0.15);
        assert!((var - sigma * sigma).abs() < 1e-9);
    }

    #[test]
    fn curved_decomposition_stays_on_circle() {
        let r = 20.0;
        let path = arc_path(r, FRAC_PI_2, 20_000);
        let comps = decompose_along_path(&path, 15.0, 3.0, 1.0, 5);
        for c in &comps {
            assert!((c.mean.norm() - r).abs() < 1e-6);
        }
    }

    fn track_of(
        kind: RoadUserType,
        length: f64,
        width: f64,
        pts: &[(f64, f64, f64)],
        speed: f64,
    ) -> Track {
        Track {
            user: user(kind, length, width),
            points: pts
                .iter()
                .map(|&(t, x, y)| TrackPoint {
                    t,
                    x,
                    y,
                    heading: 0.0,
                    speed,
                    valid: true,
                })
                .collect(),
            ttp_flag: None,
        }
    }

    #[test]
    fn straight_car_mixture() {
        let pts: Vec<_> = (0..=80).map(|k| (k as f64 * 0.1, k as f64, 0.0)).collect();
        let track = track_of(RoadUserType::Car, 4.8, 2.1, &pts, 10.0);
        let pred = predict_mixture(&track, &PredictionParams::default()).unwrap();
        assert_eq!(pred.step_count(), 33);
        assert!(pred.steps.iter().all(|s| s.len() == 1));
        let last = &pred.steps[32][0];
        assert_eq!(last.cov[(0, 0)], 225.0);
        let mut prev = 0.0;
        for s in &pred.steps {
            assert!(s[0].cov[(0, 0)] >= prev);
            prev = s[0].cov[(0, 0)];
        }
    }

    #[test]
    fn pedestrian_lateral_cap() {
        let pts: Vec<_> = (0..=80)
            .map(|k| (k as f64 * 0.1, 0.14 * k as f64, 0.07 * k as f64))
            .collect();
        let track = track_of(RoadUserType::Pedestrian, 0.8, 0.8, &pts, 1.4);
        let pred = predict_mixture(&track, &PredictionParams::default()).unwrap();
        for step in &pred.steps {
            for c in step {
                let eig = c.cov.symmetric_eigenvalues();
                assert!(eig.max().sqrt() <= 1.5 + 1e-12);
            }
        }
    }

    #[test]
    fn curved_bicycle_mixture() {
        // Tight loop with recorded history, so every step sits on curved path.
        let r = 8.0;
        let pts: Vec<_> = (0..=650)
            .map(|i| {
                let a = -1.0 + i as f64 * 0.01;
                (a * r / 4.0, r * a.cos(), r * a.sin())
            })
            .collect();
        let track = track_of(RoadUserType::Bicycle, 1.8, 0.7, &pts, 4.0);
        let pred = predict_mixture(&track, &PredictionParams::default()).unwrap();
        assert_eq!(pred.step_count(), 33);
        for step in &pred.steps {
            assert_eq!(step.len(), 5);
            for c in step {
                assert!((c.weight - 0.2).abs() < 1e-15);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn uncertainty_is_monotone_and_capped(
                length in 0.5f64..20.0, ratio in 0.1f64..1.0,
                s1 in 0.0f64..20.0, s2 in 0.0f64..20.0,
            ) {
                let params = PredictionParams::default();
                for kind in RoadUserType::ALL {
                    let u = user(kind, length, length * ratio);
                    let tp = params.for_type(kind);
                    let spec = UncertaintySpec::for_user(&u, tp, params.horizon);
                    let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
                    let a = uncertainty_at(&spec, lo);
                    let b = uncertainty_at(&spec, hi);
                    prop_assert!(a.0 <= b.0 && a.1 <= b.1);
                    prop_assert!(b.0 <= tp.sigma_long_max.max(length / 2.0));
                    prop_assert!(b.1 <= tp.sigma_lat_max.max(length * ratio / 2.0));
                }
            }

            #[test]
            fn components_are_spd_and_weights_sum_to_one(
                heading in -4.0f64..4.0, sl in 0.1f64..15.0, st in 0.1f64..15.0,
                n in 1usize..8, center in -10.0f64..40.0,
            ) {
                let path = arc_path(12.0, 2.0, 400);
                let comps = decompose_along_path(&path, center, sl, st, n);
                let total: f64 = comps.iter().map(|c| c.weight).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                for c in comps.iter().chain(std::iter::once(&build_component(Vector2::zeros(), heading, sl, st))) {
                    prop_assert_eq!(c.cov[(0, 1)], c.cov[(1, 0)]);
                    prop_assert!(c.cov.cholesky().is_some());
                }
            }
        }
    }
}
