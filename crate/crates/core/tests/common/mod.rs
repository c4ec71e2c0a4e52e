#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risk_sieve::geometry::normalize_angle;
use risk_sieve::scenario::{RoadUser, RoadUserType, Scenario, Track, TrackPoint};

pub const SAMPLE_PERIOD: f64 = 0.1;

pub fn user(id: &str, kind: RoadUserType) -> RoadUser {
    let (length, width) = match kind {
        RoadUserType::Car => (4.8, 2.1),
        RoadUserType::Pedestrian => (0.8, 0.8),
        RoadUserType::Bicycle => (1.8, 0.7),
    };
    RoadUser {
        id: id.into(),
        kind,
        length,
        width,
        dimensions_defaulted: false,
    }
}

/// Constant-velocity straight track recorded from t = 0 for `duration` seconds.
pub fn straight_track(
    id: &str,
    kind: RoadUserType,
    start: (f64, f64),
    heading: f64,
    speed: f64,
    duration: f64,
) -> Track {
    let steps = (duration / SAMPLE_PERIOD).round() as usize;
    Track {
        user: user(id, kind),
        points: (0..=steps)
            .map(|k| {
                let t = k as f64 * SAMPLE_PERIOD;
                TrackPoint {
                    t,
                    x: start.0 + speed * t * heading.cos(),
                    y: start.1 + speed * t * heading.sin(),
                    heading,
                    speed,
                    valid: true,
                }
            })
            .collect(),
        ttp_flag: None,
    }
}

/// Constant-speed track on a circular arc, counter-clockwise when `turn > 0`.
#[allow(clippy::too_many_arguments)]
pub fn arc_track(
    id: &str,
    kind: RoadUserType,
    center: (f64, f64),
    radius: f64,
    start_angle: f64,
    turn: f64,
    speed: f64,
    duration: f64,
) -> Track {
    let steps = (duration / SAMPLE_PERIOD).round() as usize;
    let omega = turn.signum() * speed / radius;
    Track {
        user: user(id, kind),
        points: (0..=steps)
            .map(|k| {
                let t = k as f64 * SAMPLE_PERIOD;
                let a = start_angle + omega * t;
                TrackPoint {
                    t,
                    x: center.0 + radius * a.cos(),
                    y: center.1 + radius * a.sin(),
                    heading: normalize_angle(a + turn.signum() * std::f64::consts::FRAC_PI_2),
                    speed,
                    valid: true,
                }
            })
            .collect(),
        ttp_flag: None,
    }
}

pub fn scenario(id: &str, tracks: Vec<Track>) -> Scenario {
    Scenario {
        scenario_id: id.into(),
        sample_period: SAMPLE_PERIOD,
        tracks,
    }
}

/// Two cars in one lane, 80 m apart, each at 10 m/s towards the other.
pub fn head_on() -> Scenario {
    scenario(
        "head_on",
        vec![
            straight_track("a", RoadUserType::Car, (0.0, 0.0), 0.0, 10.0, 8.0),
            straight_track(
                "b",
                RoadUserType::Car,
                (80.0, 0.0),
                std::f64::consts::PI,
                10.0,
                8.0,
            ),
        ],
    )
}

/// Same approach as [`head_on`] but the lanes are 50 m apart laterally.
pub fn parallel_lanes() -> Scenario {
    scenario(
        "parallel_lanes",
        vec![
            straight_track("a", RoadUserType::Car, (0.0, 0.0), 0.0, 10.0, 8.0),
            straight_track(
                "b",
                RoadUserType::Car,
                (80.0, 50.0),
                std::f64::consts::PI,
                10.0,
                8.0,
            ),
        ],
    )
}

/// Two cars following closely in the same lane.
pub fn car_following() -> Scenario {
    scenario(
        "following",
        vec![
            straight_track("lead", RoadUserType::Car, (12.0, 0.0), 0.0, 8.0, 8.0),
            straight_track("follow", RoadUserType::Car, (0.0, 0.0), 0.0, 10.0, 8.0),
        ],
    )
}

/// A car and a bicycle on crossing paths.
pub fn crossing() -> Scenario {
    scenario(
        "crossing",
        vec![
            straight_track("car", RoadUserType::Car, (-40.0, 0.0), 0.0, 10.0, 8.0),
            straight_track(
                "bike",
                RoadUserType::Bicycle,
                (0.0, -20.0),
                std::f64::consts::FRAC_PI_2,
                5.0,
                8.0,
            ),
        ],
    )
}

/// A pedestrian and a cyclist on a curved path near each other.
pub fn curved_pair() -> Scenario {
    scenario(
        "curved",
        vec![
            arc_track(
                "bike",
                RoadUserType::Bicycle,
                (0.0, 0.0),
                12.0,
                -0.5,
                1.0,
                4.0,
                8.0,
            ),
            straight_track("ped", RoadUserType::Pedestrian, (10.0, 8.0), 2.5, 1.4, 8.0),
        ],
    )
}

/// `n` agents of mixed types on straight or curved paths inside a 120 m box.
pub fn random_scenario(id: &str, seed: u64, n: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tracks = (0..n)
        .map(|i| {
            let kind = match rng.random_range(0..10) {
                0..=6 => RoadUserType::Car,
                7..=8 => RoadUserType::Pedestrian,
                _ => RoadUserType::Bicycle,
            };
            let speed: f64 = match kind {
                RoadUserType::Car => rng.random_range(0.0..15.0),
                RoadUserType::Pedestrian => rng.random_range(0.0..2.0),
                RoadUserType::Bicycle => rng.random_range(2.0..7.0),
            };
            let x = rng.random_range(-60.0..60.0);
            let y = rng.random_range(-60.0..60.0);
            let heading = rng.random_range(-3.1..3.1);
            let agent = format!("agent{i:02}");
            if rng.random_bool(0.3) {
                let radius = rng.random_range(10.0..40.0);
                let turn = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                arc_track(
                    &agent,
                    kind,
                    (x, y),
                    radius,
                    heading,
                    turn,
                    speed.max(1.0),
                    8.0,
                )
            } else {
                straight_track(&agent, kind, (x, y), heading, speed, 8.0)
            }
        })
        .collect();
    scenario(id, tracks)
}

/// Applies one rigid motion (rotation by `angle` then translation) to every point.
pub fn transform(s: &Scenario, angle: f64, dx: f64, dy: f64) -> Scenario {
    let (sn, cs) = angle.sin_cos();
    let mut out = s.clone();
    for track in &mut out.tracks {
        for p in &mut track.points {
            let (x, y) = (p.x, p.y);
            p.x = cs * x - sn * y + dx;
            p.y = sn * x + cs * y + dy;
            p.heading = normalize_angle(p.heading + angle);
        }
    }
    out
}

pub fn write_dataset(dir: &Path, file: &str, scenarios: &[Scenario]) {
    let text: String = scenarios
        .iter()
        .map(|s| s.to_record_line() + "\n")
        .collect();
    std::fs::write(dir.join(file), text).unwrap();
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Independent check of the Gaussian overlap integral: evaluates both
/// densities on a grid aligned with the principal axes of their product,
/// spanning ±6σ with step σ/20 along each axis.
pub mod quadrature {
    use nalgebra::{Matrix2, SymmetricEigen, Vector2};
    use risk_sieve::GaussianComponent;

    fn log_density(c: &GaussianComponent, x: &Vector2<f64>) -> f64 {
        let inv = c.cov.try_inverse().expect("invertible covariance");
        let d = x - c.mean;
        -0.5 * d.dot(&(inv * d))
            - (2.0 * std::f64::consts::PI).ln()
            - 0.5 * c.cov.determinant().ln()
    }

    pub fn overlap(a: &GaussianComponent, b: &GaussianComponent) -> f64 {
        let ia = a.cov.try_inverse().unwrap();
        let ib = b.cov.try_inverse().unwrap();
        let product_cov: Matrix2<f64> = (ia + ib).try_inverse().unwrap();
        let center = product_cov * (ia * a.mean + ib * b.mean);
        let eig = SymmetricEigen::new(product_cov);
        let s1 = eig.eigenvalues[0].sqrt();
        let s2 = eig.eigenvalues[1].sqrt();
        let e1: Vector2<f64> = eig.eigenvectors.column(0).into();
        let e2: Vector2<f64> = eig.eigenvectors.column(1).into();
        let (h1, h2) = (s1 / 20.0, s2 / 20.0);
        let mut sum = 0.0;
        for i in -120..=120 {
            for j in -120..=120 {
                let x = center + e1 * (i as f64 * h1) + e2 * (j as f64 * h2);
                sum += (log_density(a, &x) + log_density(b, &x)).exp();
            }
        }
        a.weight * b.weight * sum * h1 * h2
    }
}
