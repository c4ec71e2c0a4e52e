use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};

/// Maps an angle into (−π, π]. Values already in range are returned unchanged.
pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = angle - TAU * ((angle + PI) / TAU).floor();
    // floor puts us in [−π, π); fold the open end.
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

pub fn unit(heading: f64) -> Vector2<f64> {
    let (s, c) = heading.sin_cos();
    Vector2::new(c, s)
}

pub fn rotation(heading: f64) -> Matrix2<f64> {
    let (s, c) = heading.sin_cos();
    Matrix2::new(c, -s, s, c)
}
