//! Driving paths recovered from recorded tracks, parameterized by arc length.

use nalgebra::Vector2;

use crate::geometry::{normalize_angle, unit};
use crate::scenario::Track;

/// Default merge distance for near-duplicate recorded positions, meters.
pub const DEFAULT_EPS_DEDUPE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector2<f64>,
    pub heading: f64,
}

/// Polyline through recorded positions.
///
/// Beyond either end the path continues as a straight ray: backwards along the
/// first segment, forwards along `terminal_heading`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    vertices: Vec<Vector2<f64>>,
    cumulative: Vec<f64>,
    segment_headings: Vec<f64>,
    terminal_heading: f64,
}

impl Path {
    /// Builds a path from vertices as given. Exact repeats are dropped; `fallback_heading`
    /// is used as the terminal heading when fewer than two distinct vertices remain.
    ///
    /// Panics on an empty vertex list.
    pub fn from_vertices(vertices: Vec<Vector2<f64>>, fallback_heading: f64) -> Self {
        assert!(!vertices.is_empty(), "path needs at least one vertex");
        let mut kept: Vec<Vector2<f64>> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if kept.last().is_none_or(|last| *last != v) {
                kept.push(v);
            }
        }
        let mut cumulative = Vec::with_capacity(kept.len());
        let mut segment_headings = Vec::with_capacity(kept.len().saturating_sub(1));
        let mut total = 0.0;
        cumulative.push(0.0);
        for w in kept.windows(2) {
            let d = w[1] - w[0];
            total += d.norm();
            cumulative.push(total);
            segment_headings.push(d.y.atan2(d.x));
        }
        let terminal_heading = segment_headings
            .last()
            .copied()
            .unwrap_or_else(|| normalize_angle(fallback_heading));
        Self {
            vertices: kept,
            cumulative,
            segment_headings,
            terminal_heading,
        }
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn terminal_heading(&self) -> f64 {
        self.terminal_heading
    }

    fn initial_heading(&self) -> f64 {
        self.segment_headings
            .first()
            .copied()
            .unwrap_or(self.terminal_heading)
    }

    /// Arc length of the point on the path closest to `p`. Ties go to the earliest.
    pub fn project(&self, p: &Vector2<f64>) -> f64 {
        if self.vertices.len() == 1 {
            return 0.0;
        }
        let mut best_s = 0.0;
        let mut best_d2 = f64::INFINITY;
        for (k, w) in self.vertices.windows(2).enumerate() {
            let seg = w[1] - w[0];
            let len2 = seg.norm_squared();
            let u = ((p - w[0]).dot(&seg) / len2).clamp(0.0, 1.0);
            let closest = w[0] + seg * u;
            let d2 = (p - closest).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best_s = self.cumulative[k] + u * (self.cumulative[k + 1] - self.cumulative[k]);
            }
        }
        best_s
    }

    /// Position and tangent heading at arc length `s`, extrapolating past both ends.
    pub fn pose_at(&self, s: f64) -> Pose {
        let length = self.length();
        if s < 0.0 || self.vertices.len() == 1 {
            let heading = if s < 0.0 {
                self.initial_heading()
            } else {
                self.terminal_heading
            };
            return Pose {
                position: self.vertices[0] + unit(heading) * s,
                heading,
            };
        }
        if s >= length {
            let last = self.vertices[self.vertices.len() - 1];
            return Pose {
                position: last + unit(self.terminal_heading) * (s - length),
                heading: self.terminal_heading,
            };
        }
        // Segment k covers [cumulative[k], cumulative[k + 1]).
        let k = self.cumulative.partition_point(|&c| c <= s) - 1;
        let seg_len = self.cumulative[k + 1] - self.cumulative[k];
        let u = (s - self.cumulative[k]) / seg_len;
        let a = self.vertices[k];
        let b = self.vertices[k + 1];
        Pose {
            position: a + (b - a) * u,
            heading: self.segment_headings[k],
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.pose_at(s).heading
    }
}

/// Recovers the driving path from the track's valid points in time order,
/// merging points closer than `eps_dedupe` to the last kept vertex.
pub fn extract_path(track: &Track, eps_dedupe: f64) -> Path {
    let mut vertices: Vec<Vector2<f64>> = Vec::new();
    let mut fallback_heading = 0.0;
    for p in track.valid_points() {
        let pos = p.position();
        fallback_heading = p.heading;
        match vertices.last() {
            Some(last) if (pos - last).norm() < eps_dedupe => {}
            _ => vertices.push(pos),
        }
    }
    if vertices.is_empty() {
        // Callers check for valid points; keep the type total anyway.
        vertices.push(Vector2::zeros());
    }
    Path::from_vertices(vertices, fallback_heading)
}
