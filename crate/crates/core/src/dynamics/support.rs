//! Support polygon and static stability margin.

use nalgebra::Vector2;

use crate::dynamics::ContactSet;
use crate::error::{Error, Result};

const COLLINEAR_EPS: f64 = 1e-12;

/// Convex hull of the contact points projected onto the ground plane,
/// counter-clockwise. Points and segments are kept and flagged degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolygon {
    pub vertices: Vec<Vector2<f64>>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMargin {
    /// Signed distance to the nearest edge; positive inside.
    pub margin_m: f64,
    pub degenerate: bool,
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < COLLINEAR_EPS);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(pts.len() + 1);
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= COLLINEAR_EPS {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= COLLINEAR_EPS {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

pub fn support_polygon(contacts: &ContactSet) -> Result<SupportPolygon> {
    if contacts.is_empty() {
        return Err(Error::Domain("support polygon of an empty contact set".into()));
    }
    let projected: Vec<Vector2<f64>> = contacts.iter().map(|c| Vector2::new(c.point.x, c.point.y)).collect();
    let vertices = convex_hull(&projected);
    let degenerate = vertices.len() < 3;
    Ok(SupportPolygon { vertices, degenerate })
}

fn point_segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub fn stability_margin(com_xy: &Vector2<f64>, polygon: &SupportPolygon) -> StabilityMargin {
    if polygon.degenerate {
        return StabilityMargin { margin_m: 0.0, degenerate: true };
    }
    let v = &polygon.vertices;
    let n = v.len();
    let mut inside = true;
    let mut nearest_line = f64::INFINITY;
    let mut nearest_segment = f64::INFINITY;
    for i in 0..n {
        let a = &v[i];
        let b = &v[(i + 1) % n];
        let signed = cross(a, b, com_xy) / (b - a).norm();
        if signed < 0.0 {
            inside = false;
        }
        nearest_line = nearest_line.min(signed);
        nearest_segment = nearest_segment.min(point_segment_distance(com_xy, a, b));
    }
    let margin_m = if inside { nearest_line } else { -nearest_segment };
    StabilityMargin { margin_m, degenerate: false }
}
