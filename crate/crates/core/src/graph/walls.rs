use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::geom::{signed_area2, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub p1: Point2,
    pub p2: Point2,
    pub midpoint: Point2,
    /// Direction of the inward normal, radians.
    pub orientation: f64,
}

impl WallSegment {
    pub fn length(&self) -> f64 {
        self.p1.dist(self.p2)
    }
}

/// Splits each polygon edge into `ceil(len / max_len)` equal pieces, in
/// polygon order.
pub fn segment_walls(room: &[Point2], max_len: f64) -> Result<Vec<WallSegment>, GraphError> {
    if !(max_len > 0.0) {
        return Err(GraphError::Config(format!("max wall segment must be positive, got {max_len}")));
    }
    let n = room.len();
    // Left normal points inward for counter-clockwise polygons.
    let ccw = signed_area2(room) > 0.0;
    let mut out = Vec::new();
    for e in 0..n {
        let a = room[e];
        let b = room[(e + 1) % n];
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return Err(GraphError::DegenerateEdge(e));
        }
        let normal = if ccw { Point2::new(-d.y, d.x) } else { Point2::new(d.y, -d.x) };
        let orientation = normal.y.atan2(normal.x);
        let pieces = (len / max_len).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let t0 = k as f64 / pieces as f64;
            let t1 = (k + 1) as f64 / pieces as f64;
            let p1 = a + d * t0;
            let p2 = if k + 1 == pieces { b } else { a + d * t1 };
            out.push(WallSegment { p1, p2, midpoint: (p1 + p2) * 0.5, orientation });
        }
    }
    Ok(out)
}
