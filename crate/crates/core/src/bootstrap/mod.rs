//! Ground-truth map generation by repeated 1D scoring, and the on-disk
//! dataset of (graph, map) pairs.

mod dataset;
mod format;

use thiserror::Error;

use crate::costmap::CostMap;
use crate::graph::grid_coords_unchecked;
use crate::scenario::{shift_scenario, Frame, Scenario};
use crate::scoring::Scorer;

pub use dataset::{
    build_dataset, load_dataset, load_split, manifest_hash, DatasetError, DatasetManifest, DatasetReader, DatasetSample,
    DatasetSpec, SplitInfo, FORMAT_VERSION, SPLITS,
};

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("map side must be odd and at least 3, got {0}")]
    EvenSide(usize),
    #[error("scenario must be in the robot frame, found {0}")]
    WrongFrame(Frame),
}

/// Samples a `side`×`side` map by moving the robot to every cell position of
/// the lattice and asking `scorer` for a single score each time. Issues
/// exactly `side²` scorer queries.
pub fn sample_map(s: &Scenario, scorer: &dyn Scorer, side: usize, area_side: f64) -> Result<CostMap, BootstrapError> {
    if side < 3 || side % 2 == 0 {
        return Err(BootstrapError::EvenSide(side));
    }
    if s.frame != Frame::Robot {
        return Err(BootstrapError::WrongFrame(s.frame));
    }
    let mut values = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let (x, y) = grid_coords_unchecked(i, j, side, area_side);
            let shifted = shift_scenario(s, x, y).expect("robot frame checked");
            values.push(scorer.score(&shifted));
        }
    }
    Ok(CostMap::from_clamped(side, area_side, values).expect("side checked"))
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::geom::{distance_to_boundary, point_in_polygon, Point2};
    use crate::scenario::{generate_scenario, to_robot_frame, Pose2D, ScenarioClass};
    use crate::scoring::{reference_score, ReferenceScorer, SocialParams};

    struct Counting<'a> {
        inner: &'a dyn Scorer,
        calls: AtomicUsize,
    }

    impl Scorer for Counting<'_> {
        fn score(&self, s: &Scenario) -> f64 {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.score(s)
        }
    }

    fn robot_scene(seed: u64) -> Scenario {
        to_robot_frame(&generate_scenario(ScenarioClass::ALL[(seed % 3) as usize], seed).unwrap()).unwrap()
    }

    #[test]
    fn query_count_and_centre() {
        let teacher = ReferenceScorer::default();
        let counting = Counting { inner: &teacher, calls: AtomicUsize::new(0) };
        let s = robot_scene(3);
        let m = sample_map(&s, &counting, 73, 10.0).unwrap();
        assert_eq!(counting.calls.load(Ordering::Relaxed), 5329);
        assert_eq!(m.get(36, 36).to_bits(), reference_score(&s, &teacher.params).unwrap().to_bits());
    }

    #[test]
    fn empty_room_cells() {
        let p = SocialParams::default();
        let s = Scenario {
            room: vec![Point2::new(-3.0, -4.0), Point2::new(4.0, -4.0), Point2::new(4.0, 3.5), Point2::new(-3.0, 3.5)],
            humans: vec![],
            objects: vec![],
            interactions: vec![],
            robot: Pose2D::default(),
            goal: Point2::new(1.0, 1.0),
            frame: Frame::Robot,
        };
        let m = sample_map(&s, &ReferenceScorer { params: p }, 73, 10.0).unwrap();
        for i in 0..73 {
            for j in 0..73 {
                let (x, y) = m.cell_position(i, j);
                let at = Point2::new(x, y);
                if !point_in_polygon(at, &s.room) {
                    assert_eq!(m.get(i, j), 0.0);
                } else if distance_to_boundary(at, &s.room) >= p.wall_margin {
                    assert!(m.get(i, j) >= 0.999);
                }
            }
        }
    }

    #[test]
    fn resolution_consistency() {
        let teacher = ReferenceScorer::default();
        for seed in 0..5 {
            let s = robot_scene(seed);
            let fine = sample_map(&s, &teacher, 73, 10.0).unwrap();
            let coarse = sample_map(&s, &teacher, 19, 10.0).unwrap();
            for i in 0..19 {
                for j in 0..19 {
                    assert!((fine.get(4 * i, 4 * j) - coarse.get(i, j)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_even_side_and_world_frame() {
        let teacher = ReferenceScorer::default();
        let s = robot_scene(1);
        assert!(matches!(sample_map(&s, &teacher, 72, 10.0), Err(BootstrapError::EvenSide(72))));
        let w = generate_scenario(ScenarioClass::SA, 1).unwrap();
        assert!(matches!(sample_map(&w, &teacher, 73, 10.0), Err(BootstrapError::WrongFrame(Frame::World))));
    }
}
