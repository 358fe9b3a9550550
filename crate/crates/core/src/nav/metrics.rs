use serde::{Deserialize, Serialize};

use super::{NavConfig, TimedPose};
use crate::geom::{point_segment_distance, wrap_angle, Point2};
use crate::scenario::{InteractionKind, Scenario};

pub const METRIC_NAMES: [&str; 7] = ["tau", "d_t", "chc", "d_min", "si_i", "si_p", "si_r"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Seconds.
    pub tau: f64,
    /// Metres travelled.
    pub d_t: f64,
    /// Cumulative heading change, radians.
    pub chc: f64,
    /// Closest robot-human distance, metres; infinite without humans.
    pub d_min: f64,
    /// Percent of timesteps closer than the intimate distance to a human.
    pub si_i: f64,
    /// Percent of timesteps closer than the personal distance to a human.
    pub si_p: f64,
    /// Percent of timesteps near an interaction segment.
    pub si_r: f64,
}

impl EpisodeMetrics {
    pub fn values(&self) -> [f64; 7] {
        [self.tau, self.d_t, self.chc, self.d_min, self.si_i, self.si_p, self.si_r]
    }
}

/// Metrics of a robot trajectory among `humans` tracks sampled at the same
/// instants. Interaction segments are taken from `scenario` and follow the
/// tracked human positions.
pub fn metrics_from_tracks(trajectory: &[TimedPose], humans: &[Vec<TimedPose>], scenario: &Scenario, cfg: &NavConfig) -> EpisodeMetrics {
    let Some(last) = trajectory.last() else {
        return EpisodeMetrics { d_min: f64::INFINITY, ..Default::default() };
    };
    let mut m = EpisodeMetrics { tau: last.t, d_min: f64::INFINITY, ..Default::default() };
    for w in trajectory.windows(2) {
        m.d_t += w[0].position().dist(w[1].position());
        m.chc += wrap_angle(w[1].theta - w[0].theta).abs();
    }
    let index_of = |id: u32| scenario.humans.iter().position(|h| h.id == id);
    let (mut n_i, mut n_p, mut n_r) = (0usize, 0usize, 0usize);
    for (k, pose) in trajectory.iter().enumerate() {
        let p = pose.position();
        let mut nearest = f64::INFINITY;
        for track in humans {
            nearest = nearest.min(p.dist(track[k].position()));
        }
        m.d_min = m.d_min.min(nearest);
        n_i += (nearest < cfg.intimate_distance) as usize;
        n_p += (nearest < cfg.personal_distance) as usize;
        let near_interaction = scenario.interactions.iter().any(|it| {
            let Some(a) = index_of(it.a).map(|a| humans[a][k].position()) else { return false };
            let b: Option<Point2> = match it.kind {
                InteractionKind::HumanHuman => index_of(it.b).map(|b| humans[b][k].position()),
                InteractionKind::HumanObject => scenario.object(it.b).map(|o| o.pose.position()),
            };
            b.is_some_and(|b| point_segment_distance(p, a, b) < cfg.interaction_distance)
        });
        n_r += near_interaction as usize;
    }
    let pct = |n: usize| 100.0 * n as f64 / trajectory.len() as f64;
    m.si_i = pct(n_i);
    m.si_p = pct(n_p);
    m.si_r = pct(n_r);
    m
}
