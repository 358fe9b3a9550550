use super::model::{PreparedGraph, Sngnn2d};
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index with the largest error.
    pub worst_index: usize,
    pub checked: usize,
    pub gradient_norm: f64,
}

/// Relative error `|a - n| / max(|a| + |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

/// Compares analytic loss gradients against central differences for the
/// parameters in `indices` (all of them when `None`).
pub fn gradient_check(
    model: &Sngnn2d<f64>,
    graph: &PreparedGraph<f64>,
    target: &[f64],
    eps: f64,
    indices: Option<&[usize]>,
) -> Result<GradCheckReport, ModelError> {
    let (_, grad) = model.loss_and_grad(graph, target)?;
    let all: Vec<usize>;
    let indices = match indices {
        Some(ix) => ix,
        None => {
            all = (0..grad.len()).collect();
            &all
        }
    };
    let mut probe = model.clone();
    let loss_at = |m: &Sngnn2d<f64>| -> Result<f64, ModelError> {
        let out = m.forward_raw(graph)?;
        Ok(out.iter().zip(target).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / out.len() as f64)
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
        gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    };
    for &k in indices {
        if k >= grad.len() {
            return Err(ModelError::Shape(format!("parameter index {k} out of range")));
        }
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + eps;
        let up = loss_at(&probe)?;
        probe.params_mut()[k] = orig - eps;
        let down = loss_at(&probe)?;
        probe.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let e = relative_error(grad[k], numeric, 1e-6);
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst_index = k;
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::graph::{build_scene_graph, GraphConfig};
    use crate::nn::{Activation, ModelConfig};
    use crate::scenario::{Frame, Human, Pose2D, Scenario};

    pub(crate) fn tiny_scene() -> Scenario {
        let room = vec![Point2::new(-3.0, -3.0), Point2::new(3.0, -3.0), Point2::new(3.0, 3.0), Point2::new(-3.0, 3.0)];
        Scenario {
            room,
            humans: vec![Human { id: 0, pose: Pose2D::new(1.0, 0.5, 2.0), walking: false, speed: 0.0, waypoints: vec![] }],
            objects: vec![],
            interactions: vec![],
            robot: Pose2D::new(0.0, 0.0, 0.0),
            goal: Point2::new(2.0, 2.0),
            frame: Frame::Robot,
        }
    }

    fn setup(activation: Activation) -> (Sngnn2d<f64>, PreparedGraph<f64>, Vec<f64>) {
        let gc = GraphConfig { grid_side: 2, area_side: 4.0, max_wall_segment: 10.0 };
        let g = build_scene_graph(&tiny_scene(), &gc).unwrap();
        assert!(g.nodes.len() <= 10, "{} nodes", g.nodes.len());
        let cfg = ModelConfig { activation, ..ModelConfig::tiny() };
        let m = Sngnn2d::<f64>::new(cfg, 3).unwrap();
        let pg = m.prepare(&g).unwrap();
        let cells = m.config().output_side.pow(2);
        let target = (0..cells).map(|k| (k as f64 * 0.37).sin() * 0.5 + 0.5).collect();
        (m, pg, target)
    }

    #[test]
    fn linear_network_exact() {
        let (m, pg, t) = setup(Activation::Identity);
        let r = gradient_check(&m, &pg, &t, 1e-4, None).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, m.parameter_count());
    }

    #[test]
    fn elu_network() {
        let (m, pg, t) = setup(Activation::Elu);
        let r = gradient_check(&m, &pg, &t, 1e-5, None).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn stationary_at_zero_loss() {
        let (m, pg, _) = setup(Activation::Elu);
        let t = m.forward_raw(&pg).unwrap();
        let r = gradient_check(&m, &pg, &t, 1e-5, Some(&[0])).unwrap();
        assert!(r.gradient_norm < 1e-8, "{r:?}");
    }

    #[test]
    fn basis_decomposition_gradients() {
        let gc = GraphConfig { grid_side: 2, area_side: 4.0, max_wall_segment: 10.0 };
        let g = build_scene_graph(&tiny_scene(), &gc).unwrap();
        let cfg = ModelConfig { num_bases: 2, ..ModelConfig::tiny() };
        let m = Sngnn2d::<f64>::new(cfg, 9).unwrap();
        let pg = m.prepare(&g).unwrap();
        let t = vec![0.25; 81];
        let r = gradient_check(&m, &pg, &t, 1e-5, None).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn full_size_spot_check() {
        let g = build_scene_graph(&tiny_scene(), &GraphConfig::default()).unwrap();
        let m = Sngnn2d::<f64>::new(ModelConfig::default(), 5).unwrap();
        let pg = m.prepare(&g).unwrap();
        let t = vec![0.8; 73 * 73];
        let l = m.layout();
        let picks = [l.graph[0].self_weight.start, l.graph[7].relation.start + 3, l.conv[0].weight.start + 11];
        let r = gradient_check(&m, &pg, &t, 1e-5, Some(&picks)).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
