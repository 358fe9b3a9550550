//! Social cost maps for robot navigation: scenario generation, scene graphs,
//! an analytic discomfort model, dataset bootstrapping, a graph-to-grid
//! network and a planning benchmark.

pub mod bootstrap;
pub mod config;
pub mod costmap;
pub mod geom;
pub mod graph;
pub mod nav;
pub mod nn;
pub mod render;
pub mod scalar;
pub mod scenario;
pub mod scoring;
pub mod seeds;

/// Single-precision model, the default for training and inference.
pub type Sngnn2d = nn::Sngnn2d<f32>;
/// Double-precision model, used for gradient checks.
pub type Sngnn2dF64 = nn::Sngnn2d<f64>;
