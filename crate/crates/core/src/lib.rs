//! Belief-space engine for manipulation-enhanced mapping of cluttered
//! shelves: a deterministic simulator, evidential (Beta/Dirichlet) map
//! beliefs with exact observation updates and Monte Carlo push
//! propagation, volumetric information gain, and a 2-step greedy planner
//! that chooses between camera views and pushes.

pub mod belief;
pub mod camera;
pub mod dynamics;
pub mod error;
pub mod geom2d;
pub mod grid;
pub mod infogain;
pub mod manip_update;
pub mod metrics;
pub mod obs_update;
pub mod push;
pub mod render;
pub mod scenario;
pub mod scene;

pub use belief::{new_uniform_belief, EvidentialBelief, SemanticMap};
pub use camera::{default_view_grid, Viewpoint};
pub use dynamics::apply_push;
pub use error::{Error, Result};
pub use grid::{bernoulli_entropy, traverse_ray, GridSpec, BACKGROUND_CLASS};
pub use push::{frontier_points, sample_pushes, PushAction, PushSamplerParams};
pub use render::{render, Observation, NO_RETURN};
pub use scene::{to_map, Scene, SceneObject};
