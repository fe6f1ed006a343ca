//! Tool selection and manipulation planning through energy-bounded caging.

// Float checks are written as `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clearance;
pub mod cmaes;
pub mod dataset;
pub mod error;
pub mod escape;
pub mod fixtures;
pub mod geometry;
pub mod keyframe;
pub mod rng;
pub mod scene;
pub mod sim;
pub mod surrogate;
pub mod trajopt;

pub use error::{Error, Result};
pub use escape::{escape_set, estimate_mee, oracle_mee, EscapeQuery, EscapeResult, PlannerParams};
pub use geometry::{Aabb, Body, Polygon, Pose2, Shape, Vec2};
pub use scene::{Bounds, BoxBounds, EnergyField, FieldKind, ObjectConfig, ObjectModel, Plane, Scene, ToolCandidate};
