//! Situation-aware layout optimization for mixed-reality user interfaces.
//!
//! The geometric core ([`scene`], [`geometry`], [`objectives`], [`solver`],
//! [`perception`]) is generic over the scalar type through [`Real`]; the
//! aliases below fix it to `f32` or `f64`. [`reasoning`] and [`evalstats`]
//! work on integer ratings and use `f64` throughout.

pub mod evalstats;
pub mod geometry;
pub mod num;
pub mod objectives;
pub mod perception;
pub mod presets;
pub mod reasoning;
pub mod render;
pub mod scene;
pub mod solver;

pub use num::Real;

pub type Vec3f = scene::Vec3<f32>;
pub type Vec3d = scene::Vec3<f64>;
pub type SceneF32 = scene::Scene<f32>;
pub type SceneF64 = scene::Scene<f64>;
pub type LayoutF32 = scene::Layout<f32>;
pub type LayoutF64 = scene::Layout<f64>;
pub type WeightsF32 = objectives::WeightConfig<f32>;
pub type WeightsF64 = objectives::WeightConfig<f64>;
pub type ObjectiveF32 = objectives::ObjectiveConfig<f32>;
pub type ObjectiveF64 = objectives::ObjectiveConfig<f64>;
pub type SolverConfigF32 = solver::SolverConfig<f32>;
pub type SolverConfigF64 = solver::SolverConfig<f64>;
pub type CameraF32 = perception::CameraModel<f32>;
pub type CameraF64 = perception::CameraModel<f64>;
