//! Local navigation and evaluation toolkit for ground vehicles driving on
//! semantic segmentation output.
//!
//! The crate turns per-pixel label masks into safe local trajectories and
//! provides the surrounding tooling: perspective rectification to an aerial
//! view, obstacle distance / gradient / goal-distance grid fields, artificial
//! potential field descent with a breadth-first fallback, cubic Bezier
//! smoothing, pixel- and object-level accuracy metrics, a deterministic
//! data-parallel argmax kernel for score volumes, and a simulated
//! camera+lidar fusion loop.

pub mod argmax;
pub mod error;
pub mod fields;
pub mod fusion;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod planner;
pub mod render;
pub mod scenario;

pub use error::{Error, Result};
pub use mask::{Category, CategoryMask, ClassDef, ClassSchema, LabelMask};
