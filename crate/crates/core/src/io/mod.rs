//! File formats: depth images, trajectories, intrinsics, meshes, statistics
//! and synthetic datasets.

pub mod dataset;
pub mod intrinsics;
pub mod mesh;
pub mod pgm;
pub mod stats;
pub mod synth;
pub mod trajectory;

pub use dataset::Dataset;
pub use mesh::{write_obj, write_ply, ColorMode};
pub use pgm::{read_depth, write_depth, DEFAULT_DEPTH_SCALE};
pub use stats::{read_stats, write_stats, StatsRow};
pub use synth::{synth_sequence, CameraPath, Primitive, SceneSpec};
pub use trajectory::{read_trajectory, write_trajectory, Stamped};
