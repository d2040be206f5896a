//! Incremental mesh reconstruction from streamed depth images.
//!
//! Depth frames are fused into a sparse TSDF stored in hashed 8x8x8 blocks.
//! After each frame the mesh is updated in place: vertices live on lattice
//! edges and are shared by every cube touching the edge, triangles are only
//! rebuilt where a cube's sign pattern changed, and vertices whose last
//! triangle disappears return to a pool.

pub mod engine;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod io;
pub mod mesher;
pub mod refiner;
pub mod store;

pub use engine::{audit_store, AuditReport, Engine, EngineConfig, FrameReport};
pub use error::{Error, Result};
pub use fusion::{DepthFrame, FusionParams, Intrinsics, Pose};
pub use mesher::{MeshMode, MeshParams, MeshReport, Strategy};
pub use refiner::RefineParams;
pub use store::{Capacity, CompactMesh, Store};
