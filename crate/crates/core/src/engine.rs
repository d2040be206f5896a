//! Frame-by-frame driver: block collection, fusion and incremental meshing on
//! a dedicated worker pool.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{self, DepthFrame, Frustum, FusionParams, Intrinsics, Pose};
use crate::mesher::{self, MeshMode, MeshParams, MeshReport, Strategy};
use crate::refiner::RefineParams;
use crate::store::{
    BlockCoord, BlockId, Capacity, CompactMesh, EdgeKey, Store, TriangleId, VertexId,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub fusion: FusionParams,
    pub strategy: Strategy,
    pub mode: MeshMode,
    pub refine: RefineParams,
    /// Mesh only the blocks seen by the current frame instead of every block.
    pub frustum_only: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub capacity: Capacity,
}

impl EngineConfig {
    pub fn new(cube_size: f64) -> Self {
        Self {
            fusion: FusionParams::new(cube_size),
            strategy: Strategy::Claim,
            mode: MeshMode::Shared,
            refine: RefineParams::default(),
            frustum_only: false,
            workers: 0,
            capacity: Capacity::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        if self.refine.epsilon.is_nan() || self.refine.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.refine.epsilon
            )));
        }
        if !(1..=30).contains(&self.capacity.table_bits) {
            return Err(Error::Config(format!(
                "table bits {} out of range",
                self.capacity.table_bits
            )));
        }
        Ok(())
    }

    fn mesh_params(&self) -> MeshParams {
        MeshParams {
            cube_size: self.fusion.cube_size,
            strategy: self.strategy,
            mode: self.mode,
            refine: self.refine,
        }
    }
}

/// What one call to [`Engine::process_frame`] did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FrameReport {
    pub frame: u32,
    pub blocks_collected: usize,
    pub blocks_allocated: usize,
    pub corners_updated: usize,
    pub mesh: MeshReport,
    pub fusion_ms: f64,
    pub meshing_ms: f64,
}

/// Result of a full consistency scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub vertices_live: usize,
    pub triangles_live: usize,
    pub bound_vertices: usize,
}

pub struct Engine {
    config: EngineConfig,
    intrinsics: Intrinsics,
    store: Store,
    pool: Arc<rayon::ThreadPool>,
    frames: u32,
    // all blocks ordered by coordinate; unused in frustum-only mode
    sorted_blocks: Vec<BlockId>,
}

impl Engine {
    pub fn new(config: EngineConfig, intrinsics: Intrinsics) -> Result<Self> {
        config.validate()?;
        intrinsics.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        let pool = Arc::new(pool);
        Ok(Self {
            config,
            intrinsics,
            store: Store::new(config.capacity),
            pool,
            frames: 0,
            sorted_blocks: Vec::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Frames processed so far.
    pub fn frame_count(&self) -> u32 {
        self.frames
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn process_frame(&mut self, frame: &DepthFrame, pose: &Pose) -> Result<FrameReport> {
        if (frame.width, frame.height) != (self.intrinsics.width, self.intrinsics.height) {
            return Err(Error::Dataset(format!(
                "frame {} is {}x{}, intrinsics expect {}x{}",
                frame.frame_index,
                frame.width,
                frame.height,
                self.intrinsics.width,
                self.intrinsics.height
            )));
        }
        let index = self.frames;
        let pool = Arc::clone(&self.pool);
        let report = pool.install(|| self.run_frame(frame, pose, index))?;
        self.frames += 1;
        Ok(report)
    }

    fn run_frame(&mut self, frame: &DepthFrame, pose: &Pose, index: u32) -> Result<FrameReport> {
        let cfg = self.config;
        let parallel = cfg.strategy != Strategy::Serial;
        let before = self.store.table().len();

        let t0 = Instant::now();
        let coords = fusion::collect_blocks(frame, pose, &self.intrinsics, &cfg.fusion);
        let ids = fusion::allocate_blocks(&self.store, &coords, parallel)?;
        let corners = fusion::integrate_frame(
            &self.store,
            &ids,
            frame,
            pose,
            &self.intrinsics,
            &cfg.fusion,
            parallel,
        );
        let fusion_ms = t0.elapsed().as_secs_f64() * 1e3;

        let t1 = Instant::now();
        let mesh_set = if cfg.frustum_only {
            self.frustum_set(&coords, pose)
        } else {
            self.absorb_new_blocks(before);
            self.sorted_blocks.clone()
        };
        let mesh = mesher::extract_frame(&self.store, &mesh_set, &cfg.mesh_params(), index)?;
        let meshing_ms = t1.elapsed().as_secs_f64() * 1e3;

        Ok(FrameReport {
            frame: index,
            blocks_collected: coords.len(),
            blocks_allocated: self.store.table().len() - before,
            corners_updated: corners,
            mesh,
            fusion_ms,
            meshing_ms,
        })
    }

    fn absorb_new_blocks(&mut self, before: usize) {
        let after = self.store.table().len();
        if after == before {
            return;
        }
        let store = &self.store;
        self.sorted_blocks
            .extend((before as u32..after as u32).map(BlockId));
        self.sorted_blocks
            .sort_by_key(|&id| store.block(id).coord());
    }

    /// Blocks collected this frame plus visible allocated blocks on their
    /// negative side, whose border cubes read corners from the collected ones.
    fn frustum_set(&self, coords: &[BlockCoord], pose: &Pose) -> Vec<BlockId> {
        let frustum = Frustum {
            pose: *pose,
            intrinsics: self.intrinsics,
        };
        let l = self.config.fusion.cube_size;
        let mut set: Vec<BlockCoord> = coords.to_vec();
        for &c in coords {
            for d in 1..8 {
                let n = c.offset(-(d & 1), -((d >> 1) & 1), -((d >> 2) & 1));
                if self.store.block_id(n).is_some() && frustum.intersects_block(n, l) {
                    set.push(n);
                }
            }
        }
        set.sort_unstable();
        set.dedup();
        set.into_iter()
            .filter_map(|c| self.store.block_id(c))
            .collect()
    }

    /// Contiguous copy of the live mesh, ages relative to the latest frame.
    pub fn compact_mesh(&self) -> CompactMesh {
        self.store.compact_mesh(self.frames.saturating_sub(1))
    }

    /// Full scan of the store invariants: reference counts equal incident
    /// triangle counts, triangles reference live vertices, bound vertices are
    /// unique per edge and reachable from their slot, and pool conservation.
    pub fn audit(&self) -> Result<AuditReport> {
        audit_store(&self.store)
    }
}

pub fn audit_store(store: &Store) -> Result<AuditReport> {
    let fail = |msg: String| Err(Error::Internal(msg));
    let vpool = store.vertex_pool();
    let tpool = store.triangle_pool();

    let mut degree: HashMap<u32, u32> = HashMap::new();
    let mut triangles = 0;
    for t in tpool.live_ids() {
        let v = store.triangle(TriangleId(t)).vertices();
        if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
            return fail(format!("triangle {t} repeats a vertex: {v:?}"));
        }
        for h in v {
            if !vpool.is_live(h.0) {
                return fail(format!("triangle {t} references dead vertex {}", h.0));
            }
            *degree.entry(h.0).or_default() += 1;
        }
        triangles += 1;
    }

    let mut edges: HashMap<EdgeKey, u32> = HashMap::new();
    let mut vertices = 0;
    for v in vpool.live_ids() {
        let vert = store.vertex(VertexId(v));
        let deg = degree.get(&v).copied().unwrap_or(0);
        if vert.refcount() != deg {
            return fail(format!(
                "vertex {v}: refcount {} but {deg} incident triangles",
                vert.refcount()
            ));
        }
        if let Some(k) = vert.edge() {
            if let Some(other) = edges.insert(k, v) {
                return fail(format!("vertices {other} and {v} share edge {k:?}"));
            }
            if store.edge_vertex(k) != Some(VertexId(v)) {
                return fail(format!("vertex {v} not reachable from its edge {k:?}"));
            }
        }
        vertices += 1;
    }

    let mut slotted = 0;
    for id in store.table().ids() {
        for cube in store.block(id).cubes() {
            slotted += cube.triangle_handles().count();
        }
    }
    if slotted != triangles {
        return fail(format!(
            "{slotted} triangle slots but {triangles} live triangles"
        ));
    }

    for (name, high, live, free) in [
        ("vertex", vpool.high_water(), vpool.live(), vpool.free_len()),
        (
            "triangle",
            tpool.high_water(),
            tpool.live(),
            tpool.free_len(),
        ),
    ] {
        if high as usize != live + free {
            return fail(format!(
                "{name} pool: {high} allocated != {live} live + {free} free"
            ));
        }
    }
    if vertices != vpool.live() || triangles != tpool.live() {
        return fail("live flags disagree with free lists".into());
    }
    Ok(AuditReport {
        vertices_live: vertices,
        triangles_live: triangles,
        bound_vertices: edges.len(),
    })
}
