//! Two-level spatial store: hashed blocks of cubes plus pooled vertices and
//! triangles. Vertices are bound to lattice edges, so each geometric edge holds
//! at most one vertex and is reachable with one hash lookup and a local index.

mod block;
mod compact;
mod coords;
mod pool;
mod table;

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

pub use block::{Block, CornerSample, Cube, CLAIMING_SLOT, EMPTY_SLOT};
pub use compact::CompactMesh;
pub(crate) use coords::NO_EDGE;
pub use coords::{
    local_from_index, local_index, Axis, BlockCoord, CubeCoord, EdgeKey, BLOCK_SIDE,
    CUBES_PER_BLOCK,
};
pub use pool::Pool;
pub use table::{hash_block, BlockId, BlockTable, HASH_P1, HASH_P2, HASH_P3};

use crate::error::{Error, Result};
use pool::FreeError;

/// Handle of a pooled vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

/// Handle of a pooled triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriangleId(pub u32);

fn load_vec3(a: &[AtomicU32; 3]) -> [f32; 3] {
    std::array::from_fn(|i| f32::from_bits(a[i].load(Ordering::Relaxed)))
}

fn store_vec3(a: &[AtomicU32; 3], v: [f32; 3]) {
    for (slot, x) in a.iter().zip(v) {
        slot.store(x.to_bits(), Ordering::Relaxed);
    }
}

/// Pooled vertex record.
#[derive(Debug)]
pub struct Vertex {
    position: [AtomicU32; 3],
    normal: [AtomicU32; 3],
    // reserved, never written
    color: [AtomicU32; 3],
    refcount: AtomicU32,
    birth_frame: AtomicU32,
    edge: AtomicU64,
}

impl Default for Vertex {
    fn default() -> Self {
        Self {
            position: Default::default(),
            normal: Default::default(),
            color: Default::default(),
            refcount: AtomicU32::new(0),
            birth_frame: AtomicU32::new(0),
            edge: AtomicU64::new(NO_EDGE),
        }
    }
}

impl Vertex {
    pub fn position(&self) -> [f32; 3] {
        load_vec3(&self.position)
    }

    pub fn set_position(&self, p: [f32; 3]) {
        store_vec3(&self.position, p);
    }

    pub fn normal(&self) -> [f32; 3] {
        load_vec3(&self.normal)
    }

    pub fn set_normal(&self, n: [f32; 3]) {
        store_vec3(&self.normal, n);
    }

    pub fn color(&self) -> [f32; 3] {
        load_vec3(&self.color)
    }

    pub fn refcount(&self) -> u32 {
        self.refcount.load(Ordering::Acquire)
    }

    pub fn retain(&self) {
        self.refcount.fetch_add(1, Ordering::AcqRel);
    }

    /// Decrements the reference count; true when it reached zero.
    pub fn release(&self) -> bool {
        let prev = self.refcount.fetch_sub(1, Ordering::AcqRel);
        debug_assert!(prev > 0, "refcount underflow");
        prev == 1
    }

    pub fn birth_frame(&self) -> u32 {
        self.birth_frame.load(Ordering::Relaxed)
    }

    /// The lattice edge this vertex is bound to; `None` for unshared vertices.
    pub fn edge(&self) -> Option<EdgeKey> {
        EdgeKey::unpack(self.edge.load(Ordering::Acquire))
    }

    fn reset(&self, birth_frame: u32, edge: Option<EdgeKey>) {
        self.refcount.store(0, Ordering::Relaxed);
        self.birth_frame.store(birth_frame, Ordering::Relaxed);
        self.edge
            .store(edge.map_or(NO_EDGE, EdgeKey::pack), Ordering::Release);
        store_vec3(&self.normal, [0.0; 3]);
    }
}

/// Pooled triangle: three vertex handles.
#[derive(Debug, Default)]
pub struct Triangle {
    v: [AtomicU32; 3],
}

impl Triangle {
    pub fn vertices(&self) -> [VertexId; 3] {
        std::array::from_fn(|i| VertexId(self.v[i].load(Ordering::Acquire)))
    }

    fn set(&self, v: [VertexId; 3]) {
        for (slot, id) in self.v.iter().zip(v) {
            slot.store(id.0, Ordering::Release);
        }
    }
}

/// Capacity limits for the store. Exceeding any of them is a capacity error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Capacity {
    pub table_bits: u32,
    pub max_blocks: usize,
    pub max_vertices: usize,
    pub max_triangles: usize,
}

impl Default for Capacity {
    fn default() -> Self {
        Self {
            table_bits: 20,
            max_blocks: 1 << 18,
            max_vertices: 1 << 24,
            max_triangles: 1 << 25,
        }
    }
}

pub struct Store {
    table: BlockTable,
    vertices: Pool<Vertex>,
    triangles: Pool<Triangle>,
}

impl Store {
    pub fn new(cap: Capacity) -> Self {
        Self {
            table: BlockTable::new(cap.table_bits, cap.max_blocks),
            vertices: Pool::with_capacity(cap.max_vertices),
            triangles: Pool::with_capacity(cap.max_triangles),
        }
    }

    pub fn table(&self) -> &BlockTable {
        &self.table
    }

    pub fn vertex_pool(&self) -> &Pool<Vertex> {
        &self.vertices
    }

    pub fn triangle_pool(&self) -> &Pool<Triangle> {
        &self.triangles
    }

    pub fn get_or_allocate_block(&self, c: BlockCoord) -> Result<BlockId> {
        self.table.get_or_allocate(c)
    }

    pub fn block_id(&self, c: BlockCoord) -> Option<BlockId> {
        self.table.lookup(c)
    }

    pub fn block(&self, id: BlockId) -> &Block {
        self.table.block(id)
    }

    pub fn cube(&self, c: CubeCoord) -> Option<&Cube> {
        self.block_id(c.block)
            .map(|id| self.block(id).cube(c.local))
    }

    /// Sample stored at the corner owned by `c`; unallocated space reads as unobserved.
    pub fn corner_sample(&self, c: CubeCoord) -> CornerSample {
        self.cube(c).map_or(CornerSample::UNOBSERVED, Cube::sample)
    }

    /// The vertex slot of `k` inside its owning cube.
    pub fn resolve_edge(&self, k: EdgeKey) -> Result<&AtomicU32> {
        self.cube(k.cube)
            .map(|c| c.edge_slot(k.axis))
            .ok_or(Error::BlockNotFound(k.cube.block))
    }

    pub fn edge_vertex(&self, k: EdgeKey) -> Option<VertexId> {
        self.cube(k.cube)
            .and_then(|c| c.edge_vertex(k.axis))
            .map(VertexId)
    }

    /// Takes a vertex from the pool, recording its birth frame and bound edge.
    pub fn allocate_vertex(&self, birth_frame: u32, edge: Option<EdgeKey>) -> Result<VertexId> {
        let id = self.vertices.allocate().ok_or(Error::Capacity {
            what: "vertex pool",
            limit: self.vertices.capacity(),
        })?;
        self.vertices.get(id).reset(birth_frame, edge);
        Ok(VertexId(id))
    }

    pub fn free_vertex(&self, id: VertexId) -> Result<()> {
        debug_assert_eq!(self.vertex(id).refcount(), 0, "freeing a referenced vertex");
        match self.vertices.free(id.0) {
            Ok(()) => Ok(()),
            Err(FreeError::DoubleFree | FreeError::NotAllocated) => Err(Error::DoubleFree(id)),
        }
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        self.vertices.get(id.0)
    }

    /// Creates a triangle and takes one reference on each of its vertices.
    pub fn create_triangle(&self, v: [VertexId; 3]) -> Result<TriangleId> {
        debug_assert!(v[0] != v[1] && v[1] != v[2] && v[0] != v[2]);
        let id = self.triangles.allocate().ok_or(Error::Capacity {
            what: "triangle pool",
            limit: self.triangles.capacity(),
        })?;
        self.triangles.get(id).set(v);
        for h in v {
            self.vertex(h).retain();
        }
        Ok(TriangleId(id))
    }

    /// Destroys a triangle; returns the vertices whose count dropped to zero.
    pub fn destroy_triangle(&self, id: TriangleId, orphans: &mut Vec<VertexId>) {
        for h in self.triangle(id).vertices() {
            if self.vertex(h).release() {
                orphans.push(h);
            }
        }
        let freed = self.triangles.free(id.0);
        debug_assert!(freed.is_ok(), "triangle {id:?} freed twice");
    }

    pub fn triangle(&self, id: TriangleId) -> &Triangle {
        self.triangles.get(id.0)
    }

    /// Block ids ordered by block coordinate.
    pub fn sorted_block_ids(&self) -> Vec<BlockId> {
        let mut ids: Vec<BlockId> = self.table.ids().collect();
        ids.sort_by_key(|&id| self.block(id).coord());
        ids
    }

    pub fn compact_mesh(&self, current_frame: u32) -> CompactMesh {
        compact::compact(self, current_frame)
    }

    /// Live vertex count.
    pub fn vertices_live(&self) -> usize {
        self.vertices.live()
    }

    pub fn triangles_live(&self) -> usize {
        self.triangles.live()
    }
}

/// The 3x3x3 blocks around a center block, resolved once so that cube access
/// anywhere within one block of the center costs an array index.
pub struct Neighborhood<'a> {
    center: BlockCoord,
    blocks: [Option<&'a Block>; 27],
}

impl<'a> Neighborhood<'a> {
    pub fn new(store: &'a Store, id: BlockId) -> Self {
        let center = store.block(id).coord();
        let mut blocks = [None; 27];
        for (i, slot) in blocks.iter_mut().enumerate() {
            let (dx, dy, dz) = (i as i32 % 3 - 1, (i as i32 / 3) % 3 - 1, i as i32 / 9 - 1);
            *slot = if (dx, dy, dz) == (0, 0, 0) {
                Some(store.block(id))
            } else {
                store
                    .block_id(center.offset(dx, dy, dz))
                    .map(|b| store.block(b))
            };
        }
        Self { center, blocks }
    }

    pub fn center(&self) -> &'a Block {
        self.blocks[13].expect("center block present")
    }

    pub fn center_coord(&self) -> BlockCoord {
        self.center
    }

    /// Cube at block-relative coordinates in `[-8, 16)`.
    pub fn cube(&self, rel: [i32; 3]) -> Option<&'a Cube> {
        let split = |v: i32| {
            debug_assert!((-BLOCK_SIDE..2 * BLOCK_SIDE).contains(&v));
            (v.div_euclid(BLOCK_SIDE) + 1, v.rem_euclid(BLOCK_SIDE) as u8)
        };
        let (bx, lx) = split(rel[0]);
        let (by, ly) = split(rel[1]);
        let (bz, lz) = split(rel[2]);
        self.blocks[(bx + 3 * by + 9 * bz) as usize].map(|b| b.cube([lx, ly, lz]))
    }

    pub fn sample(&self, rel: [i32; 3]) -> CornerSample {
        self.cube(rel)
            .map_or(CornerSample::UNOBSERVED, Cube::sample)
    }

    pub fn cube_coord(&self, rel: [i32; 3]) -> CubeCoord {
        CubeCoord::new(self.center, [0, 0, 0]).offset(rel)
    }
}
