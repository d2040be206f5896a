//! Incremental Marching Cubes over the blocks touched by a frame.
//!
//! Each frame runs five phases separated by barriers:
//! cube typing (with optional refinement), vertex placement, triangulation,
//! garbage collection and normal estimation. Within a phase, work is split by
//! block; the only cross-cube writes are vertex-slot claims and reference
//! count updates, both atomic.

mod normals;
mod placement;
pub mod tables;
mod triangulate;

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refiner::{is_irregular, refine_type, RefineParams};
use crate::store::{local_from_index, BlockId, EdgeKey, Neighborhood, Store, CUBES_PER_BLOCK};
use tables::CORNER_OFFSETS;

pub use tables::mc_lookup;

/// How concurrent requests for one edge vertex are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Single thread, fixed loop order.
    Serial,
    /// Any worker may request any slot; the first to claim it allocates.
    Claim,
    /// Eight passes over parity classes of cube coordinates; no two cubes in
    /// a pass share an edge, so slots are written without contention.
    Partition,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(Strategy::Serial),
            "claim" => Ok(Strategy::Claim),
            "partition" => Ok(Strategy::Partition),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Serial => "serial",
            Strategy::Claim => "claim",
            Strategy::Partition => "partition",
        })
    }
}

/// Vertex ownership model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshMode {
    /// Vertices live on lattice edges and are shared by adjacent cubes.
    Shared,
    /// Baseline: every triangle owns three private vertices.
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub cube_size: f64,
    pub strategy: Strategy,
    pub mode: MeshMode,
    pub refine: RefineParams,
}

/// Per-frame mesher counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MeshReport {
    pub blocks_meshed: usize,
    pub cubes_typed: usize,
    pub irregular_cubes: usize,
    pub refined_cubes: usize,
    pub type_changes: usize,
    pub vertices_allocated: usize,
    pub vertices_freed: usize,
    pub triangles_created: usize,
    pub triangles_destroyed: usize,
    pub degenerate_edges: u64,
}

/// Zero crossing parameter along an edge, `d0 / (d0 - d1)`. Outside `[0, 1]`
/// when both ends share a sign. `None` when `d0 == d1`.
pub fn interpolation_param(d0: f64, d1: f64) -> Option<f64> {
    (d0 != d1).then(|| d0 / (d0 - d1))
}

/// Linear zero crossing between `p0` and `p1`. Equal values fall back to the
/// midpoint; the flag reports that case.
pub fn interpolate_vertex(d0: f64, d1: f64, p0: [f64; 3], p1: [f64; 3]) -> ([f64; 3], bool) {
    let (t, degenerate) = match interpolation_param(d0, d1) {
        Some(t) => (t, false),
        None => (0.5, true),
    };
    (
        std::array::from_fn(|i| p0[i] + t * (p1[i] - p0[i])),
        degenerate,
    )
}

/// Cube type from eight corner values: bit `k` set when corner `k` is below zero.
pub fn cube_type_bits(corners: &[f64; 8]) -> u8 {
    corners
        .iter()
        .enumerate()
        .fold(0u8, |t, (k, &d)| if d < 0.0 { t | (1 << k) } else { t })
}

pub(crate) struct FrameCtx<'a> {
    pub store: &'a Store,
    pub params: &'a MeshParams,
    pub frame: u32,
    pub degenerate: AtomicU64,
}

impl FrameCtx<'_> {
    fn parallel(&self) -> bool {
        self.params.strategy != Strategy::Serial
    }

    /// Position of the vertex on `key`, computed from the edge's own endpoints
    /// so every requesting cube produces identical bits.
    pub(crate) fn edge_position(
        &self,
        nb: &Neighborhood,
        owner_rel: [i32; 3],
        key: EdgeKey,
    ) -> [f32; 3] {
        let a = key.axis.index();
        let mut far = owner_rel;
        far[a] += 1;
        let (d0, d1) = (nb.sample(owner_rel).tsdf, nb.sample(far).tsdf);
        let (p0, p1) = key.endpoints(self.params.cube_size);
        let (p, degenerate) = interpolate_vertex(d0, d1, p0, p1);
        if degenerate {
            self.degenerate.fetch_add(1, Ordering::Relaxed);
        }
        p.map(|x| x as f32)
    }
}

/// Runs `f` over `items`, in parallel unless `parallel` is false; results
/// keep input order.
pub(crate) fn for_blocks<T, R, F>(items: &[T], parallel: bool, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Set of cube indices within one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct CubeMask([u64; CUBES_PER_BLOCK / 64]);

impl CubeMask {
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64)
                .filter(move |b| bits & (1 << b) != 0)
                .map(move |b| w * 64 + b)
        })
    }
}

#[derive(Default, Clone, Copy)]
struct TypeCounts {
    mask: CubeMask,
    typed: usize,
    irregular: usize,
    refined: usize,
    changed: usize,
}

/// Types every cube of a block from its eight corners; cubes with an
/// unobserved corner keep their previous type.
fn type_block(ctx: &FrameCtx, id: BlockId) -> TypeCounts {
    let nb = Neighborhood::new(ctx.store, id);
    let mut n = TypeCounts::default();
    for i in 0..CUBES_PER_BLOCK {
        let rel = local_from_index(i).map(i32::from);
        let cube = nb.center().cube(local_from_index(i));
        let mut corners = [0.0; 8];
        let mut observed = true;
        for (k, off) in CORNER_OFFSETS.iter().enumerate() {
            let s = nb.sample([rel[0] + off[0], rel[1] + off[1], rel[2] + off[2]]);
            observed &= s.observed();
            corners[k] = s.tsdf;
        }
        if !observed {
            cube.hold_type();
            continue;
        }
        let raw = cube_type_bits(&corners);
        let prev = cube.type_curr();
        let t = refine_type(raw, prev, &corners, &ctx.params.refine);
        cube.push_type(t);
        n.mask.insert(i);
        n.typed += 1;
        n.irregular += is_irregular(t) as usize;
        n.refined += (t != raw) as usize;
        n.changed += (t != prev) as usize;
    }
    n
}

/// Computes and stores the type of one cube; `None` if a corner is unobserved.
pub fn compute_cube_type(
    store: &Store,
    cube: crate::store::CubeCoord,
    refine: &RefineParams,
) -> Option<u8> {
    let mut corners = [0.0; 8];
    for (k, off) in CORNER_OFFSETS.iter().enumerate() {
        let s = store.corner_sample(cube.offset(*off));
        if !s.observed() {
            return None;
        }
        corners[k] = s.tsdf;
    }
    let c = store.cube(cube)?;
    let t = refine_type(cube_type_bits(&corners), c.type_curr(), &corners, refine);
    c.push_type(t);
    Some(t)
}

/// Updates the mesh for the given blocks (sorted by coordinate).
pub fn extract_frame(
    store: &Store,
    blocks: &[BlockId],
    params: &MeshParams,
    frame: u32,
) -> Result<MeshReport> {
    let ctx = FrameCtx {
        store,
        params,
        frame,
        degenerate: AtomicU64::new(0),
    };
    let mut report = MeshReport {
        blocks_meshed: blocks.len(),
        ..MeshReport::default()
    };
    if blocks.is_empty() {
        return Ok(report);
    }

    let counts = for_blocks(blocks, ctx.parallel(), |&id| Ok(type_block(&ctx, id)))?;
    let typed: Vec<CubeMask> = counts.iter().map(|c| c.mask).collect();
    for c in counts {
        report.cubes_typed += c.typed;
        report.irregular_cubes += c.irregular;
        report.refined_cubes += c.refined;
        report.type_changes += c.changed;
    }

    let allocated_before = store.vertex_pool().allocs_total();
    let mut candidates = match params.mode {
        MeshMode::Shared => placement::place_vertices(&ctx, blocks, &typed)?,
        MeshMode::Loose => Vec::new(),
    };

    let tri = triangulate::triangulate(&ctx, blocks, &typed)?;
    report.triangles_created = tri.created;
    report.triangles_destroyed = tri.destroyed;
    candidates.extend(tri.orphans);
    report.vertices_allocated = (store.vertex_pool().allocs_total() - allocated_before) as usize;

    report.vertices_freed = triangulate::garbage_collect(store, candidates)?;

    if params.mode == MeshMode::Shared {
        normals::update_normals(&ctx, blocks, &typed)?;
    }
    report.degenerate_edges = ctx.degenerate.load(Ordering::Relaxed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_examples() {
        let (p, deg) = interpolate_vertex(-0.5, 0.5, [0.0; 3], [1.0, 0.0, 0.0]);
        assert_eq!((p, deg), ([0.5, 0.0, 0.0], false));
        let (p, _) = interpolate_vertex(-0.25, 0.75, [0.0; 3], [0.0, 2.0, 0.0]);
        assert_eq!(p, [0.0, 0.5, 0.0]);
        // same signs extrapolate on the p0 side
        assert_eq!(interpolation_param(0.1, 0.5), Some(-0.25));
        let (p, deg) = interpolate_vertex(0.3, 0.3, [0.0; 3], [0.0, 0.0, 1.0]);
        assert_eq!((p, deg), ([0.0, 0.0, 0.5], true));
    }

    #[test]
    fn cube_type_extremes() {
        assert_eq!(cube_type_bits(&[0.2; 8]), 0);
        assert_eq!(cube_type_bits(&[-0.2; 8]), 255);
        // zero is not below the isovalue
        assert_eq!(cube_type_bits(&[0.0; 8]), 0);
    }

    #[test]
    fn strategy_parses() {
        assert_eq!("claim".parse::<Strategy>().unwrap(), Strategy::Claim);
        assert!("locked".parse::<Strategy>().is_err());
        assert_eq!(Strategy::Partition.to_string(), "partition");
    }
}
