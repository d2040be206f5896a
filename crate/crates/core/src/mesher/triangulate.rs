//! Triangle replacement for cubes whose type changed, and collection of
//! vertices left without triangles.

use std::sync::atomic::Ordering;

use super::tables::{mc_lookup, EDGE_OWNER};
use super::{for_blocks, CubeMask, FrameCtx, MeshMode};
use crate::error::{Error, Result};
use crate::store::{
    local_from_index, BlockId, Cube, EdgeKey, Neighborhood, Store, TriangleId, VertexId, EMPTY_SLOT,
};

#[derive(Default)]
pub(super) struct TriangulateOutcome {
    pub created: usize,
    pub destroyed: usize,
    /// Vertices whose reference count reached zero at some point.
    pub orphans: Vec<VertexId>,
}

pub(super) fn triangulate(
    ctx: &FrameCtx,
    blocks: &[BlockId],
    typed: &[CubeMask],
) -> Result<TriangulateOutcome> {
    let work: Vec<(BlockId, &CubeMask)> = blocks.iter().copied().zip(typed).collect();
    let parts = for_blocks(&work, ctx.parallel(), |&(id, m)| {
        triangulate_block(ctx, id, m)
    })?;
    let mut out = TriangulateOutcome::default();
    for p in parts {
        out.created += p.created;
        out.destroyed += p.destroyed;
        out.orphans.extend(p.orphans);
    }
    Ok(out)
}

fn triangulate_block(ctx: &FrameCtx, id: BlockId, typed: &CubeMask) -> Result<TriangulateOutcome> {
    let nb = Neighborhood::new(ctx.store, id);
    let mut out = TriangulateOutcome::default();
    for i in typed.iter() {
        let local = local_from_index(i);
        let cube = nb.center().cube(local);
        if cube.type_prev() == cube.type_curr() {
            continue;
        }
        out.destroyed += clear_triangles(ctx.store, cube, &mut out.orphans);

        let rel = local.map(i32::from);
        let (_, layout) = mc_lookup(cube.type_curr());
        for (slot, tri) in cube.triangle_slots().iter().zip(layout) {
            let v = match ctx.params.mode {
                MeshMode::Shared => tri.map(|e| {
                    let (off, axis) = EDGE_OWNER[e];
                    let owner = [rel[0] + off[0], rel[1] + off[1], rel[2] + off[2]];
                    nb.cube(owner)
                        .and_then(|c| c.edge_vertex(axis))
                        .map(VertexId)
                        .ok_or(Error::MissingEdgeVertex {
                            edge: EdgeKey::new(nb.cube_coord(owner), axis),
                        })
                }),
                MeshMode::Loose => tri.map(|e| {
                    let (off, axis) = EDGE_OWNER[e];
                    let owner = [rel[0] + off[0], rel[1] + off[1], rel[2] + off[2]];
                    let key = EdgeKey::new(nb.cube_coord(owner), axis);
                    let v = ctx.store.allocate_vertex(ctx.frame, None)?;
                    ctx.store
                        .vertex(v)
                        .set_position(ctx.edge_position(&nb, owner, key));
                    out.orphans.push(v);
                    Ok(v)
                }),
            };
            let [a, b, c] = v;
            let [a, b, c] = [a?, b?, c?];
            // table winding faces the negative side; flip to face outward
            let t = ctx.store.create_triangle([a, c, b])?;
            if ctx.params.mode == MeshMode::Loose {
                let n = face_normal(ctx.store, t);
                for h in [a, b, c] {
                    ctx.store.vertex(h).set_normal(n);
                }
            }
            slot.store(t.0, Ordering::Release);
            out.created += 1;
        }
    }
    Ok(out)
}

fn clear_triangles(store: &Store, cube: &Cube, orphans: &mut Vec<VertexId>) -> usize {
    let mut n = 0;
    for slot in cube.triangle_slots() {
        let h = slot.swap(EMPTY_SLOT, Ordering::AcqRel);
        if h != EMPTY_SLOT {
            store.destroy_triangle(TriangleId(h), orphans);
            n += 1;
        }
    }
    n
}

/// Unit normal of a triangle, zero for degenerate ones.
pub(super) fn face_normal(store: &Store, t: TriangleId) -> [f32; 3] {
    let [a, b, c] = store
        .triangle(t)
        .vertices()
        .map(|v| store.vertex(v).position().map(f64::from));
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [
        u[1] * w[2] - u[2] * w[1],
        u[2] * w[0] - u[0] * w[2],
        u[0] * w[1] - u[1] * w[0],
    ];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len > 0.0 {
        n.map(|x| (x / len) as f32)
    } else {
        [0.0; 3]
    }
}

/// Frees every candidate that ended the frame unreferenced, in handle order.
pub(super) fn garbage_collect(store: &Store, mut candidates: Vec<VertexId>) -> Result<usize> {
    candidates.sort_unstable();
    candidates.dedup();
    let mut freed = 0;
    for v in candidates {
        if !store.vertex_pool().is_live(v.0) || store.vertex(v).refcount() != 0 {
            continue;
        }
        if let Some(key) = store.vertex(v).edge() {
            let slot = store.resolve_edge(key)?;
            slot.compare_exchange(v.0, EMPTY_SLOT, Ordering::AcqRel, Ordering::Acquire)
                .map_err(|h| {
                    Error::Internal(format!("edge {key:?} holds {h}, expected vertex {}", v.0))
                })?;
        }
        store.free_vertex(v)?;
        freed += 1;
    }
    Ok(freed)
}
