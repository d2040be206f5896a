//! Vertex normals from the TSDF gradient, interpolated along the vertex's edge.

use super::tables::{mask_edges, EDGE_MASK, EDGE_OWNER};
use super::triangulate::face_normal;
use super::{for_blocks, CubeMask, FrameCtx};
use crate::error::Result;
use crate::store::{local_from_index, Axis, BlockId, Neighborhood, TriangleId, VertexId};

pub(super) fn update_normals(ctx: &FrameCtx, blocks: &[BlockId], typed: &[CubeMask]) -> Result<()> {
    let work: Vec<(BlockId, &CubeMask)> = blocks.iter().copied().zip(typed).collect();
    for_blocks(&work, ctx.parallel(), |&(id, m)| {
        normals_block(ctx, id, m);
        Ok(())
    })?;
    Ok(())
}

fn normals_block(ctx: &FrameCtx, id: BlockId, typed: &CubeMask) {
    let nb = Neighborhood::new(ctx.store, id);
    let l = ctx.params.cube_size;
    for i in typed.iter() {
        let local = local_from_index(i);
        let rel = local.map(i32::from);
        let t = nb.center().cube(local).type_curr();
        for e in mask_edges(EDGE_MASK[t as usize]) {
            let (off, axis) = EDGE_OWNER[e];
            let owner = [rel[0] + off[0], rel[1] + off[1], rel[2] + off[2]];
            let Some(v) = nb
                .cube(owner)
                .and_then(|c| c.edge_vertex(axis))
                .map(VertexId)
            else {
                continue;
            };
            let n = edge_normal(&nb, owner, axis, l)
                .unwrap_or_else(|| fallback_normal(ctx, &nb, v, owner, axis));
            ctx.store.vertex(v).set_normal(n);
        }
    }
}

/// TSDF gradient at a lattice corner: central differences where both
/// neighbors are observed, one-sided otherwise.
fn gradient(nb: &Neighborhood, g: [i32; 3], l: f64) -> [f64; 3] {
    let here = nb.sample(g).tsdf;
    std::array::from_fn(|a| {
        let step = |d: i32| {
            let mut q = g;
            q[a] += d;
            let s = nb.sample(q);
            s.observed().then_some(s.tsdf)
        };
        match (step(-1), step(1)) {
            (Some(lo), Some(hi)) => (hi - lo) / (2.0 * l),
            (None, Some(hi)) => (hi - here) / l,
            (Some(lo), None) => (here - lo) / l,
            (None, None) => 0.0,
        }
    })
}

fn edge_normal(nb: &Neighborhood, owner: [i32; 3], axis: Axis, l: f64) -> Option<[f32; 3]> {
    let mut far = owner;
    far[axis.index()] += 1;
    let (d0, d1) = (nb.sample(owner).tsdf, nb.sample(far).tsdf);
    let t = if d0 != d1 {
        (d0 / (d0 - d1)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let (g0, g1) = (gradient(nb, owner, l), gradient(nb, far, l));
    let g: [f64; 3] = std::array::from_fn(|i| g0[i] + t * (g1[i] - g0[i]));
    normalize(g)
}

fn normalize(g: [f64; 3]) -> Option<[f32; 3]> {
    let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    (len > 0.0 && len.is_finite()).then(|| g.map(|x| (x / len) as f32))
}

/// Mean face normal of the triangles using `v`, all of which lie in the four
/// cubes around its edge.
fn fallback_normal(
    ctx: &FrameCtx,
    nb: &Neighborhood,
    v: VertexId,
    owner: [i32; 3],
    axis: Axis,
) -> [f32; 3] {
    let (u, w) = match axis {
        Axis::X => (1, 2),
        Axis::Y => (0, 2),
        Axis::Z => (0, 1),
    };
    let mut sum = [0.0f64; 3];
    for (du, dw) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let mut c = owner;
        c[u] -= du;
        c[w] -= dw;
        let Some(cube) = nb.cube(c) else { continue };
        for h in cube.triangle_handles() {
            if !ctx.store.triangle(TriangleId(h)).vertices().contains(&v) {
                continue;
            }
            let n = face_normal(ctx.store, TriangleId(h));
            for i in 0..3 {
                sum[i] += f64::from(n[i]);
            }
        }
    }
    normalize(sum).unwrap_or([0.0, 0.0, 1.0])
}
