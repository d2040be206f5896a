//! Vertex placement: every edge used by a typed cube gets exactly one vertex,
//! and existing vertices move to the current zero crossing.

use std::sync::atomic::Ordering;

use rayon::prelude::*;

use super::tables::{mask_edges, EDGE_MASK, EDGE_OWNER};
use super::{CubeMask, FrameCtx, Strategy};
use crate::error::{Error, Result};
use crate::store::{
    local_from_index, BlockId, EdgeKey, Neighborhood, VertexId, BLOCK_SIDE, CLAIMING_SLOT,
    EMPTY_SLOT,
};

/// Places vertices for all typed cubes; returns the vertices allocated.
pub(super) fn place_vertices(
    ctx: &FrameCtx,
    blocks: &[BlockId],
    typed: &[CubeMask],
) -> Result<Vec<VertexId>> {
    let work: Vec<(BlockId, &CubeMask)> = blocks.iter().copied().zip(typed).collect();
    let parts: Vec<Vec<VertexId>> = match ctx.params.strategy {
        Strategy::Serial => work
            .iter()
            .map(|&(id, m)| place_block(ctx, id, m, |_| true, Slot::Exclusive))
            .collect::<Result<_>>()?,
        Strategy::Claim => {
            let slabs: Vec<(BlockId, &CubeMask, i32)> = work
                .iter()
                .flat_map(|&(id, m)| (0..BLOCK_SIDE).map(move |z| (id, m, z)))
                .collect();
            slabs
                .par_iter()
                .map(|&(id, m, z)| place_block(ctx, id, m, |l| l[2] as i32 == z, Slot::Claim))
                .collect::<Result<_>>()?
        }
        Strategy::Partition => {
            let mut out = Vec::new();
            for class in 0..8u8 {
                let pass: Vec<Vec<VertexId>> = work
                    .par_iter()
                    .map(|&(id, m)| {
                        let base = ctx.store.block(id).coord().to_array();
                        let parity = move |l: [u8; 3]| {
                            let p = |a: usize| ((base[a] * BLOCK_SIDE + l[a] as i32) & 1) as u8;
                            p(0) | p(1) << 1 | p(2) << 2 == class
                        };
                        place_block(ctx, id, m, parity, Slot::Exclusive)
                    })
                    .collect::<Result<_>>()?;
                out.extend(pass);
            }
            out
        }
    };
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Clone, Copy)]
enum Slot {
    /// No other worker touches the slot during this pass.
    Exclusive,
    /// Slot may be contended; allocate only after winning a claim.
    Claim,
}

fn place_block(
    ctx: &FrameCtx,
    id: BlockId,
    typed: &CubeMask,
    select: impl Fn([u8; 3]) -> bool,
    slot_mode: Slot,
) -> Result<Vec<VertexId>> {
    let nb = Neighborhood::new(ctx.store, id);
    let mut fresh = Vec::new();
    for i in typed.iter() {
        let local = local_from_index(i);
        if !select(local) {
            continue;
        }
        let cube = nb.center().cube(local);
        let rel = local.map(i32::from);
        for e in mask_edges(EDGE_MASK[cube.type_curr() as usize]) {
            let (off, axis) = EDGE_OWNER[e];
            let owner_rel = [rel[0] + off[0], rel[1] + off[1], rel[2] + off[2]];
            let key = EdgeKey::new(nb.cube_coord(owner_rel), axis);
            let slot = nb
                .cube(owner_rel)
                .ok_or(Error::BlockNotFound(key.cube.block))?
                .edge_slot(axis);
            let pos = ctx.edge_position(&nb, owner_rel, key);
            match slot.load(Ordering::Acquire) {
                EMPTY_SLOT => {}
                CLAIMING_SLOT => match slot_mode {
                    Slot::Claim => continue,
                    Slot::Exclusive => {
                        return Err(Error::Internal(format!(
                            "edge {key:?} claimed during an exclusive pass"
                        )));
                    }
                },
                h => {
                    ctx.store.vertex(VertexId(h)).set_position(pos);
                    continue;
                }
            }
            if let Slot::Claim = slot_mode {
                if slot
                    .compare_exchange(
                        EMPTY_SLOT,
                        CLAIMING_SLOT,
                        Ordering::AcqRel,
                        Ordering::Acquire,
                    )
                    .is_err()
                {
                    // lost the race; the winner places the same position
                    continue;
                }
            }
            let v = match ctx.store.allocate_vertex(ctx.frame, Some(key)) {
                Ok(v) => v,
                Err(err) => {
                    slot.store(EMPTY_SLOT, Ordering::Release);
                    return Err(err);
                }
            };
            ctx.store.vertex(v).set_position(pos);
            slot.store(v.0, Ordering::Release);
            fresh.push(v);
        }
    }
    Ok(fresh)
}
