use std::sync::atomic::{AtomicU16, AtomicU32, AtomicU64, AtomicU8, Ordering};

use super::coords::{local_index, Axis, BlockCoord, CUBES_PER_BLOCK};

/// Marker for an empty vertex or triangle slot.
pub const EMPTY_SLOT: u32 = u32::MAX;
/// Marker for a vertex slot whose allocation is in flight.
pub const CLAIMING_SLOT: u32 = u32::MAX - 1;

/// Stored TSDF sample at a cube corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSample {
    pub tsdf: f64,
    pub weight: u16,
}

impl CornerSample {
    pub const UNOBSERVED: CornerSample = CornerSample {
        tsdf: 0.0,
        weight: 0,
    };

    pub fn observed(&self) -> bool {
        self.weight > 0
    }
}

/// One corner sample, three owned edge slots and up to five triangles.
///
/// Fields are atomics so that phase-parallel workers can share `&Cube`;
/// which fields a phase may write is fixed by the mesher.
#[derive(Debug)]
pub struct Cube {
    tsdf: AtomicU64,
    weight: AtomicU16,
    type_prev: AtomicU8,
    type_curr: AtomicU8,
    edges: [AtomicU32; 3],
    triangles: [AtomicU32; 5],
}

impl Default for Cube {
    fn default() -> Self {
        Self {
            tsdf: AtomicU64::new(0f64.to_bits()),
            weight: AtomicU16::new(0),
            type_prev: AtomicU8::new(0),
            type_curr: AtomicU8::new(0),
            edges: std::array::from_fn(|_| AtomicU32::new(EMPTY_SLOT)),
            triangles: std::array::from_fn(|_| AtomicU32::new(EMPTY_SLOT)),
        }
    }
}

impl Cube {
    pub fn sample(&self) -> CornerSample {
        CornerSample {
            tsdf: f64::from_bits(self.tsdf.load(Ordering::Relaxed)),
            weight: self.weight.load(Ordering::Relaxed),
        }
    }

    pub fn set_sample(&self, s: CornerSample) {
        self.tsdf.store(s.tsdf.to_bits(), Ordering::Relaxed);
        self.weight.store(s.weight, Ordering::Relaxed);
    }

    pub fn type_prev(&self) -> u8 {
        self.type_prev.load(Ordering::Relaxed)
    }

    pub fn type_curr(&self) -> u8 {
        self.type_curr.load(Ordering::Relaxed)
    }

    /// Shifts the current type into history and records `t`.
    pub fn push_type(&self, t: u8) {
        self.type_prev.store(self.type_curr(), Ordering::Relaxed);
        self.type_curr.store(t, Ordering::Relaxed);
    }

    /// Records that the type did not change this frame.
    pub fn hold_type(&self) {
        self.type_prev.store(self.type_curr(), Ordering::Relaxed);
    }

    pub fn edge_slot(&self, axis: Axis) -> &AtomicU32 {
        &self.edges[axis.index()]
    }

    pub fn triangle_slots(&self) -> &[AtomicU32; 5] {
        &self.triangles
    }

    pub fn edge_vertex(&self, axis: Axis) -> Option<u32> {
        match self.edges[axis.index()].load(Ordering::Acquire) {
            EMPTY_SLOT | CLAIMING_SLOT => None,
            h => Some(h),
        }
    }

    pub fn triangle_handles(&self) -> impl Iterator<Item = u32> + '_ {
        self.triangles
            .iter()
            .map(|s| s.load(Ordering::Acquire))
            .filter(|&h| h != EMPTY_SLOT)
    }
}

/// A hash-addressed 8x8x8 group of cubes.
#[derive(Debug)]
pub struct Block {
    coord: BlockCoord,
    cubes: Box<[Cube]>,
}

impl Block {
    pub fn new(coord: BlockCoord) -> Self {
        Self {
            coord,
            cubes: (0..CUBES_PER_BLOCK).map(|_| Cube::default()).collect(),
        }
    }

    pub fn coord(&self) -> BlockCoord {
        self.coord
    }

    pub fn cube(&self, local: [u8; 3]) -> &Cube {
        &self.cubes[local_index(local)]
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_block_is_unobserved() {
        let b = Block::new(BlockCoord::new(0, 0, 0));
        assert_eq!(b.cubes().len(), 512);
        for c in b.cubes() {
            assert_eq!(c.sample().weight, 0);
            assert_eq!((c.type_prev(), c.type_curr()), (0, 0));
            assert!(Axis::ALL.iter().all(|&a| c.edge_vertex(a).is_none()));
            assert_eq!(c.triangle_handles().count(), 0);
        }
    }

    #[test]
    fn type_history_shifts() {
        let c = Cube::default();
        c.push_type(0x0f);
        c.push_type(0x1f);
        assert_eq!((c.type_prev(), c.type_curr()), (0x0f, 0x1f));
        c.hold_type();
        assert_eq!((c.type_prev(), c.type_curr()), (0x1f, 0x1f));
    }
}
