//! Integer lattice coordinates for blocks, cubes and cube edges.

use serde::{Deserialize, Serialize};

/// Cubes per block side.
pub const BLOCK_SIDE: i32 = 8;
/// Cubes per block.
pub const CUBES_PER_BLOCK: usize = (BLOCK_SIDE * BLOCK_SIDE * BLOCK_SIDE) as usize;

/// Address of a block in the sparse grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockCoord {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

// 21 bits per axis; u64::MAX is never produced and serves as the empty marker
const PACK_BITS: u32 = 21;
const PACK_MASK: u64 = (1 << PACK_BITS) - 1;
const PACK_BIAS: i64 = 1 << (PACK_BITS - 1);

impl BlockCoord {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    /// Block containing the world point `p` for cubes of side `cube_size` meters.
    pub fn containing(p: [f64; 3], cube_size: f64) -> Self {
        let extent = cube_size * BLOCK_SIDE as f64;
        Self {
            x: (p[0] / extent).floor() as i32,
            y: (p[1] / extent).floor() as i32,
            z: (p[2] / extent).floor() as i32,
        }
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn to_array(self) -> [i32; 3] {
        [self.x, self.y, self.z]
    }

    pub(crate) fn pack(self) -> u64 {
        let f = |v: i32| ((v as i64 + PACK_BIAS) as u64) & PACK_MASK;
        f(self.x) | (f(self.y) << PACK_BITS) | (f(self.z) << (2 * PACK_BITS))
    }

    /// Whether the coordinate survives a pack round trip.
    pub(crate) fn packable(self) -> bool {
        let ok = |v: i32| (v as i64) >= -PACK_BIAS && (v as i64) < PACK_BIAS;
        ok(self.x) && ok(self.y) && ok(self.z)
    }
}

/// Edge direction leaving a cube corner towards the positive axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn unit(self) -> [i32; 3] {
        let mut u = [0; 3];
        u[self.index()] = 1;
        u
    }
}

/// A cube inside a block. The cube's sample lives at its minimal corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeCoord {
    pub block: BlockCoord,
    pub local: [u8; 3],
}

impl CubeCoord {
    pub fn new(block: BlockCoord, local: [u8; 3]) -> Self {
        debug_assert!(local.iter().all(|&c| (c as i32) < BLOCK_SIDE));
        Self { block, local }
    }

    pub fn from_global(g: [i32; 3]) -> Self {
        let split = |v: i32| (v.div_euclid(BLOCK_SIDE), v.rem_euclid(BLOCK_SIDE) as u8);
        let (bx, lx) = split(g[0]);
        let (by, ly) = split(g[1]);
        let (bz, lz) = split(g[2]);
        Self {
            block: BlockCoord::new(bx, by, bz),
            local: [lx, ly, lz],
        }
    }

    pub fn global(self) -> [i32; 3] {
        [
            self.block.x * BLOCK_SIDE + self.local[0] as i32,
            self.block.y * BLOCK_SIDE + self.local[1] as i32,
            self.block.z * BLOCK_SIDE + self.local[2] as i32,
        ]
    }

    /// Neighbor arithmetic; carries across block borders.
    pub fn offset(self, d: [i32; 3]) -> Self {
        let g = self.global();
        Self::from_global([g[0] + d[0], g[1] + d[1], g[2] + d[2]])
    }

    pub fn local_index(self) -> usize {
        local_index(self.local)
    }

    /// World position of the cube's sample corner.
    pub fn corner_position(self, cube_size: f64) -> [f64; 3] {
        let g = self.global();
        [
            g[0] as f64 * cube_size,
            g[1] as f64 * cube_size,
            g[2] as f64 * cube_size,
        ]
    }
}

pub fn local_index(local: [u8; 3]) -> usize {
    local[0] as usize
        + BLOCK_SIDE as usize * (local[1] as usize + BLOCK_SIDE as usize * local[2] as usize)
}

pub fn local_from_index(i: usize) -> [u8; 3] {
    let s = BLOCK_SIDE as usize;
    [(i % s) as u8, ((i / s) % s) as u8, (i / (s * s)) as u8]
}

/// One geometric lattice edge, named by the cube whose corner is its minimal endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub cube: CubeCoord,
    pub axis: Axis,
}

const EDGE_BITS: u32 = 20;
const EDGE_MASK: u64 = (1 << EDGE_BITS) - 1;
const EDGE_BIAS: i64 = 1 << (EDGE_BITS - 1);
pub(crate) const NO_EDGE: u64 = u64::MAX;

impl EdgeKey {
    pub fn new(cube: CubeCoord, axis: Axis) -> Self {
        Self { cube, axis }
    }

    pub(crate) fn pack(self) -> u64 {
        let g = self.cube.global();
        let f = |v: i32| ((v as i64 + EDGE_BIAS) as u64) & EDGE_MASK;
        f(g[0])
            | (f(g[1]) << EDGE_BITS)
            | (f(g[2]) << (2 * EDGE_BITS))
            | ((self.axis as u64) << (3 * EDGE_BITS))
    }

    pub(crate) fn unpack(v: u64) -> Option<Self> {
        if v == NO_EDGE {
            return None;
        }
        let f = |s: u32| (((v >> s) & EDGE_MASK) as i64 - EDGE_BIAS) as i32;
        let g = [f(0), f(EDGE_BITS), f(2 * EDGE_BITS)];
        let axis = Axis::from_index(((v >> (3 * EDGE_BITS)) & 3) as usize);
        Some(Self::new(CubeCoord::from_global(g), axis))
    }

    /// Endpoints of the edge in world coordinates, minimal endpoint first.
    pub fn endpoints(self, cube_size: f64) -> ([f64; 3], [f64; 3]) {
        let p0 = self.cube.corner_position(cube_size);
        let mut p1 = p0;
        let a = self.axis.index();
        p1[a] = (self.cube.global()[a] + 1) as f64 * cube_size;
        (p0, p1)
    }
}
