//! Hamming-distance refinement of cube types.
//!
//! A plane crossing a cube near one of its corners makes that corner's sign
//! unstable, and the cube flips into an irregular Marching Cubes case. When the
//! current type is close to both the previous type and one of the six
//! face-parallel "regular" types, and every corner on which it disagrees with
//! that regular type is near zero, the regular type is used instead. Marching
//! Cubes then extrapolates along same-sign edges with its usual interpolation.

use serde::{Deserialize, Serialize};

use crate::mesher::tables::CORNER_OFFSETS;

/// Largest Hamming distance still treated as a disturbance.
pub const MAX_FLIP_DISTANCE: u32 = 3;

const fn half_space(axis: usize, side: i32) -> u8 {
    let mut bits = 0u8;
    let mut k = 0;
    while k < 8 {
        if CORNER_OFFSETS[k][axis] == side {
            bits |= 1 << k;
        }
        k += 1;
    }
    bits
}

/// The six regular types: the cube split in half across each axis, with either
/// half below the surface. Order: +y, -y, -x, +x, +z, -z halves below.
pub const REGULAR_TYPES: [u8; 6] = [
    half_space(1, 1),
    half_space(1, 0),
    half_space(0, 0),
    half_space(0, 1),
    half_space(2, 1),
    half_space(2, 0),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineParams {
    pub enabled: bool,
    /// Threshold on |tsdf| (normalized units) for a corner to count as disturbed.
    pub epsilon: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            enabled: false,
            epsilon: 0.1,
        }
    }
}

pub fn hamming(a: u8, b: u8) -> u32 {
    (a ^ b).count_ones()
}

pub fn is_regular(t: u8) -> bool {
    REGULAR_TYPES.contains(&t)
}

/// Non-empty and not one of the regular types.
pub fn is_irregular(t: u8) -> bool {
    t != 0 && t != 255 && !is_regular(t)
}

/// Regular type that `current` should be rewritten to, if any.
///
/// Among qualifying regular types the closest one wins; ties go to the lower index.
pub fn detect_disturbance(
    current: u8,
    previous: u8,
    corners: &[f64; 8],
    epsilon: f64,
) -> Option<u8> {
    if hamming(current, previous) > MAX_FLIP_DISTANCE {
        return None;
    }
    REGULAR_TYPES
        .iter()
        .copied()
        .filter(|&r| hamming(current, r) <= MAX_FLIP_DISTANCE)
        .filter(|&r| {
            let diff = current ^ r;
            (0..8).all(|k| diff & (1 << k) == 0 || corners[k].abs() < epsilon)
        })
        .min_by_key(|&r| hamming(current, r))
}

/// Type to store for a cube after refinement (identity when disabled or undisturbed).
pub fn refine_type(current: u8, previous: u8, corners: &[f64; 8], params: &RefineParams) -> u8 {
    if !params.enabled {
        return current;
    }
    detect_disturbance(current, previous, corners, params.epsilon).unwrap_or(current)
}
