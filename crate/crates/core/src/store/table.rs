//! Open-addressed block table with linear probing.
//!
//! Bucket index: `((x * 73856093) ^ (y * 19349669) ^ (z * 83492791)) mod 2^bits`,
//! evaluated in wrapping 64-bit arithmetic on the signed block indices.
//! A bucket stores the packed coordinate (the collision check) and the block id.
//! Insertion claims the bucket key with a compare-and-swap; exactly one caller
//! per coordinate allocates, everybody else waits for the published id.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::OnceLock;

use super::block::Block;
use super::coords::BlockCoord;
use crate::error::{Error, Result};

pub const HASH_P1: i64 = 73_856_093;
pub const HASH_P2: i64 = 19_349_669;
pub const HASH_P3: i64 = 83_492_791;

const EMPTY_KEY: u64 = u64::MAX;
const PENDING: u32 = u32::MAX;
const FAILED: u32 = u32::MAX - 1;

/// Dense index of an allocated block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

struct Bucket {
    key: AtomicU64,
    block: AtomicU32,
}

/// Bucket index of `c` in a table of `2^bits` buckets.
pub fn hash_block(c: BlockCoord, bits: u32) -> usize {
    let h = (c.x as i64).wrapping_mul(HASH_P1)
        ^ (c.y as i64).wrapping_mul(HASH_P2)
        ^ (c.z as i64).wrapping_mul(HASH_P3);
    (h as u64 & ((1u64 << bits) - 1)) as usize
}

pub struct BlockTable {
    bits: u32,
    buckets: Box<[Bucket]>,
    blocks: Box<[OnceLock<Box<Block>>]>,
    next_block: AtomicU32,
}

impl BlockTable {
    pub fn new(bits: u32, max_blocks: usize) -> Self {
        let n = 1usize << bits;
        let max_blocks = max_blocks.min(n - 1).min(FAILED as usize);
        Self {
            bits,
            buckets: (0..n)
                .map(|_| Bucket {
                    key: AtomicU64::new(EMPTY_KEY),
                    block: AtomicU32::new(PENDING),
                })
                .collect(),
            blocks: (0..max_blocks).map(|_| OnceLock::new()).collect(),
            next_block: AtomicU32::new(0),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn max_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of allocated blocks; ids are `0..len()`.
    pub fn len(&self) -> usize {
        self.next_block.load(Ordering::Acquire) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, id: BlockId) -> &Block {
        self.blocks[id.0 as usize]
            .get()
            .expect("block id published before initialization")
    }

    pub fn get_or_allocate(&self, c: BlockCoord) -> Result<BlockId> {
        if !c.packable() {
            return Err(Error::Capacity {
                what: "block coordinate range",
                limit: 1 << 20,
            });
        }
        let key = c.pack();
        let mask = self.buckets.len() - 1;
        let mut i = hash_block(c, self.bits);
        for _ in 0..self.buckets.len() {
            let bucket = &self.buckets[i];
            let mut k = bucket.key.load(Ordering::Acquire);
            if k == EMPTY_KEY {
                match bucket.key.compare_exchange(
                    EMPTY_KEY,
                    key,
                    Ordering::AcqRel,
                    Ordering::Acquire,
                ) {
                    Ok(_) => return self.publish(bucket, c),
                    Err(actual) => k = actual,
                }
            }
            if k == key {
                return self.wait(bucket, c);
            }
            i = (i + 1) & mask;
        }
        Err(Error::Capacity {
            what: "block table",
            limit: self.buckets.len(),
        })
    }

    fn publish(&self, bucket: &Bucket, c: BlockCoord) -> Result<BlockId> {
        let max = self.blocks.len() as u32;
        let id = self
            .next_block
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |n| {
                (n < max).then_some(n + 1)
            });
        match id {
            Ok(id) => {
                let _ = self.blocks[id as usize].set(Box::new(Block::new(c)));
                bucket.block.store(id, Ordering::Release);
                Ok(BlockId(id))
            }
            Err(_) => {
                bucket.block.store(FAILED, Ordering::Release);
                Err(Error::Capacity {
                    what: "block arena",
                    limit: self.blocks.len(),
                })
            }
        }
    }

    fn wait(&self, bucket: &Bucket, c: BlockCoord) -> Result<BlockId> {
        let mut spins = 0u32;
        loop {
            match bucket.block.load(Ordering::Acquire) {
                PENDING => {
                    spins += 1;
                    if spins < 64 {
                        std::hint::spin_loop();
                    } else {
                        std::thread::yield_now();
                    }
                }
                FAILED => {
                    return Err(Error::Capacity {
                        what: "block arena",
                        limit: self.blocks.len(),
                    })
                }
                id => {
                    debug_assert_eq!(self.block(BlockId(id)).coord(), c);
                    return Ok(BlockId(id));
                }
            }
        }
    }

    pub fn lookup(&self, c: BlockCoord) -> Option<BlockId> {
        self.probe(c).0
    }

    /// Lookup result and the number of buckets inspected.
    pub fn probe(&self, c: BlockCoord) -> (Option<BlockId>, usize) {
        if !c.packable() {
            return (None, 0);
        }
        let key = c.pack();
        let mask = self.buckets.len() - 1;
        let mut i = hash_block(c, self.bits);
        for n in 1..=self.buckets.len() {
            let bucket = &self.buckets[i];
            match bucket.key.load(Ordering::Acquire) {
                EMPTY_KEY => return (None, n),
                k if k == key => {
                    return match self.wait(bucket, c) {
                        Ok(id) => (Some(id), n),
                        Err(_) => (None, n),
                    }
                }
                _ => i = (i + 1) & mask,
            }
        }
        (None, self.buckets.len())
    }

    pub fn ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.len() as u32).map(BlockId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn hash_is_deterministic() {
        let c = BlockCoord::new(0, 0, 0);
        assert_eq!(hash_block(c, 20), hash_block(c, 20));
        assert_eq!(hash_block(c, 20), 0);
    }

    #[test]
    fn unit_offsets_land_in_different_buckets() {
        // 73856093 mod 2^20 = 455773, 19349669 mod 2^20 = 475301
        assert_eq!(hash_block(BlockCoord::new(1, 0, 0), 20), 455_773);
        assert_eq!(hash_block(BlockCoord::new(0, 1, 0), 20), 475_301);
    }

    #[test]
    fn random_coordinates_spread_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut load: HashMap<usize, usize> = HashMap::new();
        for _ in 0..10_000 {
            let c = BlockCoord::new(
                rng.random_range(-64..=64),
                rng.random_range(-64..=64),
                rng.random_range(-64..=64),
            );
            *load.entry(hash_block(c, 20)).or_default() += 1;
        }
        let max = load.values().copied().max().unwrap();
        assert!(max <= 8, "max bucket load {max}");
    }

    #[test]
    fn desk_scale_probe_length_stays_short() {
        let table = BlockTable::new(20, 1 << 17);
        let mut coords = Vec::new();
        // 50k blocks of a 50x40x25 slab
        for x in -25..25 {
            for y in -20..20 {
                for z in 0..25 {
                    let c = BlockCoord::new(x, y, z);
                    table.get_or_allocate(c).unwrap();
                    coords.push(c);
                }
            }
        }
        let total: usize = coords.iter().map(|&c| table.probe(c).1).sum();
        let mean = total as f64 / coords.len() as f64;
        assert!(mean < 2.0, "mean probe length {mean}");
    }

    #[test]
    fn allocation_is_idempotent() {
        let table = BlockTable::new(10, 16);
        let a = table.get_or_allocate(BlockCoord::new(0, 0, 0)).unwrap();
        let b = table.get_or_allocate(BlockCoord::new(0, 0, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(table.len(), 1);
        assert_eq!(table.lookup(BlockCoord::new(0, 0, 0)), Some(a));
        assert_eq!(table.lookup(BlockCoord::new(0, 0, 1)), None);
    }

    #[test]
    fn concurrent_allocators_agree_on_one_block() {
        for round in 0..50 {
            let table = BlockTable::new(12, 64);
            let c = BlockCoord::new(round, -3, 9);
            let ids: Vec<BlockId> = std::thread::scope(|s| {
                let hs: Vec<_> = (0..8)
                    .map(|_| s.spawn(|| table.get_or_allocate(c).unwrap()))
                    .collect();
                hs.into_iter().map(|h| h.join().unwrap()).collect()
            });
            assert_eq!(table.len(), 1, "exactly one allocation");
            assert!(ids.iter().all(|&id| id == ids[0]));
        }
    }

    #[test]
    fn exhausted_arena_reports_capacity() {
        let table = BlockTable::new(6, 2);
        table.get_or_allocate(BlockCoord::new(0, 0, 0)).unwrap();
        table.get_or_allocate(BlockCoord::new(1, 0, 0)).unwrap();
        let err = table.get_or_allocate(BlockCoord::new(2, 0, 0)).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(table.get_or_allocate(BlockCoord::new(2, 0, 0)).is_err());
        assert_eq!(table.lookup(BlockCoord::new(2, 0, 0)), None);
    }
}
