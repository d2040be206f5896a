//! Segmented arena with a free list, shared between worker threads.
//!
//! Segments are created lazily and never move, so a slot reference stays valid
//! for the lifetime of the pool. Allocation pops the free list first and only
//! then bumps the high-water mark; the free list is a mutex-guarded stack, which
//! makes both operations linearizable.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::OnceLock;

use parking_lot::Mutex;

const SEGMENT_BITS: u32 = 14;
const SEGMENT_LEN: usize = 1 << SEGMENT_BITS;

struct Slot<T> {
    in_use: AtomicBool,
    item: T,
}

pub(crate) enum FreeError {
    NotAllocated,
    DoubleFree,
}

type Segment<T> = OnceLock<Box<[Slot<T>]>>;

pub struct Pool<T> {
    segments: Box<[Segment<T>]>,
    capacity: usize,
    high_water: AtomicU32,
    free: Mutex<Vec<u32>>,
    frees_total: AtomicU64,
    allocs_total: AtomicU64,
}

impl<T: Default> Pool<T> {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.min(u32::MAX as usize - 2);
        let n_segments = capacity.div_ceil(SEGMENT_LEN);
        Self {
            segments: (0..n_segments).map(|_| OnceLock::new()).collect(),
            capacity,
            high_water: AtomicU32::new(0),
            free: Mutex::new(Vec::new()),
            frees_total: AtomicU64::new(0),
            allocs_total: AtomicU64::new(0),
        }
    }

    /// Returns a slot index, reusing the most recently freed slot if any.
    pub fn allocate(&self) -> Option<u32> {
        let id = match self.free.lock().pop() {
            Some(id) => id,
            None => self.bump()?,
        };
        let slot = self.slot(id);
        let was = slot.in_use.swap(true, Ordering::AcqRel);
        debug_assert!(!was, "slot {id} handed out twice");
        self.allocs_total.fetch_add(1, Ordering::Relaxed);
        Some(id)
    }

    fn bump(&self) -> Option<u32> {
        let id = self
            .high_water
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |n| {
                ((n as usize) < self.capacity).then_some(n + 1)
            })
            .ok()?;
        self.segments[id as usize >> SEGMENT_BITS].get_or_init(|| {
            (0..SEGMENT_LEN)
                .map(|_| Slot {
                    in_use: AtomicBool::new(false),
                    item: T::default(),
                })
                .collect()
        });
        Some(id)
    }

    pub(crate) fn free(&self, id: u32) -> Result<(), FreeError> {
        if id >= self.high_water() {
            return Err(FreeError::NotAllocated);
        }
        if !self.slot(id).in_use.swap(false, Ordering::AcqRel) {
            return Err(FreeError::DoubleFree);
        }
        self.free.lock().push(id);
        self.frees_total.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }
}

impl<T> Pool<T> {
    fn slot(&self, id: u32) -> &Slot<T> {
        let seg = self.segments[id as usize >> SEGMENT_BITS]
            .get()
            .expect("slot index beyond allocated segments");
        &seg[id as usize & (SEGMENT_LEN - 1)]
    }

    pub fn get(&self, id: u32) -> &T {
        &self.slot(id).item
    }

    pub fn is_live(&self, id: u32) -> bool {
        id < self.high_water() && self.slot(id).in_use.load(Ordering::Acquire)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Slots ever handed out by the arena (live + free-listed).
    pub fn high_water(&self) -> u32 {
        self.high_water.load(Ordering::Acquire)
    }

    pub fn free_len(&self) -> usize {
        self.free.lock().len()
    }

    pub fn live(&self) -> usize {
        self.high_water() as usize - self.free_len()
    }

    pub fn frees_total(&self) -> u64 {
        self.frees_total.load(Ordering::Relaxed)
    }

    pub fn allocs_total(&self) -> u64 {
        self.allocs_total.load(Ordering::Relaxed)
    }

    /// Indices of live slots in ascending order.
    pub fn live_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.high_water()).filter(move |&id| self.slot(id).in_use.load(Ordering::Acquire))
    }

    pub fn free_list_snapshot(&self) -> Vec<u32> {
        self.free.lock().clone()
    }
}
