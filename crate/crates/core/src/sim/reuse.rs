//! Reuse registers: per-column arrays holding the window rows that the next
//! serpentine row will need again.

use crate::sim::counters::SimCounters;

#[derive(Debug, Clone, Copy, Default)]
struct Entry {
    y: usize,
    x: usize,
    value: i8,
    valid: bool,
}

/// One register array. One slot is kept free for staggering the shift, so
/// `capacity - 1` pixels are addressable; slots are indexed by input column
/// and tag-checked so a wider row degrades to misses, never wrong data.
#[derive(Debug, Clone)]
pub struct ReuseArray {
    entries: Vec<Entry>,
}

impl ReuseArray {
    pub fn new(capacity: usize) -> Self {
        ReuseArray {
            entries: vec![Entry::default(); capacity.saturating_sub(1).max(1)],
        }
    }

    pub fn payload(&self) -> usize {
        self.entries.len()
    }

    fn slot(&self, x: usize) -> usize {
        x % self.entries.len()
    }

    pub fn write(&mut self, y: usize, x: usize, value: i8) {
        let s = self.slot(x);
        self.entries[s] = Entry {
            y,
            x,
            value,
            valid: true,
        };
    }

    pub fn read(&self, y: usize, x: usize) -> Option<i8> {
        let e = self.entries[self.slot(x)];
        (e.valid && e.y == y && e.x == x).then_some(e.value)
    }

    pub fn clear(&mut self) {
        self.entries.iter_mut().for_each(|e| e.valid = false);
    }
}

/// The arrays serving one PEA column.
#[derive(Debug, Clone)]
pub struct ReuseModule {
    arrays: Vec<ReuseArray>,
}

impl ReuseModule {
    pub fn new(arrays: usize, capacity: usize) -> Self {
        ReuseModule {
            arrays: (0..arrays).map(|_| ReuseArray::new(capacity)).collect(),
        }
    }

    pub fn arrays(&self) -> usize {
        self.arrays.len()
    }

    pub fn write(&mut self, array: usize, y: usize, x: usize, v: i8, c: &mut SimCounters) {
        if let Some(a) = self.arrays.get_mut(array) {
            a.write(y, x, v);
            c.reuse_reg_writes += 1;
        }
    }

    pub fn read(&self, array: usize, y: usize, x: usize, c: &mut SimCounters) -> Option<i8> {
        let hit = self.arrays.get(array).and_then(|a| a.read(y, x));
        match hit {
            Some(_) => c.reuse_reg_hits += 1,
            None => c.reuse_reg_misses += 1,
        }
        hit
    }

    pub fn clear(&mut self) {
        self.arrays.iter_mut().for_each(ReuseArray::clear);
    }
}
