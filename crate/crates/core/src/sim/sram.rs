//! Banked on-chip memories. Data really lives in the bank arrays; every
//! access goes through a bank and is counted against it.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sim::counters::SimCounters;

/// A stored 2-D strip of one feature plane: rows `row0..row0+rows` of a map
/// `map_h x width` wide.
#[derive(Debug, Clone, Copy)]
struct Plane {
    bank: usize,
    offset: usize,
    row0: usize,
    rows: usize,
    width: usize,
    map_h: usize,
}

/// One ping-pong half of the feature SRAM. Pixels are packed two per bank
/// row; only real (non-padding) pixels are ever stored.
#[derive(Debug, Clone)]
pub struct FeatureBuffer {
    bank_bytes: usize,
    banks: Vec<Vec<i8>>,
    planes: HashMap<usize, Plane>,
    /// Bytes outside the planes held for partial sums.
    reserved: usize,
}

impl FeatureBuffer {
    pub fn new(banks: usize, bank_bytes: usize) -> Self {
        FeatureBuffer {
            bank_bytes,
            banks: vec![vec![0; bank_bytes]; banks],
            planes: HashMap::new(),
            reserved: 0,
        }
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    pub fn capacity(&self) -> usize {
        self.bank_bytes * self.banks.len()
    }

    pub fn clear(&mut self) {
        self.planes.clear();
        self.reserved = 0;
    }

    pub fn plane_bytes(&self) -> usize {
        self.planes.values().map(|p| p.rows * p.width).sum()
    }

    pub fn contains(&self, key: usize) -> bool {
        self.planes.contains_key(&key)
    }

    /// Claims `bytes` of the buffer for partial sums. The claim is spread
    /// over the banks, so it only has to fit the buffer as a whole.
    pub fn reserve(&mut self, bytes: usize) -> Result<()> {
        let needed = self.plane_bytes() + bytes;
        if needed > self.capacity() {
            return Err(Error::Capacity {
                unit: "feature SRAM buffer",
                needed,
                available: self.capacity(),
            });
        }
        self.reserved = bytes;
        Ok(())
    }

    pub fn release(&mut self) {
        self.reserved = 0;
    }

    /// Places a strip in `bank` at the first free gap.
    pub fn alloc(&mut self, key: usize, bank: usize, row0: usize, rows: usize, width: usize, map_h: usize) -> Result<()> {
        self.free(key);
        let len = rows * width;
        let mut live: Vec<(usize, usize)> = self
            .planes
            .values()
            .filter(|p| p.bank == bank)
            .map(|p| (p.offset, p.offset + p.rows * p.width))
            .collect();
        live.sort_unstable();
        let mut offset = 0;
        for (start, end) in live {
            if start >= offset + len {
                break;
            }
            offset = offset.max(end);
        }
        let bank_used: usize = self
            .planes
            .values()
            .filter(|p| p.bank == bank)
            .map(|p| p.rows * p.width)
            .sum();
        if offset + len > self.bank_bytes {
            return Err(Error::Capacity {
                unit: "feature SRAM bank",
                needed: bank_used + len,
                available: self.bank_bytes,
            });
        }
        if self.plane_bytes() + len + self.reserved > self.capacity() {
            return Err(Error::Capacity {
                unit: "feature SRAM buffer",
                needed: self.plane_bytes() + len + self.reserved,
                available: self.capacity(),
            });
        }
        self.planes.insert(
            key,
            Plane {
                bank,
                offset,
                row0,
                rows,
                width,
                map_h,
            },
        );
        Ok(())
    }

    pub fn free(&mut self, key: usize) {
        self.planes.remove(&key);
    }

    fn locate(&self, key: usize, y: usize, x: usize) -> (usize, usize) {
        let p = self.planes.get(&key).unwrap_or_else(|| panic!("plane {key} not resident"));
        assert!(
            y >= p.row0 && y < p.row0 + p.rows && x < p.width,
            "pixel ({y},{x}) outside plane {key} rows {}..{}",
            p.row0,
            p.row0 + p.rows
        );
        (p.bank, p.offset + (y - p.row0) * p.width + x)
    }

    /// Reads one pixel. Coordinates are signed so a stray padding access is
    /// caught and counted instead of aliasing a real pixel.
    pub fn read(&self, key: usize, y: isize, x: isize, c: &mut SimCounters) -> i8 {
        let p = self.planes[&key];
        if y < 0 || x < 0 || y as usize >= p.map_h || x as usize >= p.width {
            c.halo_bank_accesses += 1;
            return 0;
        }
        let (bank, addr) = self.locate(key, y as usize, x as usize);
        c.fsram_reads[bank] += 1;
        self.banks[bank][addr]
    }

    pub fn write(&mut self, key: usize, y: usize, x: usize, v: i8, c: &mut SimCounters) {
        let (bank, addr) = self.locate(key, y, x);
        c.fsram_writes[bank] += 1;
        self.banks[bank][addr] = v;
    }

    pub fn bank_of(&self, key: usize) -> usize {
        self.planes[&key].bank
    }

    /// Bank row holding the pixel under double-pixels-per-row packing.
    pub fn bank_row(&self, key: usize, y: usize, x: usize) -> usize {
        self.locate(key, y, x).1 / 2
    }
}

/// Weight SRAM: one kernel per bank row.
#[derive(Debug, Clone)]
pub struct WeightSram {
    row_bytes: usize,
    rows_per_bank: usize,
    banks: Vec<Vec<i8>>,
    slots: HashMap<(usize, usize), (usize, usize)>,
    fill: Vec<usize>,
}

impl WeightSram {
    pub fn new(banks: usize, bank_bytes: usize) -> Self {
        let row_bytes = 9;
        WeightSram {
            row_bytes,
            rows_per_bank: bank_bytes / row_bytes,
            banks: vec![vec![0; bank_bytes]; banks],
            slots: HashMap::new(),
            fill: vec![0; banks],
        }
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.fill.iter_mut().for_each(|f| *f = 0);
    }

    /// Whether `kernels` kernels spread over `lanes` banks would fit.
    pub fn fits(&self, lanes: usize, kernels: usize) -> bool {
        kernels.div_ceil(lanes.clamp(1, self.banks.len())) <= self.rows_per_bank
    }

    /// Stores kernel `(m, n)` in bank `m % banks`; returns the row used.
    pub fn store(&mut self, m: usize, n: usize, taps: &[i8], c: &mut SimCounters) -> Result<usize> {
        let bank = m % self.banks.len();
        let row = self.fill[bank];
        if row >= self.rows_per_bank {
            return Err(Error::Capacity {
                unit: "weight SRAM bank",
                needed: (row + 1) * self.row_bytes,
                available: self.rows_per_bank * self.row_bytes,
            });
        }
        let start = row * self.row_bytes;
        self.banks[bank][start..start + taps.len()].copy_from_slice(taps);
        self.fill[bank] += 1;
        self.slots.insert((m, n), (bank, row));
        c.wsram_writes[bank] += 1;
        Ok(row)
    }

    /// Largest row count over the banks: the cycles needed to fill the SRAM
    /// when every bank takes one kernel per cycle.
    pub fn load_cycles(&self) -> u64 {
        self.fill.iter().copied().max().unwrap_or(0) as u64
    }

    pub fn fetch(&self, m: usize, n: usize, len: usize, c: &mut SimCounters) -> Vec<i8> {
        let (bank, row) = self.slots[&(m, n)];
        c.wsram_reads[bank] += 1;
        let start = row * self.row_bytes;
        self.banks[bank][start..start + len].to_vec()
    }
}

/// Row store used for the feature-reuse and pooling-reuse SRAMs.
#[derive(Debug, Clone)]
pub struct LineStore {
    unit: &'static str,
    capacity: usize,
    rows: HashMap<(usize, usize), Vec<i8>>,
    used: usize,
}

impl LineStore {
    pub fn new(unit: &'static str, capacity: usize) -> Self {
        LineStore {
            unit,
            capacity,
            rows: HashMap::new(),
            used: 0,
        }
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        self.used = 0;
    }

    pub fn used(&self) -> usize {
        self.used
    }

    /// Replaces everything held for `key` with `lines` (row index, pixels).
    pub fn replace(&mut self, key: usize, lines: Vec<(usize, Vec<i8>)>) -> Result<u64> {
        self.remove(key);
        let bytes: usize = lines.iter().map(|(_, l)| l.len()).sum();
        if self.used + bytes > self.capacity {
            return Err(Error::Capacity {
                unit: self.unit,
                needed: self.used + bytes,
                available: self.capacity,
            });
        }
        self.used += bytes;
        for (row, line) in lines {
            self.rows.insert((key, row), line);
        }
        Ok(bytes as u64)
    }

    pub fn remove(&mut self, key: usize) {
        let stale: Vec<_> = self.rows.keys().filter(|(k, _)| *k == key).copied().collect();
        for k in stale {
            if let Some(l) = self.rows.remove(&k) {
                self.used -= l.len();
            }
        }
    }

    pub fn has_row(&self, key: usize, row: usize) -> bool {
        self.rows.contains_key(&(key, row))
    }

    pub fn read(&self, key: usize, row: usize, x: usize) -> i8 {
        self.rows[&(key, row)][x]
    }

    pub fn take_row(&mut self, key: usize, row: usize) -> Option<Vec<i8>> {
        let line = self.rows.remove(&(key, row))?;
        self.used -= line.len();
        Some(line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_overflow_is_reported() {
        let mut fb = FeatureBuffer::new(2, 16);
        fb.alloc(0, 0, 0, 2, 8, 2).unwrap();
        let err = fb.alloc(1, 0, 0, 1, 1, 1).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        fb.alloc(1, 1, 0, 2, 8, 2).unwrap();
        fb.free(0);
        fb.alloc(2, 0, 0, 1, 16, 1).unwrap();
    }

    #[test]
    fn padding_reads_are_flagged() {
        let mut fb = FeatureBuffer::new(1, 16);
        let mut c = SimCounters::new(1, 1);
        fb.alloc(0, 0, 0, 2, 2, 2).unwrap();
        fb.write(0, 1, 1, 5, &mut c);
        assert_eq!(fb.read(0, 1, 1, &mut c), 5);
        assert_eq!(fb.read(0, -1, 0, &mut c), 0);
        assert_eq!(c.halo_bank_accesses, 1);
        assert_eq!(c.fsram_reads[0], 1);
        assert_eq!(fb.bank_row(0, 1, 1), 1);
    }

    #[test]
    fn weight_rows_per_bank() {
        let mut w = WeightSram::new(32, 288);
        let mut c = SimCounters::new(32, 32);
        for m in 0..32 {
            for n in 0..32 {
                w.store(m, n, &[1; 9], &mut c).unwrap();
            }
        }
        assert_eq!(w.load_cycles(), 32);
        assert!(w.store(0, 99, &[1; 9], &mut c).is_err());
        assert!(w.fits(32, 1024));
        assert!(!w.fits(32, 1025));
    }
}
