//! Fused 2x2 max pooling fed by the serpentine output stream.
//!
//! On an even row each horizontal pair is reduced and parked in the FIFO;
//! on the following odd row the pair below completes the quad. Because the
//! traversal is serpentine the two members of a pair arrive back to back,
//! so an odd row yields one pooled pixel every two cycles.

use crate::error::{Error, Result};
use crate::hw::HardwareConfig;
use crate::quant::QTensor;
use crate::sim::counters::SimCounters;
use crate::sim::ring::schedule_ring;
use crate::sim::sram::LineStore;

#[derive(Debug, Clone)]
pub struct PoolUnit {
    lanes: usize,
    pairs_per_row: usize,
    fifo: Vec<Vec<Option<i8>>>,
    partial: Vec<Option<(usize, i8)>>,
    occupancy: Vec<usize>,
    spilled_row: Option<usize>,
    pub peak: usize,
}

impl PoolUnit {
    pub fn new(lanes: usize, out_w: usize, hw: &HardwareConfig) -> Result<Self> {
        let pairs = out_w / 2;
        if pairs > hw.pool_fifo_entries {
            return Err(Error::Capacity {
                unit: "pool FIFO",
                needed: pairs,
                available: hw.pool_fifo_entries,
            });
        }
        Ok(PoolUnit {
            lanes,
            pairs_per_row: pairs,
            fifo: vec![vec![None; pairs]; lanes],
            partial: vec![None; lanes],
            occupancy: vec![0; lanes],
            spilled_row: None,
            peak: 0,
        })
    }

    /// Accepts one conv output; returns `(pooled_y, pooled_x, value)` when
    /// it completes a quad.
    pub fn feed(&mut self, lane: usize, y: usize, x: usize, v: i8) -> Option<(usize, usize, i8)> {
        let px = x / 2;
        let first = match self.partial[lane].take() {
            Some((p, a)) if p == px => a,
            _ => {
                self.partial[lane] = Some((px, v));
                return None;
            }
        };
        let pair = first.max(v);
        if y.is_multiple_of(2) {
            self.fifo[lane][px] = Some(pair);
            self.occupancy[lane] += 1;
            self.peak = self.peak.max(self.occupancy[lane]);
            None
        } else {
            let top = self.fifo[lane][px].take().expect("even row precedes odd row");
            self.occupancy[lane] -= 1;
            Some((y / 2, px, top.max(pair)))
        }
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    /// Moves a half-finished row pair into the pooling-reuse SRAM at a
    /// segment boundary.
    pub fn spill(&mut self, row: usize, store: &mut LineStore, c: &mut SimCounters) -> Result<()> {
        if self.occupancy.iter().all(|&o| o == 0) {
            return Ok(());
        }
        for lane in 0..self.lanes {
            let line: Vec<i8> = self.fifo[lane].iter_mut().map(|e| e.take().unwrap_or(0)).collect();
            self.occupancy[lane] = 0;
            c.prsram_writes += store.replace(lane, vec![(row, line)])?;
        }
        self.spilled_row = Some(row);
        Ok(())
    }

    pub fn restore(&mut self, store: &mut LineStore, c: &mut SimCounters) {
        let Some(row) = self.spilled_row.take() else {
            return;
        };
        for lane in 0..self.lanes {
            if let Some(line) = store.take_row(lane, row) {
                c.prsram_reads += line.len() as u64;
                for (slot, v) in self.fifo[lane].iter_mut().zip(line) {
                    *slot = Some(v);
                }
                self.occupancy[lane] = self.pairs_per_row;
            }
        }
    }
}

/// Streams a whole conv output through the pooling unit, one serpentine
/// position per cycle with all channels in parallel.
pub fn run_onfly_pool(conv_out: &QTensor, hw: &HardwareConfig) -> Result<(QTensor, SimCounters)> {
    let (ch, h, w) = conv_out.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("cannot pool odd map {h}x{w}")));
    }
    let mut unit = PoolUnit::new(ch, w, hw)?;
    let mut c = SimCounters::new(hw.fsram_banks, hw.wsram_banks);
    let mut out = QTensor::zeros(ch, h / 2, w / 2);
    out.scale_exp = conv_out.scale_exp;
    let on_chip = out.len() <= hw.fsram_bytes_per_buffer;
    for (cycle, st) in schedule_ring(h, w).into_iter().enumerate() {
        for lane in 0..ch {
            if let Some((py, px, v)) = unit.feed(lane, st.y, st.x, conv_out.get(lane, st.y, st.x)) {
                out.set(lane, py, px, v);
                c.pooled_pixels += 1;
                if on_chip {
                    c.fsram_writes[lane % hw.fsram_banks] += 1;
                } else {
                    c.write_dram(1);
                }
            }
        }
        c.cycles = cycle as u64 + 1;
    }
    c.fifo_peak = unit.peak as u64;
    Ok((out, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad() {
        let x = QTensor::new(1, 2, 2, 0, vec![1, 2, 3, 4]).unwrap();
        let (y, c) = run_onfly_pool(&x, &HardwareConfig::default()).unwrap();
        assert_eq!(y.data, vec![4]);
        assert_eq!(c.pooled_pixels, 1);
    }

    #[test]
    fn fifo_bound() {
        let hw = HardwareConfig::default();
        assert!(PoolUnit::new(1, 256, &hw).is_ok());
        assert!(PoolUnit::new(1, 258, &hw).is_err());
    }
}
