use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed parameters of the accelerator plus the two calibration constants of
/// the cycle model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub pea_rows: usize,
    pub pea_cols: usize,
    pub pes_per_pea: usize,
    /// Usable MAC units. Equals `pea_rows * pea_cols * pes_per_pea` on the
    /// physical design; may be lowered to explore smaller budgets.
    pub mac_budget: usize,
    pub fsram_bytes_per_buffer: usize,
    pub fsram_banks: usize,
    pub wsram_bytes: usize,
    pub wsram_banks: usize,
    /// Feature-reuse part of the reuse SRAM.
    pub frsram_bytes: usize,
    /// Pooling-reuse part of the reuse SRAM.
    pub prsram_bytes: usize,
    pub reuse_regs_per_array: usize,
    pub pool_fifo_entries: usize,
    pub clock_hz: f64,
    /// Pipeline fill cycles charged once per tiling pass.
    pub pass_overhead_cycles: u64,
    /// Fill cycles charged per task when input channels are decomposed.
    pub decomp_task_fill_cycles: u64,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            pea_rows: 32,
            pea_cols: 4,
            pes_per_pea: 9,
            mac_budget: 1152,
            fsram_bytes_per_buffer: 128 * 1024,
            fsram_banks: 32,
            wsram_bytes: 9 * 1024,
            wsram_banks: 32,
            frsram_bytes: 16 * 1024,
            prsram_bytes: 8 * 1024,
            reuse_regs_per_array: 222,
            pool_fifo_entries: 128,
            clock_hz: 5.0e8,
            pass_overhead_cycles: 2,
            decomp_task_fill_cycles: 172,
        }
    }
}

impl HardwareConfig {
    pub fn with_mac_budget(mut self, budget: usize) -> Self {
        self.mac_budget = budget;
        self
    }

    pub fn with_clock_mhz(mut self, mhz: f64) -> Self {
        self.clock_hz = mhz * 1.0e6;
        self
    }

    pub fn physical_macs(&self) -> usize {
        self.pea_rows * self.pea_cols * self.pes_per_pea
    }

    pub fn rsram_bytes(&self) -> usize {
        self.frsram_bytes + self.prsram_bytes
    }

    pub fn fsram_bank_bytes(&self) -> usize {
        self.fsram_bytes_per_buffer / self.fsram_banks
    }

    pub fn wsram_bank_bytes(&self) -> usize {
        self.wsram_bytes / self.wsram_banks
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("pea_rows", self.pea_rows),
            ("pea_cols", self.pea_cols),
            ("pes_per_pea", self.pes_per_pea),
            ("mac_budget", self.mac_budget),
            ("fsram_bytes_per_buffer", self.fsram_bytes_per_buffer),
            ("fsram_banks", self.fsram_banks),
            ("wsram_bytes", self.wsram_bytes),
            ("wsram_banks", self.wsram_banks),
            ("reuse_regs_per_array", self.reuse_regs_per_array),
            ("pool_fifo_entries", self.pool_fifo_entries),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Hardware(format!("{name} must be positive")));
            }
        }
        if self.mac_budget > self.physical_macs() {
            return Err(Error::Hardware(format!(
                "mac_budget {} exceeds the {} physical MACs",
                self.mac_budget,
                self.physical_macs()
            )));
        }
        if self.clock_hz.is_nan() || self.clock_hz <= 0.0 {
            return Err(Error::Hardware("clock_hz must be positive".into()));
        }
        Ok(())
    }
}
