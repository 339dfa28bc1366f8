use serde::{Deserialize, Serialize};

/// Hardware event counts for one simulated layer (or a sum of layers).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounters {
    pub cycles: u64,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub dram_input_bytes: u64,
    pub dram_weight_bytes: u64,
    pub dram_output_bytes: u64,
    /// Pixel reads per feature-SRAM bank (both ping-pong buffers).
    pub fsram_reads: Vec<u64>,
    pub fsram_writes: Vec<u64>,
    pub wsram_reads: Vec<u64>,
    pub wsram_writes: Vec<u64>,
    pub frsram_reads: u64,
    pub frsram_writes: u64,
    pub prsram_reads: u64,
    pub prsram_writes: u64,
    pub reuse_reg_hits: u64,
    pub reuse_reg_writes: u64,
    pub reuse_reg_misses: u64,
    /// Sum over cycles of MAC units doing useful work.
    pub active_mac_cycles: u64,
    pub pooled_pixels: u64,
    /// Cycles to fill the weight SRAM; overlapped with compute, not in `cycles`.
    pub kernel_load_cycles: u64,
    /// Feature-SRAM accesses that targeted a padding coordinate. Always 0.
    pub halo_bank_accesses: u64,
    /// Left/right shifts whose entering pixels are all real, and the
    /// feature-SRAM reads they issued (per column).
    pub steady_lr_steps: u64,
    pub steady_lr_reads: u64,
    pub fifo_peak: u64,
    pub psum_bytes_peak: u64,
}

impl SimCounters {
    pub fn new(banks: usize, wbanks: usize) -> Self {
        SimCounters {
            fsram_reads: vec![0; banks],
            fsram_writes: vec![0; banks],
            wsram_reads: vec![0; wbanks],
            wsram_writes: vec![0; wbanks],
            ..Default::default()
        }
    }

    pub fn fsram_reads_total(&self) -> u64 {
        self.fsram_reads.iter().sum()
    }

    pub fn fsram_writes_total(&self) -> u64 {
        self.fsram_writes.iter().sum()
    }

    pub fn rsram_reads(&self) -> u64 {
        self.frsram_reads + self.prsram_reads
    }

    pub fn rsram_writes(&self) -> u64 {
        self.frsram_writes + self.prsram_writes
    }

    pub fn dram_total_bytes(&self) -> u64 {
        self.dram_read_bytes + self.dram_write_bytes
    }

    pub fn utilization(&self, mac_budget: usize) -> f64 {
        if self.cycles == 0 {
            return 0.0;
        }
        self.active_mac_cycles as f64 / (mac_budget as f64 * self.cycles as f64)
    }

    /// Feature-SRAM reads per steady left/right step and column.
    pub fn steady_reads_per_step(&self) -> f64 {
        self.steady_lr_reads as f64 / self.steady_lr_steps.max(1) as f64
    }

    pub(crate) fn read_dram(&mut self, stream: Stream, bytes: u64) {
        self.dram_read_bytes += bytes;
        match stream {
            Stream::Input => self.dram_input_bytes += bytes,
            Stream::Weight => self.dram_weight_bytes += bytes,
            Stream::Output => self.dram_output_bytes += bytes,
        }
    }

    pub(crate) fn write_dram(&mut self, bytes: u64) {
        self.dram_write_bytes += bytes;
        self.dram_output_bytes += bytes;
    }

    pub fn merge(&mut self, o: &SimCounters) {
        fn add(a: &mut Vec<u64>, b: &[u64]) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.cycles += o.cycles;
        self.dram_read_bytes += o.dram_read_bytes;
        self.dram_write_bytes += o.dram_write_bytes;
        self.dram_input_bytes += o.dram_input_bytes;
        self.dram_weight_bytes += o.dram_weight_bytes;
        self.dram_output_bytes += o.dram_output_bytes;
        add(&mut self.fsram_reads, &o.fsram_reads);
        add(&mut self.fsram_writes, &o.fsram_writes);
        add(&mut self.wsram_reads, &o.wsram_reads);
        add(&mut self.wsram_writes, &o.wsram_writes);
        self.frsram_reads += o.frsram_reads;
        self.frsram_writes += o.frsram_writes;
        self.prsram_reads += o.prsram_reads;
        self.prsram_writes += o.prsram_writes;
        self.reuse_reg_hits += o.reuse_reg_hits;
        self.reuse_reg_writes += o.reuse_reg_writes;
        self.reuse_reg_misses += o.reuse_reg_misses;
        self.active_mac_cycles += o.active_mac_cycles;
        self.pooled_pixels += o.pooled_pixels;
        self.kernel_load_cycles += o.kernel_load_cycles;
        self.halo_bank_accesses += o.halo_bank_accesses;
        self.steady_lr_steps += o.steady_lr_steps;
        self.steady_lr_reads += o.steady_lr_reads;
        self.fifo_peak = self.fifo_peak.max(o.fifo_peak);
        self.psum_bytes_peak = self.psum_bytes_peak.max(o.psum_bytes_peak);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Input,
    Weight,
    #[allow(dead_code)]
    Output,
}
