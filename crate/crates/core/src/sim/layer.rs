//! Layer execution: tiling loops, strip staging, passes over the array and
//! the output path (requantize, optional pooling, DRAM or resident buffer).

use std::ops::Range;

use crate::cost::{check_tiling, decomposition_applies, segment_rows, TilingChoice};
use crate::error::{Error, Result};
use crate::net::{LayerKind, LayerSpec};
use crate::quant::{finish, quantize_product, QKernels, QTensor, QuantMode};
use crate::sim::counters::{SimCounters, Stream};
use crate::sim::decompose::decompose_channels;
use crate::sim::pool::PoolUnit;
use crate::sim::reuse::ReuseModule;
use crate::sim::ring::{schedule_raster, schedule_ring, RingStep};
use crate::sim::sram::{FeatureBuffer, LineStore};
use crate::sim::trace::Trace;
use crate::sim::window::{PixelSource, WindowEngine};
use crate::sim::{LayerRun, SimMachine};

pub(crate) struct LayerJob<'a> {
    pub layer: &'a LayerSpec,
    pub t: TilingChoice,
    pub kernels: &'a QKernels,
    pub shift: u32,
    /// `None` when the input already sits in the active feature buffer.
    pub input: Option<&'a QTensor>,
    pub input_exp: i32,
    pub out_resident: bool,
    pub fuse_pool: bool,
    pub decomposed: bool,
}

struct Source<'a> {
    buf: &'a FeatureBuffer,
    key: usize,
    frsram: &'a LineStore,
    channel: usize,
    /// Input rows above this one are served by the feature-reuse SRAM.
    halo_end: isize,
}

impl PixelSource for Source<'_> {
    fn fetch(&self, y: usize, x: usize, c: &mut SimCounters) -> i8 {
        if (y as isize) < self.halo_end {
            c.frsram_reads += 1;
            self.frsram.read(self.channel, y, x)
        } else {
            self.buf.read(self.key, y as isize, x as isize, c)
        }
    }
}

/// Output side of a pass.
struct Sink<'o> {
    out: &'o mut QTensor,
    pool: Option<PoolUnit>,
    resident: bool,
}

impl Sink<'_> {
    fn store(&mut self, buf: &mut FeatureBuffer, m: usize, y: usize, x: usize, v: i8, c: &mut SimCounters) {
        self.out.set(m, y, x, v);
        if self.resident {
            buf.write(m, y, x, v, c);
        } else {
            c.write_dram(1);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        buf: &mut FeatureBuffer,
        lane: usize,
        m: usize,
        y: usize,
        x: usize,
        v: i8,
        cycle: u64,
        c: &mut SimCounters,
        trace: &mut Trace,
    ) {
        match self.pool.as_mut() {
            Some(pool) => {
                if let Some((py, px, pv)) = pool.feed(lane, y, x, v) {
                    c.pooled_pixels += 1;
                    if lane == 0 {
                        let lanes = pool.lanes() as u64;
                        trace.emit(cycle, "pool", "out", || format!("y{py}:x{px}"), lanes);
                    }
                    self.store(buf, m, py, px, pv, c);
                }
            }
            None => self.store(buf, m, y, x, v, c),
        }
    }
}

/// Kernel taps feeding one PEA row, keyed by column.
type RowInputs = Vec<(usize, Vec<i8>)>;

struct PassSpec {
    /// Input channel and plane key per column.
    columns: Vec<(usize, usize)>,
    /// Output channel per PEA row with its `(column, kernel)` inputs.
    rows: Vec<(usize, RowInputs)>,
    r0: usize,
    n_rows: usize,
    psum_y0: usize,
    psum_rows: usize,
    halo_end: isize,
    start_cycle: u64,
    fill: u64,
    finalize: bool,
    reuse: bool,
}

#[inline]
fn dot(window: &[i8], kernel: &[i8], mode: QuantMode, shift: u32) -> i32 {
    match mode {
        QuantMode::PostAccumulation => window.iter().zip(kernel).map(|(&a, &b)| a as i32 * b as i32).sum(),
        QuantMode::PerProduct => window
            .iter()
            .zip(kernel)
            .map(|(&a, &b)| quantize_product(a as i32 * b as i32, shift))
            .sum(),
    }
}

fn seg_input_rows(l: &LayerSpec, r0: usize, rows: usize) -> (isize, isize) {
    let y0 = (r0 * l.stride) as isize - l.pad as isize;
    let y1 = ((r0 + rows - 1) * l.stride + l.kernel) as isize - l.pad as isize;
    (y0, y1)
}

fn ext_w(l: &LayerSpec) -> u64 {
    let (_, ow) = l.output_dims();
    (l.stride * (ow - 1) + l.kernel) as u64
}

impl SimMachine {
    fn load_weights(
        &mut self,
        k: &QKernels,
        ms: Range<usize>,
        ns: Range<usize>,
        depthwise: bool,
        c: &mut SimCounters,
    ) -> Result<()> {
        self.wsram.clear();
        let mut count = 0u64;
        for m in ms.clone() {
            let plane_ns = if depthwise { 0..1 } else { ns.clone() };
            for n in plane_ns {
                self.wsram.store(m - ms.start, n, k.plane(m, n), c)?;
                count += 1;
            }
        }
        let bytes = count * (k.k * k.k) as u64;
        c.read_dram(Stream::Weight, bytes);
        c.kernel_load_cycles += self.wsram.load_cycles();
        let at = self.clock + c.cycles;
        self.trace
            .emit(at, "dram", "rd_w", || format!("m{}-{}:n{}-{}", ms.start, ms.end, ns.start, ns.end), bytes);
        self.trace.emit(at, "wsram", "load", || format!("rows{}", self.wsram.load_cycles()), bytes);
        Ok(())
    }

    /// Copies rows `[y0, y1)` of channel `n` from the DRAM image into the
    /// input buffer. Returns the bytes moved over the bus, which include the
    /// padding rows and columns of the window extent.
    #[allow(clippy::too_many_arguments)]
    fn stage_strip(
        &mut self,
        l: &LayerSpec,
        x: &QTensor,
        n: usize,
        key: usize,
        bank: usize,
        y0: isize,
        y1: isize,
        c: &mut SimCounters,
    ) -> Result<()> {
        let inb = self.active;
        let lo = y0.max(0) as usize;
        let hi = (y1.max(0) as usize).min(l.in_h);
        let rows = hi.saturating_sub(lo);
        self.fsram[inb].alloc(key, bank, lo, rows, l.in_w, l.in_h)?;
        for y in lo..hi {
            for xx in 0..l.in_w {
                self.fsram[inb].write(key, y, xx, x.get(n, y, xx), c);
            }
        }
        let bytes = (y1 - y0).max(0) as u64 * ext_w(l);
        c.read_dram(Stream::Input, bytes);
        self.trace
            .emit(self.clock + c.cycles, "dram", "rd_in", || format!("n{n}:y{y0}-{y1}"), bytes);
        Ok(())
    }

    /// Keeps the rows shared with the next segment in the feature-reuse SRAM.
    fn capture_halo(&mut self, l: &LayerSpec, x: &QTensor, n: usize, next_r0: usize, c: &mut SimCounters) -> Result<()> {
        let keep = l.kernel.saturating_sub(l.stride);
        let y0 = (next_r0 * l.stride) as isize - l.pad as isize;
        let lines: Vec<(usize, Vec<i8>)> = (y0..y0 + keep as isize)
            .filter(|&y| y >= 0 && (y as usize) < l.in_h)
            .map(|y| {
                let y = y as usize;
                (y, (0..l.in_w).map(|xx| x.get(n, y, xx)).collect())
            })
            .collect();
        let bytes = self.frsram.replace(n, lines)?;
        c.frsram_writes += bytes;
        self.trace.emit(self.clock + c.cycles, "frsram", "wr", || format!("n{n}"), bytes);
        Ok(())
    }

    fn run_pass(&mut self, job: &LayerJob, spec: &PassSpec, psum: &mut [i32], sink: &mut Sink, c: &mut SimCounters) {
        let l = job.layer;
        let (_, ow) = l.output_dims();
        let k = l.kernel;
        let mode = self.opts.quant_mode;
        let sched = if k == 1 {
            schedule_raster(spec.n_rows, ow)
        } else {
            schedule_ring(spec.n_rows, ow)
        };
        let regs = self.hw.reuse_regs_per_array;
        let mut engines: Vec<WindowEngine> = spec
            .columns
            .iter()
            .map(|_| {
                let reuse = spec.reuse.then(|| ReuseModule::new(2, regs));
                WindowEngine::new(k, l.stride, l.pad, l.in_h, l.in_w, reuse)
            })
            .collect();
        let macs: u64 = spec.rows.iter().map(|(_, taps)| (taps.len() * k * k) as u64).sum();
        let (in_bufs, out_bufs) = self.fsram.split_at_mut(1);
        let (in_buf, out_buf) = if self.active == 0 {
            (&in_bufs[0], &mut out_bufs[0])
        } else {
            (&out_bufs[0], &mut in_bufs[0])
        };
        let sources: Vec<Source> = spec
            .columns
            .iter()
            .map(|&(channel, key)| Source {
                buf: in_buf,
                key,
                frsram: &self.frsram,
                channel,
                halo_end: spec.halo_end,
            })
            .collect();
        let trace = &mut self.trace;
        for (idx, st) in sched.iter().enumerate() {
            let cycle = spec.start_cycle + spec.fill + idx as u64;
            let g = RingStep {
                y: st.y + spec.r0,
                ..*st
            };
            for (j, e) in engines.iter_mut().enumerate() {
                let stats = e.step(g, &sources[j], c);
                if stats.steady {
                    c.steady_lr_steps += 1;
                    c.steady_lr_reads += stats.reads;
                }
                if stats.reads > 0 {
                    trace.emit(cycle, "fsram", "rd", || format!("col{j}"), stats.reads);
                }
            }
            let py = g.y - spec.psum_y0;
            for (i, (m, taps)) in spec.rows.iter().enumerate() {
                let acc: i32 = taps
                    .iter()
                    .map(|(j, kern)| dot(engines[*j].window(), kern, mode, job.shift))
                    .sum();
                let slot = (i * spec.psum_rows + py) * ow + g.x;
                psum[slot] += acc;
                if spec.finalize {
                    let v = finish(psum[slot], job.shift, l.relu, mode);
                    sink.emit(out_buf, i, *m, g.y, g.x, v, cycle, c, trace);
                }
            }
            c.active_mac_cycles += macs;
        }
    }

    pub(crate) fn execute(&mut self, job: &LayerJob) -> Result<LayerRun> {
        let l = job.layer;
        let t = job.t;
        let hw = self.hw.clone();
        l.validate()?;
        check_tiling(l, &t, &hw)?;
        let depthwise = l.kind == LayerKind::DepthwiseConv;
        let planes = if depthwise { 1 } else { l.in_ch };
        let kern = job.kernels;
        if (kern.out_ch, kern.in_ch, kern.k) != (l.out_ch, planes, l.kernel) {
            return Err(Error::Shape(format!(
                "layer `{}` expects {}x{}x{}x{} kernels",
                l.name, l.out_ch, planes, l.kernel, l.kernel
            )));
        }
        if let Some(x) = job.input {
            if x.dims() != (l.in_ch, l.in_h, l.in_w) {
                return Err(Error::Shape(format!(
                    "layer `{}` expects {}x{}x{} input, got {:?}",
                    l.name,
                    l.in_ch,
                    l.in_h,
                    l.in_w,
                    x.dims()
                )));
            }
        }
        let (oh, ow) = l.output_dims();
        let pooled = job.fuse_pool && l.pool_after;
        let (ph, pw) = if pooled { (oh / 2, ow / 2) } else { (oh, ow) };
        let mut out = QTensor::zeros(l.out_ch, ph, pw);
        out.scale_exp = job.input_exp + kern.scale_exp + job.shift as i32;

        let (inb, outb) = (self.active, 1 - self.active);
        if job.input.is_some() {
            self.fsram[inb].clear();
        }
        self.fsram[outb].clear();
        self.frsram.clear();
        self.prsram.clear();
        let banks = hw.fsram_banks;
        let mut c = SimCounters::new(banks, hw.wsram_banks);
        if job.out_resident {
            for m in 0..l.out_ch {
                self.fsram[outb].alloc(m, m % banks, 0, ph, pw, ph)?;
            }
        }
        let segs: Vec<(usize, usize)> = segment_rows(oh, t.tsize)
            .into_iter()
            .scan(0, |r0, rows| {
                let s = (*r0, rows);
                *r0 += rows;
                Some(s)
            })
            .collect();
        let decomposed = job.decomposed && decomposition_applies(l, &hw);
        self.trace.emit(self.clock, "ccm", "layer", || l.name.clone(), 0);
        let mut sink = Sink {
            out: &mut out,
            pool: None,
            resident: job.out_resident,
        };
        if decomposed {
            self.run_decomposed(job, &segs, &mut sink, &mut c)?;
        } else {
            self.run_tiled(job, &segs, &mut sink, &mut c)?;
        }
        if job.input.is_some() {
            self.fsram[inb].clear();
        }
        self.clock += c.cycles;
        self.active = outb;
        Ok(LayerRun {
            output: out,
            counters: c,
            tsize: segs.len(),
            pooled,
        })
    }

    fn new_pool(&self, job: &LayerJob, lanes: usize) -> Result<Option<PoolUnit>> {
        if job.fuse_pool && job.layer.pool_after {
            Ok(Some(PoolUnit::new(lanes, job.layer.output_dims().1, &self.hw)?))
        } else {
            Ok(None)
        }
    }

    fn finish_segment(&mut self, sink: &mut Sink, r0: usize, rows: usize, c: &mut SimCounters) -> Result<()> {
        if let Some(pool) = sink.pool.as_mut() {
            if (r0 + rows) % 2 == 1 {
                pool.spill(r0 + rows - 1, &mut self.prsram, c)?;
            }
            c.fifo_peak = c.fifo_peak.max(pool.peak as u64);
        }
        Ok(())
    }

    /// Output-stationary loop: m-tile, then segment, then n-tile. Partial
    /// sums for one (m-tile, segment) stay in the output buffer.
    fn run_tiled(&mut self, job: &LayerJob, segs: &[(usize, usize)], sink: &mut Sink, c: &mut SimCounters) -> Result<()> {
        let l = job.layer;
        let t = job.t;
        let (_, ow) = l.output_dims();
        let depthwise = l.kind == LayerKind::DepthwiseConv;
        let outb = 1 - self.active;
        let fill = self.hw.pass_overhead_cycles;
        let taps = l.kernel * l.kernel;
        let n_groups: Vec<Range<usize>> = if depthwise {
            std::iter::once(0..1).collect()
        } else {
            (0..l.in_ch).step_by(t.tn).map(|n0| n0..(n0 + t.tn).min(l.in_ch)).collect()
        };
        for m0 in (0..l.out_ch).step_by(t.tm) {
            let ms = m0..(m0 + t.tm).min(l.out_ch);
            sink.pool = self.new_pool(job, ms.len())?;
            let whole = depthwise || self.wsram.fits(ms.len(), ms.len() * l.in_ch);
            if whole {
                self.load_weights(job.kernels, ms.clone(), 0..l.in_ch, depthwise, c)?;
            }
            for (si, &(r0, rows)) in segs.iter().enumerate() {
                if let Some(pool) = sink.pool.as_mut() {
                    pool.restore(&mut self.prsram, c);
                }
                let psum_len = ms.len() * rows * ow;
                self.fsram[outb].reserve(psum_len * 4)?;
                c.psum_bytes_peak = c.psum_bytes_peak.max(psum_len as u64 * 4);
                let mut psum = vec![0i32; psum_len];
                let (y0, y1) = seg_input_rows(l, r0, rows);
                let use_fr = si > 0 && job.input.is_some();
                let first = if use_fr { y0 + l.kernel.saturating_sub(l.stride) as isize } else { y0 };
                for (gi, ns) in n_groups.iter().enumerate() {
                    // depthwise: the input channels are the output channels
                    let chans: Vec<usize> = if depthwise { ms.clone().collect() } else { ns.clone().collect() };
                    if !whole {
                        self.load_weights(job.kernels, ms.clone(), ns.clone(), false, c)?;
                    }
                    if let Some(x) = job.input {
                        for &n in &chans {
                            self.stage_strip(l, x, n, n, n % self.hw.fsram_banks, first, y1, c)?;
                        }
                    }
                    let mut rows_spec = Vec::with_capacity(ms.len());
                    for (i, m) in ms.clone().enumerate() {
                        let feeds: Vec<(usize, Vec<i8>)> = if depthwise {
                            vec![(i, self.wsram.fetch(i, 0, taps, c))]
                        } else {
                            chans
                                .iter()
                                .enumerate()
                                .map(|(j, &n)| (j, self.wsram.fetch(i, n, taps, c)))
                                .collect()
                        };
                        rows_spec.push((m, feeds));
                    }
                    let start = self.clock + c.cycles;
                    self.trace.emit(
                        start,
                        "ccm",
                        "pass",
                        || format!("m{}-{}:n{}-{}:seg{si}", ms.start, ms.end, chans[0], chans[chans.len() - 1] + 1),
                        0,
                    );
                    let spec = PassSpec {
                        columns: chans.iter().map(|&n| (n, n)).collect(),
                        rows: rows_spec,
                        r0,
                        n_rows: rows,
                        psum_y0: r0,
                        psum_rows: rows,
                        halo_end: if use_fr { first } else { isize::MIN },
                        start_cycle: start,
                        fill,
                        finalize: gi + 1 == n_groups.len(),
                        reuse: self.opts.reuse_regs && l.kernel > 1 && !depthwise,
                    };
                    let written = c.dram_write_bytes;
                    self.run_pass(job, &spec, &mut psum, sink, c);
                    c.cycles += (rows * ow) as u64 + fill;
                    if c.dram_write_bytes > written {
                        let bytes = c.dram_write_bytes - written;
                        self.trace.emit(self.clock + c.cycles, "dram", "wr", || format!("m{}-{}", ms.start, ms.end), bytes);
                    }
                    if let Some(x) = job.input {
                        if si + 1 < segs.len() {
                            for &n in &chans {
                                self.capture_halo(l, x, n, segs[si + 1].0, c)?;
                            }
                        }
                        for &n in &chans {
                            self.fsram[self.active].free(n);
                        }
                    }
                }
                self.fsram[outb].release();
                self.finish_segment(sink, r0, rows, c)?;
            }
        }
        Ok(())
    }

    /// Few-channel layers: (channel, segment) tasks dealt over the columns,
    /// each column working through its list independently.
    fn run_decomposed(&mut self, job: &LayerJob, segs: &[(usize, usize)], sink: &mut Sink, c: &mut SimCounters) -> Result<()> {
        let l = job.layer;
        let t = job.t;
        let (oh, ow) = l.output_dims();
        let cols = self.hw.pea_cols;
        let banks = self.hw.fsram_banks;
        let outb = 1 - self.active;
        let fill = self.hw.decomp_task_fill_cycles;
        let taps = l.kernel * l.kernel;
        let nseg = segs.len();
        let columns = decompose_channels(l.in_ch, nseg, cols);
        for m0 in (0..l.out_ch).step_by(t.tm) {
            let ms = m0..(m0 + t.tm).min(l.out_ch);
            sink.pool = self.new_pool(job, ms.len())?;
            self.load_weights(job.kernels, ms.clone(), 0..l.in_ch, false, c)?;
            let psum_len = ms.len() * oh * ow;
            self.fsram[outb].reserve(psum_len * 4)?;
            c.psum_bytes_peak = c.psum_bytes_peak.max(psum_len as u64 * 4);
            let mut psum = vec![0i32; psum_len];
            let mut col_time = vec![0u64; cols];
            let base = self.clock + c.cycles;
            for i in 0..l.in_ch * nseg {
                let col = i % cols;
                let task = columns[col][i / cols];
                let (r0, rows) = segs[task.segment];
                let n = task.channel;
                let last = n + 1 == l.in_ch;
                let key = match job.input {
                    Some(x) => {
                        // halo rows are fetched again rather than shared
                        let (y0, y1) = seg_input_rows(l, r0, rows);
                        self.stage_strip(l, x, n, col, col % banks, y0, y1, c)?;
                        col
                    }
                    None => n,
                };
                if last {
                    if let Some(pool) = sink.pool.as_mut() {
                        pool.restore(&mut self.prsram, c);
                    }
                }
                let rows_spec = ms
                    .clone()
                    .enumerate()
                    .map(|(mi, m)| (m, vec![(0, self.wsram.fetch(mi, n, taps, c))]))
                    .collect();
                let start = base + col_time[col];
                self.trace
                    .emit(start, "ccm", "task", || format!("col{col}:n{n}:seg{}", task.segment), 0);
                let spec = PassSpec {
                    columns: vec![(n, key)],
                    rows: rows_spec,
                    r0,
                    n_rows: rows,
                    psum_y0: 0,
                    psum_rows: oh,
                    halo_end: isize::MIN,
                    start_cycle: start,
                    fill,
                    finalize: last,
                    reuse: self.opts.reuse_regs && l.kernel > 1,
                };
                self.run_pass(job, &spec, &mut psum, sink, c);
                col_time[col] += fill + (rows * ow) as u64;
                if job.input.is_some() {
                    self.fsram[self.active].free(col);
                }
                if last {
                    self.finish_segment(sink, r0, rows, c)?;
                }
            }
            c.cycles += col_time.iter().copied().max().unwrap_or(0);
            self.fsram[outb].release();
        }
        Ok(())
    }
}
