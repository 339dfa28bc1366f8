use crate::cost::ppfs_resident;
use crate::dse::DsePlan;
use crate::error::{Error, Result};
use crate::net::NetworkSpec;
use crate::quant::{QKernels, QTensor};
use crate::sim::counters::SimCounters;
use crate::sim::layer::LayerJob;
use crate::sim::{LayerRun, SimMachine};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRun {
    pub output: QTensor,
    pub layers: Vec<SimCounters>,
    pub total: SimCounters,
    /// Segments used per layer after fitting the on-chip buffers.
    pub tsizes: Vec<usize>,
    pub resident: Vec<bool>,
}

/// Pooling done by the host on a map that went to DRAM unpooled.
fn host_pool(x: &QTensor) -> QTensor {
    let (c, h, w) = x.dims();
    let mut out = QTensor::zeros(c, h / 2, w / 2);
    out.scale_exp = x.scale_exp;
    for ch in 0..c {
        for y in 0..h / 2 {
            for xx in 0..w / 2 {
                let v = x
                    .get(ch, 2 * y, 2 * xx)
                    .max(x.get(ch, 2 * y, 2 * xx + 1))
                    .max(x.get(ch, 2 * y + 1, 2 * xx))
                    .max(x.get(ch, 2 * y + 1, 2 * xx + 1));
                out.set(ch, y, xx, v);
            }
        }
    }
    out
}

impl SimMachine {
    /// Runs a layer, doubling the segment count whenever an on-chip buffer
    /// would overflow.
    fn execute_fitted(&mut self, job: &mut LayerJob) -> Result<LayerRun> {
        let out_h = job.layer.output_dims().0;
        loop {
            let trace = std::mem::take(&mut self.trace);
            let mark = trace.len();
            let snapshot = self.clone();
            self.trace = trace;
            match self.execute(job) {
                Err(Error::Capacity { .. }) if job.t.tsize < out_h => {
                    let mut trace = std::mem::take(&mut self.trace);
                    trace.truncate(mark);
                    *self = snapshot;
                    self.trace = trace;
                    job.t.tsize *= 2;
                }
                r => return r,
            }
        }
    }
}

/// Executes the planned network with ping-pong buffers. A layer whose output
/// is kept on chip hands it to the next layer without a DRAM round trip.
pub fn run_network(
    sim: &mut SimMachine,
    net: &NetworkSpec,
    plan: &DsePlan,
    input: &QTensor,
    weights: &[QKernels],
    shifts: &[u32],
) -> Result<NetworkRun> {
    let n = net.layers.len();
    if plan.choices.len() != n || weights.len() != n || shifts.len() != n {
        return Err(Error::PlanMismatch {
            plan: plan.choices.len().min(weights.len()).min(shifts.len()),
            network: n,
        });
    }
    let resident: Vec<bool> = (0..n)
        .map(|k| plan.ppfs && ppfs_resident(&net.layers, k, plan.ofp, sim.hw()))
        .collect();
    let mut dram = Some(input.clone());
    let mut exp = input.scale_exp;
    let mut layers = Vec::with_capacity(n);
    let mut tsizes = Vec::with_capacity(n);
    let mut total = SimCounters::new(sim.hw().fsram_banks, sim.hw().wsram_banks);
    let mut last = None;
    for (k, layer) in net.layers.iter().enumerate() {
        let mut job = LayerJob {
            layer,
            t: plan.choices[k],
            kernels: &weights[k],
            shift: shifts[k],
            input: dram.as_ref(),
            input_exp: exp,
            out_resident: resident[k],
            // a resident map can only be pooled on chip
            fuse_pool: plan.ofp || resident[k],
            decomposed: plan.decomposed.get(k).copied().unwrap_or(false),
        };
        let run = sim.execute_fitted(&mut job)?;
        tsizes.push(run.tsize);
        total.merge(&run.counters);
        layers.push(run.counters);
        let out = if layer.pool_after && !run.pooled {
            host_pool(&run.output)
        } else {
            run.output
        };
        exp = out.scale_exp;
        dram = (!resident[k]).then(|| out.clone());
        last = Some(out);
    }
    Ok(NetworkRun {
        output: last.expect("network has layers"),
        layers,
        total,
        tsizes,
        resident,
    })
}
