use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ringaccel::cost::{energy_efficiency, EnergyParams};
use ringaccel::net::{parse_layer_shorthand, resolve_network, to_json};
use ringaccel::report::{analyze, comparison, AnalysisOptions, Format};
use ringaccel::verify::{simulate, SimOutcome, SimRequest};
use ringaccel::{Builtin, HardwareConfig, QuantMode, Strategy};

#[derive(Parser)]
#[command(name = "ringaccel", version, about = "Cost model, tiling search and simulator for a ring-dataflow CNN accelerator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-layer DRAM traffic, cycles and throughput for one configuration.
    Analyze(AnalyzeArgs),
    /// Tiling factors chosen by the search, with their costs.
    Dse(AnalyzeArgs),
    /// Run the simulator on random tensors and check it against the
    /// reference and the closed forms.
    Simulate(SimulateArgs),
    /// List the built-in networks, or print one as a config file.
    Builtins {
        #[arg(long)]
        dump: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    None,
    Input,
    Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Table,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Table => Format::Table,
        }
    }
}

#[derive(Args, Clone)]
struct HwArgs {
    #[arg(long, default_value_t = 500.0)]
    clock_mhz: f64,
    #[arg(long)]
    mac_budget: Option<usize>,
}

impl HwArgs {
    fn config(&self) -> HardwareConfig {
        let hw = HardwareConfig::default().with_clock_mhz(self.clock_mhz);
        match self.mac_budget {
            Some(b) => hw.with_mac_budget(b),
            None => hw,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Built-in name (ecnn, vgg16, mobilenet_v1, ecnn-mini) or config path.
    #[arg(long, default_value = "ecnn")]
    network: String,
    #[arg(long, value_enum, default_value = "output")]
    strategy: StrategyArg,
    #[arg(long)]
    ofp: bool,
    #[arg(long)]
    ppfs: bool,
    #[arg(long, requires = "tn")]
    tm: Option<usize>,
    #[arg(long, requires = "tm")]
    tn: Option<usize>,
    /// Spread few-channel layers over the array columns.
    #[arg(long)]
    decompose: bool,
    /// Traffic of every reuse variant instead of per-layer rows.
    #[arg(long)]
    compare: bool,
    /// Adds an energy-efficiency line for this power, in watts.
    #[arg(long)]
    power_w: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[command(flatten)]
    hw: HwArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with = "layer")]
    network: Option<String>,
    /// Single layer as HxWxNxMkKsSpP[+pool][+dw][+linear].
    #[arg(long)]
    layer: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ofp: bool,
    #[arg(long)]
    ppfs: bool,
    #[arg(long)]
    decompose: bool,
    #[arg(long)]
    disable_reuse_regs: bool,
    /// Requantize every product instead of the accumulated sum.
    #[arg(long)]
    per_product: bool,
    #[arg(long, default_value_t = 8)]
    shift: u32,
    #[arg(long, default_value_t = 2e9)]
    mac_cap: f64,
    /// Write the event trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    #[command(flatten)]
    hw: HwArgs,
}

fn run_analyze(a: &AnalyzeArgs, search_only: bool) -> ringaccel::Result<String> {
    let net = resolve_network(&a.network)?;
    let hw = a.hw.config();
    if a.compare {
        return comparison(&net, &hw)?.render(a.format.into());
    }
    let opts = AnalysisOptions {
        strategy: match a.strategy {
            StrategyArg::None => None,
            StrategyArg::Input => Some(Strategy::InputReuse),
            StrategyArg::Output => Some(Strategy::OutputReuse),
        },
        ofp: a.ofp,
        ppfs: a.ppfs,
        decompose: a.decompose,
        tiling: if search_only { None } else { a.tm.zip(a.tn) },
    };
    let mut report = analyze(&net, &hw, &opts)?;
    if let Some(p) = a.power_w {
        let gops = report.total().map_or(0.0, |t| t.gops);
        let eff = energy_efficiency(gops, &EnergyParams { power_w: p })?;
        report.notes.push(format!("energy efficiency {eff:.4} Tops/W at {gops:.2} Gops and {p} W"));
    }
    report.render(a.format.into())
}

fn render_sim(out: &SimOutcome, format: Format) -> String {
    if format == Format::Json {
        let layers: Vec<_> = out
            .layers
            .iter()
            .map(|(n, c)| serde_json::json!({ "layer": n, "counters": c }))
            .collect();
        let v = serde_json::json!({
            "network": out.network,
            "checks": out.checks,
            "layers": layers,
            "total": out.total,
        });
        return serde_json::to_string_pretty(&v).expect("json") + "\n";
    }
    let mut s = format!("network: {}\n", out.network);
    for (name, c) in &out.layers {
        s.push_str(&format!(
            "{name}: cycles={} dram_rd={} dram_wr={} fsram_rd={} fsram_wr={} reuse_hits={} active_mac_cycles={} pooled={}\n",
            c.cycles,
            c.dram_read_bytes,
            c.dram_write_bytes,
            c.fsram_reads_total(),
            c.fsram_writes_total(),
            c.reuse_reg_hits,
            c.active_mac_cycles,
            c.pooled_pixels
        ));
    }
    for c in &out.checks {
        s.push_str(&format!("{c}\n"));
    }
    s
}

fn run_simulate(a: &SimulateArgs) -> ringaccel::Result<(String, bool)> {
    let hw = a.hw.config();
    let req = SimRequest {
        seed: a.seed,
        reuse_regs: !a.disable_reuse_regs,
        quant_mode: if a.per_product { QuantMode::PerProduct } else { QuantMode::PostAccumulation },
        ofp: a.ofp,
        ppfs: a.ppfs,
        decompose: a.decompose,
        trace: a.trace.is_some(),
        mac_cap: a.mac_cap as u64,
        shift: a.shift,
    };
    let net = match (&a.layer, &a.network) {
        (Some(l), _) => {
            let layer = parse_layer_shorthand(l)?;
            ringaccel::NetworkSpec::new(&layer.name.clone(), vec![layer])?
        }
        (None, Some(n)) => resolve_network(n)?,
        (None, None) => resolve_network("ecnn-mini")?,
    };
    let out = simulate(&net, &hw, &req)?;
    if let Some(path) = &a.trace {
        let f = File::create(path).map_err(|source| ringaccel::Error::Io {
            path: path.clone(),
            source,
        })?;
        out.trace.write_to(BufWriter::new(f)).map_err(|source| ringaccel::Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok((render_sim(&out, a.format.into()), out.passed()))
}

fn builtins(dump: Option<&str>) -> ringaccel::Result<String> {
    if let Some(name) = dump {
        return Ok(to_json(&resolve_network(name)?) + "\n");
    }
    let mut s = String::new();
    for b in Builtin::ALL {
        let net = ringaccel::builtin_network(b);
        s.push_str(&format!("{}\t{} layers\t{} MACs\n", b.name(), net.layers.len(), net.total_macs()));
    }
    let mini = resolve_network("ecnn-mini")?;
    s.push_str(&format!("ecnn-mini\t{} layers\t{} MACs\n", mini.layers.len(), mini.total_macs()));
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Analyze(a) => run_analyze(a, false).map(|s| (s, true)),
        Cmd::Dse(a) => run_analyze(a, true).map(|s| (s, true)),
        Cmd::Simulate(a) => run_simulate(a),
        Cmd::Builtins { dump } => builtins(dump.as_deref()).map(|s| (s, true)),
    };
    match result {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
