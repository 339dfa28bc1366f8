//! Per-layer report rows and their CSV / JSON / text-table encodings.
//!
//! Every number that has a published counterpart is accompanied by a note
//! giving both values and the relative deviation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cost::{self, access_no_reuse, mb_micro, AccessBreakdown, Strategy, TilingChoice};
use crate::dse::{self, published_reference, plan_network, plan_with_choices, DsePlan, PlanOptions};
use crate::error::{Error, Result};
use crate::hw::HardwareConfig;
use crate::net::{LayerSpec, NetworkSpec};

/// One line of a report. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub layer: String,
    pub tm: usize,
    pub tn: usize,
    pub strategy: String,
    pub cycles: u64,
    pub utilization: f64,
    pub gops: f64,
    pub input_bytes: u64,
    pub weight_bytes: u64,
    pub output_bytes: u64,
    pub total_bytes: u64,
    pub mb: f64,
}

/// `bytes / 2^20`, rounded half-even to six decimals.
pub fn mb6(bytes: u64) -> f64 {
    mb_micro(bytes) as f64 / 1.0e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub network: String,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
    Table,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// What `analyze` and `dse` evaluate. `strategy: None` is the no-reuse
/// baseline (cycles still come from the searched tiling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub strategy: Option<Strategy>,
    pub ofp: bool,
    pub ppfs: bool,
    pub decompose: bool,
    /// Forces `(tm, tn)` on every layer instead of searching.
    pub tiling: Option<(usize, usize)>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            strategy: Some(Strategy::OutputReuse),
            ofp: false,
            ppfs: false,
            decompose: false,
            tiling: None,
        }
    }
}

impl AnalysisOptions {
    /// Label used for published-value lookups, e.g. `output+ofp+ppfs`.
    pub fn label(&self) -> String {
        let mut s = match self.strategy {
            None => return "no_reuse".into(),
            Some(st) => st.label().to_owned(),
        };
        if self.ofp {
            s.push_str("+ofp");
        }
        if self.ppfs {
            s.push_str("+ppfs");
        }
        s
    }
}

pub fn build_plan(net: &NetworkSpec, hw: &HardwareConfig, opts: &AnalysisOptions) -> Result<DsePlan> {
    let popts = PlanOptions {
        strategy: opts.strategy.unwrap_or(Strategy::OutputReuse),
        ofp: opts.ofp,
        ppfs: opts.ppfs,
        decompose: opts.decompose,
    };
    match opts.tiling {
        None => plan_network(net, hw, popts),
        Some((tm, tn)) => {
            let choices = net
                .layers
                .iter()
                .map(|l| {
                    let t = TilingChoice::new(tm, tn, popts.strategy).with_tsize(dse::staging_tsize(l, hw));
                    cost::check_tiling(l, &t, hw).map(|_| t)
                })
                .collect::<Result<Vec<_>>>()?;
            plan_with_choices(net, hw, choices, popts)
        }
    }
}

/// Per-stream bytes when nothing is kept on chip: one input and one weight
/// fetch per MAC, one write per output.
pub fn no_reuse_breakdown(l: &LayerSpec) -> AccessBreakdown {
    let macs = l.macs();
    AccessBreakdown {
        input_bytes: macs,
        weight_bytes: macs,
        output_bytes: l.output_pixels() * l.out_ch as u64,
        total_bytes: access_no_reuse(l),
        passes_in: 1,
        passes_weight: 1,
        passes_out: 1,
    }
}

fn row(name: &str, t: Option<&TilingChoice>, label: &str, perf: (u64, f64, f64), a: &AccessBreakdown) -> ReportRow {
    ReportRow {
        layer: name.to_owned(),
        tm: t.map_or(0, |t| t.tm),
        tn: t.map_or(0, |t| t.tn),
        strategy: label.to_owned(),
        cycles: perf.0,
        utilization: perf.1,
        gops: perf.2,
        input_bytes: a.input_bytes,
        weight_bytes: a.weight_bytes,
        output_bytes: a.output_bytes,
        total_bytes: a.total_bytes,
        mb: mb6(a.total_bytes),
    }
}

fn deviation(ours: f64, theirs: f64) -> f64 {
    (ours - theirs) / theirs * 100.0
}

pub fn analyze(net: &NetworkSpec, hw: &HardwareConfig, opts: &AnalysisOptions) -> Result<Report> {
    let plan = build_plan(net, hw, opts)?;
    let label = opts.label();
    let mut rows = Vec::with_capacity(net.layers.len() + 1);
    let mut total = AccessBreakdown::default();
    for (k, l) in net.layers.iter().enumerate() {
        let a = match opts.strategy {
            Some(_) => plan.access.layers[k],
            None => no_reuse_breakdown(l),
        };
        total.input_bytes += a.input_bytes;
        total.weight_bytes += a.weight_bytes;
        total.output_bytes += a.output_bytes;
        total.total_bytes += a.total_bytes;
        let p = &plan.perf[k];
        rows.push(row(&l.name, Some(&plan.choices[k]), &label, (p.cycles, p.utilization, p.gops), &a));
    }
    let util = plan.utilization(net, hw);
    rows.push(row(
        "total",
        None,
        &label,
        (plan.total_cycles, util, cost::performance(util, hw)),
        &total,
    ));
    let mut notes = Vec::new();
    if let Some((mb, _)) = published_reference(&net.name, &label) {
        let ours = mb6(total.total_bytes);
        if (ours - mb).abs() > 5e-7 {
            notes.push(format!(
                "{label} total: computed {ours:.6} MB, published {mb} MB, deviation {:+.2}%",
                deviation(ours, mb)
            ));
        }
    }
    notes.extend(latency_notes(net, &plan, hw));
    Ok(Report {
        network: net.name.clone(),
        rows,
        notes,
    })
}

/// Published latency figures for the built-in networks.
fn latency_notes(net: &NetworkSpec, plan: &DsePlan, hw: &HardwareConfig) -> Vec<String> {
    let ms = plan.total_cycles as f64 / hw.clock_hz * 1e3;
    match net.name.as_str() {
        "vgg16" => {
            let published = 13_351_390.0;
            vec![format!(
                "total cycles {} vs published 13.35139 (read as megacycles), deviation {:+.3}%; at {:.0} MHz that is {ms:.3} ms, the published ms figure is not reproduced",
                plan.total_cycles,
                deviation(plan.total_cycles as f64, published),
                hw.clock_hz / 1e6
            )]
        }
        "ecnn" => vec![format!(
            "latency {ms:.3} ms from {} cycles vs published 1.752 ms (data transfer time is not modelled), deviation {:+.2}%",
            plan.total_cycles,
            deviation(ms, 1.752)
        )],
        _ => Vec::new(),
    }
}

/// Strategy comparison as a report: one row per variant, tm/tn = 0.
pub fn comparison(net: &NetworkSpec, hw: &HardwareConfig) -> Result<Report> {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for r in dse::compare_strategies(net, hw)? {
        rows.push(ReportRow {
            layer: "total".into(),
            tm: 0,
            tn: 0,
            strategy: r.label.clone(),
            cycles: 0,
            utilization: 0.0,
            gops: 0.0,
            input_bytes: 0,
            weight_bytes: 0,
            output_bytes: 0,
            total_bytes: r.total_bytes,
            mb: mb6(r.total_bytes),
        });
        let mut n = format!("{}: {:.6} MB, {:.1}x vs no reuse", r.label, r.mb, r.ratio);
        if let Some(p) = r.published_mb {
            let _ = write!(n, "; published {p} MB (deviation {:+.2}%)", deviation(r.mb, p));
        }
        if let Some(p) = r.published_ratio {
            let _ = write!(n, ", published ratio {p}x");
        }
        notes.push(n);
    }
    Ok(Report {
        network: net.name.clone(),
        rows,
        notes,
    })
}

impl Report {
    pub fn total(&self) -> Option<&ReportRow> {
        self.rows.iter().rev().find(|r| r.layer == "total")
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
            Format::Table => Ok(self.to_table()),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        let mut text = String::from_utf8(w.into_inner().map_err(|e| Error::Report(e.to_string()))?)
            .map_err(|e| Error::Report(e.to_string()))?;
        let _ = writeln!(text, "# network: {}", self.network);
        for n in &self.notes {
            let _ = writeln!(text, "# {n}");
        }
        Ok(text)
    }

    pub fn from_csv(text: &str) -> Result<Report> {
        let mut network = String::new();
        let mut notes = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            match line.strip_prefix("# ") {
                Some(rest) => match rest.strip_prefix("network: ") {
                    Some(name) => network = name.to_owned(),
                    None => notes.push(rest.to_owned()),
                },
                None => {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>().map_err(csv_err)?;
        Ok(Report { network, rows, notes })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_table(&self) -> String {
        let head = [
            "layer", "tm", "tn", "strategy", "cycles", "util", "gops", "input_B", "weight_B", "output_B", "total_B", "MB",
        ];
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.layer.clone(),
                    r.tm.to_string(),
                    r.tn.to_string(),
                    r.strategy.clone(),
                    r.cycles.to_string(),
                    format!("{:.4}", r.utilization),
                    format!("{:.2}", r.gops),
                    r.input_bytes.to_string(),
                    r.weight_bytes.to_string(),
                    r.output_bytes.to_string(),
                    r.total_bytes.to_string(),
                    format!("{:.6}", r.mb),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..head.len())
            .map(|i| cells.iter().map(|c| c[i].len()).chain([head[i].len()]).max().unwrap_or(0))
            .collect();
        let mut out = format!("network: {}\n", self.network);
        let line = |v: Vec<&str>| {
            v.iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, w))| if i == 0 || i == 3 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        out.push_str(&line(head.to_vec()));
        out.push('\n');
        for c in &cells {
            out.push_str(&line(c.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{builtin_network, Builtin};

    #[test]
    fn ecnn_total_row() {
        let r = analyze(&builtin_network(Builtin::Ecnn), &HardwareConfig::default(), &AnalysisOptions::default()).unwrap();
        let t = r.total().unwrap();
        assert_eq!((t.tm, t.tn), (0, 0));
        assert_eq!(t.total_bytes, 5_246_956);
        assert_eq!(t.mb, 5.003887);
        assert_eq!(t.cycles, 415_890);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let opts = AnalysisOptions {
            ofp: true,
            ppfs: true,
            ..AnalysisOptions::default()
        };
        let r = analyze(&builtin_network(Builtin::Ecnn), &HardwareConfig::default(), &opts).unwrap();
        assert!(!r.notes.is_empty());
        assert_eq!(Report::from_csv(&r.to_csv().unwrap()).unwrap(), r);
        assert_eq!(Report::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn half_even_mb() {
        // 8192 B = 7812.5 millionths of a MB, an exact tie
        assert_eq!(mb6(8192), 0.007812);
        assert_eq!(mb6(3 * 8192), 0.023438);
        assert_eq!(mb6(1), 0.000001);
    }

    #[test]
    fn no_reuse_rows() {
        let opts = AnalysisOptions {
            strategy: None,
            ..AnalysisOptions::default()
        };
        let r = analyze(&builtin_network(Builtin::Ecnn), &HardwareConfig::default(), &opts).unwrap();
        assert_eq!(r.total().unwrap().total_bytes, 923_623_424);
    }
}
