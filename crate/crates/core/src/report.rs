//! strace-style cost reports and run-to-run comparison.
//!
//! Simulated time is cost units: one unit is rendered as one microsecond,
//! so the SECONDS column is `cost_units * 1e-6`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vfs::{SimConfig, SimCounters};
use crate::workload::{OpKind, TraceHeader};

pub const TABLE_HEADER: &str = "% TIME  SECONDS  USECS/CALL  CALLS  ERRORS  SYSCALL";
const TABLE_RULE: &str = "------  -------  ----------  -----  ------  -------";
pub const CSV_HEADER: &str =
    "syscall,pct_time,seconds,usecs_per_call,calls,errors,cost_units,block_reads";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowStats {
    pub calls: u64,
    pub errors: u64,
    pub cost_units: u64,
    pub block_reads: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub syscall: String,
    pub pct_time: f64,
    pub cost_units: u64,
    /// Integer cost per call, truncated.
    pub units_per_call: u64,
    pub calls: u64,
    pub errors: u64,
    pub block_reads: u64,
}

impl ReportRow {
    fn new(syscall: &str, s: RowStats, total_cost: u64) -> Self {
        let pct_time = if total_cost == 0 {
            0.0
        } else {
            s.cost_units as f64 * 100.0 / total_cost as f64
        };
        ReportRow {
            syscall: syscall.to_owned(),
            pct_time,
            cost_units: s.cost_units,
            units_per_call: s.cost_units.checked_div(s.calls).unwrap_or(0),
            calls: s.calls,
            errors: s.errors,
            block_reads: s.block_reads,
        }
    }

    pub fn seconds(&self) -> f64 {
        self.cost_units as f64 * 1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub trace: TraceHeader,
    pub config: SimConfig,
    pub rows: Vec<ReportRow>,
    pub total: ReportRow,
    pub counters: SimCounters,
    pub sstable_blocks_read: u64,
    pub warm_loaded: Option<usize>,
}

impl Report {
    pub fn from_rows(
        trace: TraceHeader,
        config: SimConfig,
        rows: Vec<(OpKind, RowStats)>,
        counters: SimCounters,
        sstable_blocks_read: u64,
        warm_loaded: Option<usize>,
    ) -> Self {
        let mut total = RowStats::default();
        for (_, s) in &rows {
            total.calls += s.calls;
            total.errors += s.errors;
            total.cost_units += s.cost_units;
            total.block_reads += s.block_reads;
        }
        let rows = rows
            .into_iter()
            .map(|(k, s)| ReportRow::new(k.label(), s, total.cost_units))
            .collect();
        Report {
            trace,
            config,
            rows,
            total: ReportRow::new("TOTAL", total, total.cost_units),
            counters,
            sstable_blocks_read,
            warm_loaded,
        }
    }

    pub fn row(&self, syscall: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.syscall == syscall)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(format!("bad report: {e}")))
    }
}

/// Short name for a simulator configuration.
pub fn mode_label(config: &SimConfig) -> &'static str {
    match (config.metacache_enabled, config.warm_on_boot) {
        (false, _) => "baseline",
        (true, true) => "metacache",
        (true, false) => "metacache-cold",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

pub fn render_report(report: &Report, format: Format) -> String {
    match format {
        Format::Table => render_table(report),
        Format::Csv => render_csv(report),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn table_line(out: &mut String, r: &ReportRow) {
    writeln!(
        out,
        "{:>6.2}  {:>7.6}  {:>10}  {:>5}  {:>6}  {}",
        r.pct_time,
        r.seconds(),
        r.units_per_call,
        r.calls,
        r.errors,
        r.syscall
    )
    .unwrap();
}

fn render_table(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(TABLE_HEADER);
    out.push('\n');
    out.push_str(TABLE_RULE);
    out.push('\n');
    for r in &report.rows {
        table_line(&mut out, r);
    }
    out.push_str(TABLE_RULE);
    out.push('\n');
    table_line(&mut out, &report.total);
    let c = &report.config;
    let k = &report.counters;
    let warm = report
        .warm_loaded
        .map_or_else(|| "-".to_owned(), |n| n.to_string());
    writeln!(
        out,
        "# mode={} icache_capacity={} inline_threshold={} block_size={} seed={} warm_loaded={}",
        mode_label(c),
        c.icache_capacity,
        c.inline_threshold,
        c.block_size,
        report.trace.spec.seed,
        warm
    )
    .unwrap();
    writeln!(
        out,
        "# icache_hits={} metacache_hits={} disk_fallbacks={} block_reads={} data_block_reads={} block_writes={} seeks={} sstable_blocks_read={}",
        k.icache_hits,
        k.metacache_hits,
        k.disk_fallbacks,
        k.block_reads,
        k.data_block_reads,
        k.block_writes,
        k.seeks,
        report.sstable_blocks_read
    )
    .unwrap();
    out
}

fn render_csv(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in report.rows.iter().chain(std::iter::once(&report.total)) {
        writeln!(
            out,
            "{},{:.2},{:.6},{},{},{},{},{}",
            r.syscall,
            r.pct_time,
            r.seconds(),
            r.units_per_call,
            r.calls,
            r.errors,
            r.cost_units,
            r.block_reads
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub scope: String,
    pub metric: String,
    pub a: u64,
    pub b: u64,
    /// `b - a`
    pub delta: i64,
    /// `b / a`, absent when `a` is zero.
    pub ratio: Option<f64>,
    /// Lower is better for every metric.
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    pub fn find(&self, scope: &str, metric: &str) -> Option<&CompareRow> {
        self.rows
            .iter()
            .find(|r| r.scope == scope && r.metric == metric)
    }
}

fn compare_row(scope: &str, metric: &str, a: u64, b: u64) -> CompareRow {
    CompareRow {
        scope: scope.to_owned(),
        metric: metric.to_owned(),
        a,
        b,
        delta: b as i64 - a as i64,
        ratio: (a != 0).then(|| b as f64 / a as f64),
        winner: match b.cmp(&a) {
            std::cmp::Ordering::Less => Winner::B,
            std::cmp::Ordering::Greater => Winner::A,
            std::cmp::Ordering::Equal => Winner::Tie,
        },
    }
}

/// Compares two reports of the same trace.
pub fn compare_runs(a: &Report, b: &Report) -> Result<Comparison> {
    if a.trace != b.trace {
        return Err(Error::TraceMismatch);
    }
    let mut rows = Vec::new();
    for ra in a.rows.iter().chain(std::iter::once(&a.total)) {
        let rb = if ra.syscall == "TOTAL" {
            &b.total
        } else {
            b.row(&ra.syscall).ok_or(Error::TraceMismatch)?
        };
        rows.push(compare_row(
            &ra.syscall,
            "cost_units",
            ra.cost_units,
            rb.cost_units,
        ));
        rows.push(compare_row(
            &ra.syscall,
            "block_reads",
            ra.block_reads,
            rb.block_reads,
        ));
    }
    let (ca, cb) = (&a.counters, &b.counters);
    for (metric, x, y) in [
        ("disk_fallbacks", ca.disk_fallbacks, cb.disk_fallbacks),
        (
            "metadata_block_reads",
            ca.metadata_block_reads,
            cb.metadata_block_reads,
        ),
        ("data_block_reads", ca.data_block_reads, cb.data_block_reads),
        ("seeks", ca.seeks, cb.seeks),
    ] {
        rows.push(compare_row("COUNTERS", metric, x, y));
    }
    Ok(Comparison {
        label_a: mode_label(&a.config).to_owned(),
        label_b: mode_label(&b.config).to_owned(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareFormat {
    Text,
    Csv,
}

fn winner_name(c: &Comparison, w: Winner) -> &str {
    match w {
        Winner::A => &c.label_a,
        Winner::B => &c.label_b,
        Winner::Tie => "tie",
    }
}

fn ratio_text(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_owned(), |r| format!("{r:.4}"))
}

pub fn render_comparison(c: &Comparison, format: CompareFormat) -> String {
    let mut out = String::new();
    match format {
        CompareFormat::Text => {
            writeln!(out, "A = {}  B = {}", c.label_a, c.label_b).unwrap();
            writeln!(
                out,
                "{:<10}  {:<20}  {:>12}  {:>12}  {:>13}  {:>8}  WINNER",
                "SCOPE", "METRIC", "A", "B", "DELTA", "RATIO"
            )
            .unwrap();
            for r in &c.rows {
                writeln!(
                    out,
                    "{:<10}  {:<20}  {:>12}  {:>12}  {:>13}  {:>8}  {}",
                    r.scope,
                    r.metric,
                    r.a,
                    r.b,
                    r.delta,
                    ratio_text(r.ratio),
                    winner_name(c, r.winner)
                )
                .unwrap();
            }
        }
        CompareFormat::Csv => {
            out.push_str("scope,metric,a,b,delta,ratio,winner\n");
            for r in &c.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.scope,
                    r.metric,
                    r.a,
                    r.b,
                    r.delta,
                    r.ratio.map_or_else(String::new, |r| format!("{r:.4}")),
                    winner_name(c, r.winner)
                )
                .unwrap();
            }
        }
    }
    out
}
