use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use metacache::report::{
    compare_runs, render_comparison, render_report, CompareFormat, Format, Report,
};
use metacache::vfs::SimConfig;
use metacache::workload::{generate, replay, OpMix, Trace, WorkloadSpec};
use metacache::Result;

#[derive(Parser)]
#[command(name = "metacache", version, about = "LSM metadata cache simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a workload trace as JSON lines.
    Generate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a trace and print a cost report.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Store directory; must be empty. A temporary directory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Compare two JSON reports produced from the same trace.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = CmpFormat::Text)]
        format: CmpFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a trace, replay it with and without the metacache, and compare.
    Demo {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1024)]
        icache_capacity: usize,
        #[arg(long, value_enum, default_value_t = CmpFormat::Text)]
        format: CmpFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parent for the two store directories; must not contain them yet.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CmpFormat {
    Text,
    Csv,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 2000)]
    num_files: u64,
    #[arg(long, default_value_t = 4)]
    dir_fanout: u64,
    #[arg(long, default_value_t = 3)]
    tree_depth: u64,
    #[arg(long, default_value_t = 10_000)]
    op_count: u64,
    #[arg(long, default_value_t = 0.55)]
    stat: f64,
    #[arg(long, default_value_t = 0.21)]
    open_read: f64,
    #[arg(long, default_value_t = 0.18)]
    create: f64,
    #[arg(long, default_value_t = 0.06)]
    unlink: f64,
    #[arg(long, default_value_t = 128)]
    file_size_min: u64,
    #[arg(long, default_value_t = 8192)]
    file_size_max: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl SpecArgs {
    fn spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            num_files: self.num_files,
            dir_fanout: self.dir_fanout,
            tree_depth: self.tree_depth,
            op_count: self.op_count,
            op_mix: OpMix {
                stat: self.stat,
                open_read: self.open_read,
                create: self.create,
                unlink: self.unlink,
            },
            file_size_min: self.file_size_min,
            file_size_max: self.file_size_max,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1024)]
    icache_capacity: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    metacache_enabled: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    warm_on_boot: bool,
    #[arg(long, default_value_t = 4096)]
    inline_threshold: usize,
    #[arg(long, default_value_t = 4096)]
    block_size: usize,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            icache_capacity: self.icache_capacity,
            metacache_enabled: self.metacache_enabled,
            warm_on_boot: self.warm_on_boot,
            inline_threshold: self.inline_threshold,
            block_size: self.block_size,
            ..SimConfig::default()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn replay_in(trace: &Trace, config: SimConfig, dir: Option<&Path>) -> Result<Report> {
    match dir {
        Some(d) => replay(trace, config, d),
        None => {
            let tmp = tempfile::tempdir()?;
            replay(trace, config, tmp.path().join("store"))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out } => {
            let trace = generate(&spec.spec())?;
            emit(out.as_deref(), &trace.to_jsonl())
        }
        Command::Replay {
            trace,
            sim,
            format,
            out,
            data_dir,
        } => {
            let trace = Trace::load(&trace)?;
            let report = replay_in(&trace, sim.config(), data_dir.as_deref())?;
            let format = match format {
                ReportFormat::Table => Format::Table,
                ReportFormat::Csv => Format::Csv,
                ReportFormat::Json => Format::Json,
            };
            emit(out.as_deref(), &render_report(&report, format))
        }
        Command::Compare { a, b, format, out } => {
            let cmp = compare_runs(&Report::load(a)?, &Report::load(b)?)?;
            emit(out.as_deref(), &render_comparison(&cmp, cmp_format(format)))
        }
        Command::Demo {
            spec,
            icache_capacity,
            format,
            out,
            data_dir,
        } => {
            let trace = generate(&spec.spec())?;
            let configs = [
                (
                    "baseline",
                    SimConfig {
                        icache_capacity,
                        ..SimConfig::baseline()
                    },
                ),
                (
                    "metacache",
                    SimConfig {
                        icache_capacity,
                        ..SimConfig::metacache_warm()
                    },
                ),
            ];
            let mut text = String::new();
            let mut reports = Vec::new();
            for (name, config) in configs {
                let dir = data_dir.as_ref().map(|d| d.join(name));
                let report = replay_in(&trace, config, dir.as_deref())?;
                let fmt = match format {
                    CmpFormat::Text => Format::Table,
                    CmpFormat::Csv => Format::Csv,
                };
                text.push_str(&format!("== {name} ==\n"));
                text.push_str(&render_report(&report, fmt));
                text.push('\n');
                reports.push(report);
            }
            let cmp = compare_runs(&reports[0], &reports[1])?;
            text.push_str("== comparison ==\n");
            text.push_str(&render_comparison(&cmp, cmp_format(format)));
            emit(out.as_deref(), &text)
        }
    }
}

fn cmp_format(f: CmpFormat) -> CompareFormat {
    match f {
        CmpFormat::Text => CompareFormat::Text,
        CmpFormat::Csv => CompareFormat::Csv,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("metacache: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
