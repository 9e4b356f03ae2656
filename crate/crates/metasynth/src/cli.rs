//! Command-line entry point.
//!
//! Exit status: 0 on a complete answer, 2 when synthesis stalls (or the exact
//! oracle proves the instance infeasible), 1 on any input or usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use metasynth_core::oracles::{exact_partition, exact_tsp, Method, OracleError};
use metasynth_core::partition::Side;
use metasynth_core::tsp::{ValencyMode, DEFAULT_LAMBDA};
use serde_json::json;

use crate::bench::{self, BenchConfig, Task};
use crate::format::{self, Instance};
use crate::plot;
use crate::solve::{self, SolveOptions};
use crate::trace_io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "metasynth",
    version,
    about = "Step-by-step constructive solver for number partitioning and TSP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize an answer and print it as JSON.
    Solve(SolveArgs),
    /// Run the exact solver on an instance.
    Oracle(OracleArgs),
    /// Generate seeded instances and compare synthesis against baselines.
    Bench(BenchArgs),
    /// Write the per-step trace of a solve as JSON lines.
    Trace(TraceArgs),
    /// Render a bench report as an SVG efficiency chart.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ValencyArg {
    Greedy,
    Regret,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Partition,
    Tsp,
}

#[derive(Debug, Args)]
struct ValencyOpts {
    /// Valency used to rank TSP edges.
    #[arg(long, value_enum, default_value = "greedy")]
    valency: ValencyArg,
    /// Weight of the regret term (regret valency only).
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
}

impl ValencyOpts {
    fn mode(&self) -> Result<ValencyMode> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            bail!("--lambda must be a finite non-negative number");
        }
        Ok(match self.valency {
            ValencyArg::Greedy => ValencyMode::Greedy,
            ValencyArg::Regret => ValencyMode::Regret {
                lambda: self.lambda,
            },
        })
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    valency: ValencyOpts,
    /// Improve a partition with single-item moves and pair swaps.
    #[arg(long)]
    polish: bool,
    /// Also run the exact oracle and report efficiency.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "partition")]
    task: TaskArg,
    /// Comma-separated instance sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Instances per size.
    #[arg(long, default_value_t = 10)]
    count: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    valency: ValencyOpts,
    #[arg(long)]
    polish: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    valency: ValencyOpts,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read the written trace back and replay it on a fresh environment.
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Bench report (CSV or JSON lines).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<Instance> {
    Ok(format::load(path)?)
}

fn cmd_solve(a: SolveArgs) -> Result<i32> {
    let instance = load(&a.instance)?;
    let opts = SolveOptions {
        valency: a.valency.mode()?,
        polish: a.polish,
        oracle: a.oracle,
    };
    let outcome = solve::solve(&instance, &opts)?;
    write_json(a.out.as_deref(), &outcome.doc)?;
    Ok(if outcome.complete {
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Enumeration => "enumeration",
        Method::DynamicProgramming => "dynamic-programming",
        Method::MeetInMiddle => "meet-in-middle",
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<i32> {
    let instance = load(&a.instance)?;
    let (doc, code) = match &instance {
        Instance::Partition { inst, scale } => {
            let r = exact_partition(inst)?;
            let doc = json!({
                "type": "partition",
                "method": method_name(r.method),
                "optimum": r.optimum,
                "scale": scale,
                "heap1": r.witness.items_on(Side::Heap1).collect::<Vec<_>>(),
                "heap2": r.witness.items_on(Side::Heap2).collect::<Vec<_>>(),
            });
            (doc, EXIT_OK)
        }
        Instance::Tsp(inst) => match exact_tsp(inst) {
            Ok(r) => {
                let doc = json!({
                    "type": "tsp",
                    "method": method_name(r.method),
                    "optimum": r.optimum,
                    "tour": r.witness.order(),
                });
                (doc, EXIT_OK)
            }
            Err(OracleError::Infeasible) => {
                (json!({ "type": "tsp", "feasible": false }), EXIT_INCOMPLETE)
            }
            Err(e) => return Err(e.into()),
        },
    };
    write_json(a.out.as_deref(), &doc)?;
    Ok(code)
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    let cfg = BenchConfig {
        task: match a.task {
            TaskArg::Partition => Task::Partition,
            TaskArg::Tsp => Task::Tsp,
        },
        sizes: a.sizes,
        instances_per_size: a.count,
        seed: a.seed,
        valency: a.valency.mode()?,
        polish: a.polish,
    };
    let report = bench::run_benchmark(&cfg)?;
    let mut out = open_out(a.out.as_deref())?;
    match a.format {
        FormatArg::Csv => bench::write_csv(&mut out, &report.rows)?,
        FormatArg::Jsonl => bench::write_jsonl(&mut out, &report.rows)?,
    }
    out.flush()?;
    eprint!("{}", bench::format_aggregates(&report.aggregates));
    Ok(EXIT_OK)
}

fn cmd_trace(a: TraceArgs) -> Result<i32> {
    let instance = load(&a.instance)?;
    let opts = SolveOptions {
        valency: a.valency.mode()?,
        ..SolveOptions::default()
    };
    let outcome = solve::solve(&instance, &opts)?;
    let text = trace_io::trace_to_string(&outcome.trace);
    {
        let mut out = open_out(a.out.as_deref())?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
    }
    if a.verify {
        let written = match &a.out {
            Some(p) => std::fs::read_to_string(p)
                .with_context(|| format!("cannot re-read {}", p.display()))?,
            None => text,
        };
        let trace = trace_io::read_trace(written.as_bytes())?;
        let mut env = solve::fresh_environment(&instance);
        env.replay(&trace).context("replay failed")?;
        let same = env.points().eq(outcome.env.points())
            && env.aux_cells() == outcome.env.aux_cells()
            && env.marked().eq(outcome.env.marked())
            && env.step_counter() == outcome.env.step_counter();
        if !same {
            bail!("replayed trace ends in a different state");
        }
        eprintln!("verify: ok ({} steps)", trace.len());
    }
    Ok(if outcome.complete {
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    })
}

fn cmd_plot(a: PlotArgs) -> Result<i32> {
    let file =
        File::open(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let is_jsonl = a
        .input
        .extension()
        .is_some_and(|e| e == "jsonl" || e == "json");
    let rows = if is_jsonl {
        let text = io::read_to_string(BufReader::new(file))?;
        bench::read_jsonl(&text).context("malformed JSON-lines report")?
    } else {
        bench::read_csv(BufReader::new(file)).context("malformed CSV report")?
    };
    if rows.is_empty() {
        bail!("report has no rows");
    }
    let series = plot::efficiency_series(&rows);
    if series.is_empty() {
        bail!("report has no efficiency values (oracle out of bounds for every size)");
    }
    let title = a
        .title
        .unwrap_or_else(|| format!("{} efficiency", rows[0].task.name()));
    let mut out = open_out(a.out.as_deref())?;
    out.write_all(plot::render_svg(&series, &title).as_bytes())?;
    out.flush()?;
    Ok(EXIT_OK)
}
