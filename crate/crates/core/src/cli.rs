//! The `syncp` command-line surface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};

use crate::baselines::{hb_run, shb_run};
use crate::closure;
use crate::engine;
use crate::error::{Error, Result};
use crate::filter::filter_ordered_variables;
use crate::gen::{gen_equality, gen_random, gen_rfposet, GenConfig, PosetGenConfig};
use crate::io::{self, Format};
use crate::oracle::{self, Limits, Mode};
use crate::report::{RaceReport, Summary};
use crate::rfposet::{build_race_instance, build_reverse_instance, find_witness, ReverseInstance, MAX_POSET_EVENTS};
use crate::trace::Trace;

#[derive(Parser, Debug)]
#[command(name = "syncp", version, about = "Sync-preserving data race prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Report races in one or more traces.
    Detect(DetectArgs),
    /// Generate traces or rf-posets.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Exhaustive ground-truth queries on small traces.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Reductions from rf-poset realizability.
    #[command(subcommand)]
    Reduce(ReduceCommand),
    /// Check trace well-formedness.
    Validate(InputArg),
    /// Print trace dimensions.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Syncp,
    Shb,
    Hb,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Syncp => "syncp",
            Algo::Shb => "shb",
            Algo::Hb => "hb",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long, value_enum, default_value = "syncp")]
    pub algo: Algo,
    /// Trace file; repeat to analyze several traces concurrently.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Analyze every variable instead of dropping fully ordered ones.
    #[arg(long)]
    pub no_filter: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InputArg {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// A seeded random trace.
    Random(RandomArgs),
    /// Two-thread trace encoding two bit strings under complementary lock sets.
    Equality(EqualityArgs),
    /// A seeded random rf-poset (JSON).
    Poset(PosetArgs),
}

#[derive(Args, Debug)]
pub struct RandomArgs {
    #[arg(long, default_value_t = 12)]
    pub events: usize,
    #[arg(long, default_value_t = 3)]
    pub threads: usize,
    #[arg(long, default_value_t = 2)]
    pub locks: usize,
    #[arg(long, default_value_t = 2)]
    pub vars: usize,
    #[arg(long, default_value_t = 0.35)]
    pub p_read: f64,
    #[arg(long, default_value_t = 0.35)]
    pub p_write: f64,
    #[arg(long, default_value_t = 0.3)]
    pub p_sync: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub fork_join: bool,
    #[arg(long)]
    pub locations: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EqualityArgs {
    #[arg(long)]
    pub u: String,
    #[arg(long)]
    pub v: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PosetArgs {
    #[arg(long, default_value_t = 8)]
    pub max_events: usize,
    #[arg(long, default_value_t = 3)]
    pub max_threads: usize,
    #[arg(long, default_value_t = 0.3)]
    pub edge_prob: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    /// Closure-based sync-preserving check.
    Syncp,
    /// Search over all correct reorderings.
    General,
    /// Search over sync-preserving correct reorderings.
    SyncpEnum,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Decide one pair; prints `true` or `false`.
    Pair(OraclePairArgs),
    /// List every racy event with its earliest partner.
    All(OracleAllArgs),
}

#[derive(Args, Debug)]
pub struct OraclePairArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub e1: usize,
    #[arg(long)]
    pub e2: usize,
    #[arg(long, value_enum, default_value = "general")]
    pub mode: OracleMode,
    #[arg(long, default_value_t = oracle::DEFAULT_MAX_EVENTS)]
    pub max_events: usize,
}

#[derive(Args, Debug)]
pub struct OracleAllArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "general")]
    pub mode: OracleMode,
    #[arg(long, default_value_t = oracle::DEFAULT_MAX_EVENTS)]
    pub max_events: usize,
}

#[derive(Subcommand, Debug)]
pub enum ReduceCommand {
    /// rf-poset JSON to a reverse-realizability instance JSON.
    BuildReverse(ReduceArgs),
    /// Reverse instance JSON to a trace whose target pair races iff the instance is reverse realizable.
    ToTrace(ToTraceArgs),
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ToTraceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event cap for the witness search when the instance carries none.
    #[arg(long, default_value_t = MAX_POSET_EVENTS)]
    pub max_events: usize,
}

/// Runs the detector chosen by `algo`, filtering unless `no_filter`; indices refer to `trace`.
pub fn detect(trace: &Trace, algo: Algo, no_filter: bool) -> Result<(Vec<RaceReport>, Summary)> {
    let start = Instant::now();
    let run = |t: &Trace| match algo {
        Algo::Syncp => engine::run(t),
        Algo::Shb => shb_run(t),
        Algo::Hb => hb_run(t),
    };
    let reports = if no_filter {
        run(trace)
    } else {
        let f = filter_ordered_variables(trace)?;
        debug!(
            "filter dropped {} variables ({} events)",
            f.dropped.len(),
            f.dropped_events.values().sum::<usize>()
        );
        let mut r = run(&f.trace);
        f.remap(&mut r);
        r
    };
    let mut summary = crate::report::summarize(&reports);
    summary.wall_time = start.elapsed();
    Ok((reports, summary))
}

fn write_output(out: &Option<PathBuf>, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn read_string(p: &Path) -> Result<String> {
    Ok(fs::read_to_string(p)?)
}

fn cmd_detect(a: &DetectArgs, stdout: &mut dyn Write) -> Result<i32> {
    let results: Vec<Result<(Trace, Vec<RaceReport>, Summary)>> = std::thread::scope(|s| {
        let handles: Vec<_> = a
            .input
            .iter()
            .map(|p| {
                s.spawn(move || {
                    let trace = io::read_trace_file(p)?;
                    let (r, s) = detect(&trace, a.algo, a.no_filter)?;
                    info!(
                        "{}: {} events, {} racy events in {:?}",
                        p.display(),
                        trace.len(),
                        s.racy_events,
                        s.wall_time
                    );
                    Ok((trace, r, s))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("detector thread")).collect()
    });
    let mut buf = Vec::new();
    let mut racy = false;
    let multi = a.input.len() > 1;
    for (p, res) in a.input.iter().zip(results) {
        let (trace, reports, _) = res.map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", p.display())),
            other => other,
        })?;
        racy |= !reports.is_empty();
        if multi && a.format == FormatArg::Text {
            writeln!(buf, "# input {}", p.display())?;
        }
        io::emit_report(&trace, a.algo.name(), &reports, a.format.into(), &mut buf)?;
    }
    write_output(&a.out, &buf, stdout)?;
    Ok(i32::from(racy))
}

fn cmd_gen(g: &GenCommand, stdout: &mut dyn Write) -> Result<i32> {
    match g {
        GenCommand::Random(a) => {
            let cfg = GenConfig {
                events: a.events,
                threads: a.threads,
                locks: a.locks,
                vars: a.vars,
                p_read: a.p_read,
                p_write: a.p_write,
                p_sync: a.p_sync,
                seed: a.seed,
                fork_join: a.fork_join,
                locations: a.locations,
            };
            let t = gen_random(&cfg)?;
            write_output(&a.out, io::trace_to_string(&t).as_bytes(), stdout)?;
        }
        GenCommand::Equality(a) => {
            let t = gen_equality(&a.u, &a.v)?;
            write_output(&a.out, io::trace_to_string(&t).as_bytes(), stdout)?;
        }
        GenCommand::Poset(a) => {
            let p = gen_rfposet(&PosetGenConfig {
                max_events: a.max_events,
                max_threads: a.max_threads,
                edge_prob: a.edge_prob,
                seed: a.seed,
            })?;
            let mut s = io::emit_rfposet(&p);
            s.push('\n');
            write_output(&a.out, s.as_bytes(), stdout)?;
        }
    }
    Ok(0)
}

fn oracle_pair(trace: &Trace, e1: usize, e2: usize, mode: OracleMode, max_events: usize) -> Result<bool> {
    if e1 == 0 || e2 == 0 || e1 > trace.len() || e2 > trace.len() {
        return Err(Error::Query(format!("events must lie in 1..={}", trace.len())));
    }
    let (e1, e2) = (e1.min(e2), e1.max(e2));
    if !trace.conflicting(e1, e2) {
        return Err(Error::Query(format!("events {e1} and {e2} do not conflict")));
    }
    match mode {
        OracleMode::Syncp => closure::is_syncp_race_pair(trace, e1, e2),
        OracleMode::General => oracle::is_race_bf(trace, e1, e2, Mode::General, Limits::events(max_events)),
        OracleMode::SyncpEnum => {
            oracle::is_race_bf(trace, e1, e2, Mode::SyncPreserving, Limits::events(max_events))
        }
    }
}

fn cmd_oracle(o: &OracleCommand, stdout: &mut dyn Write) -> Result<i32> {
    match o {
        OracleCommand::Pair(a) => {
            let trace = io::read_trace_file(&a.input)?;
            let ans = oracle_pair(&trace, a.e1, a.e2, a.mode, a.max_events)?;
            writeln!(stdout, "{ans}")?;
        }
        OracleCommand::All(a) => {
            let trace = io::read_trace_file(&a.input)?;
            let pairs = match a.mode {
                OracleMode::Syncp => closure::racy_events(&trace),
                OracleMode::General => oracle::racy_events_bf(&trace, Mode::General, Limits::events(a.max_events))?,
                OracleMode::SyncpEnum => {
                    oracle::racy_events_bf(&trace, Mode::SyncPreserving, Limits::events(a.max_events))?
                }
            };
            for (e1, e2) in pairs {
                writeln!(stdout, "{e1} {e2}")?;
            }
        }
    }
    Ok(0)
}

fn cmd_reduce(r: &ReduceCommand, stdout: &mut dyn Write) -> Result<i32> {
    match r {
        ReduceCommand::BuildReverse(a) => {
            let p = io::parse_rfposet(&read_string(&a.input)?)?;
            let inst = build_reverse_instance(&p)?;
            let mut s = io::emit_reverse_instance(&inst);
            s.push('\n');
            write_output(&a.out, s.as_bytes(), stdout)?;
        }
        ReduceCommand::ToTrace(a) => {
            let (poset, witness) = io::parse_reverse_instance(&read_string(&a.input)?)?;
            let witness = match witness {
                Some(w) => w,
                None => find_witness(&poset, a.max_events)?
                    .ok_or_else(|| Error::Poset("instance has no realization with w̄' before w̄".into()))?,
            };
            let (trace, (e1, e2)) = build_race_instance(&ReverseInstance { poset, witness })?;
            let mut s = format!("# target e{e1} e{e2}\n");
            s.push_str(&io::trace_to_string(&trace));
            write_output(&a.out, s.as_bytes(), stdout)?;
        }
    }
    Ok(0)
}

fn cmd_validate(a: &InputArg, stdout: &mut dyn Write) -> Result<i32> {
    let f = fs::File::open(&a.input)?;
    let b = io::parse_events(std::io::BufReader::new(f))?;
    let v = b.violations();
    if v.is_empty() {
        writeln!(stdout, "ok: {} events", b.len())?;
        Ok(0)
    } else {
        for x in &v {
            writeln!(stdout, "{x}")?;
        }
        Ok(1)
    }
}

fn cmd_stats(a: &StatsArgs, stdout: &mut dyn Write) -> Result<i32> {
    let trace = io::read_trace_file(&a.input)?;
    let d = trace.dims();
    writeln!(
        stdout,
        "N={} T={} L={} V={} A={}",
        trace.len(),
        d.threads,
        d.locks,
        d.vars,
        trace.acquire_count()
    )?;
    let f = filter_ordered_variables(&trace)?;
    let names: Vec<String> = f
        .dropped
        .iter()
        .map(|&x| format!("{}({})", trace.var_name(x), f.dropped_events[&x]))
        .collect();
    writeln!(stdout, "filtered_vars={} [{}]", f.dropped.len(), names.join(" "))?;
    Ok(0)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a, stdout),
        Command::Gen(g) => cmd_gen(g, stdout),
        Command::Oracle(o) => cmd_oracle(o, stdout),
        Command::Reduce(r) => cmd_reduce(r, stdout),
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::Stats(a) => cmd_stats(a, stdout),
    }
}

/// Parses `args` (including the program name) and runs; returns the process exit code.
pub fn main_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

/// Initializes logging from `RACE_LOG` (default `error`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("RACE_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
