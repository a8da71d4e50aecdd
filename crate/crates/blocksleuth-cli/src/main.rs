//! Command-line frontend: analyze traces, simulate models, enumerate
//! schedules, and self-check the bundled corpus.
//!
//! Exit codes: `detect` exits 0 with no findings, 1 with findings, 2 on
//! ingestion errors. `oracle` exits 0 when conclusively deadlock-free, 1
//! when a deadlock is reachable, 3 when the budget ran out, 2 on errors.
//! `corpus` exits 0 iff every case passes. `simulate` exits 0 whenever the
//! run itself succeeded, whatever its outcome.

use anyhow::{Context, Result};
use blocksleuth::model::ProgramModel;
use blocksleuth::oracle::{explore, OracleConfig, DEFAULT_ORACLE_DEPTH};
use blocksleuth::predict::DEFAULT_CYCLE_BOUND;
use blocksleuth::report::{render_json, render_text};
use blocksleuth::sim::{run, RunEnd, Schedule, DEFAULT_STEP_BOUND};
use blocksleuth::table::{load_semantic_table_from, SemanticTable, DEFAULT_VERSION};
use blocksleuth::trace_io;
use blocksleuth::{analyze_trace, AnalysisConfig, Gid, SelectMode, Trace};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "blocksleuth",
    version,
    about = "Detect and predict blocking bugs in goroutine synchronization traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a trace file and report blocking bugs.
    Detect(DetectArgs),
    /// Run a program model under a schedule and emit its trace.
    Simulate(SimulateArgs),
    /// Exhaustively enumerate schedules of a model, hunting for deadlocks.
    Oracle(OracleArgs),
    /// Run the bundled corpus of known bugs as a self-check.
    Corpus(CorpusArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectModeArg {
    /// Report a select as soon as any one candidate can wedge.
    Any,
    /// Report a select only when every candidate can wedge.
    All,
}

impl From<SelectModeArg> for SelectMode {
    fn from(m: SelectModeArg) -> SelectMode {
        match m {
            SelectModeArg::Any => SelectMode::Any,
            SelectModeArg::All => SelectMode::All,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Trace file; `-` reads standard input.
    trace: PathBuf,
    /// Report format.
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Longest mutex cycle searched for.
    #[arg(long, default_value_t = DEFAULT_CYCLE_BOUND)]
    cycle_bound: usize,
    /// How select candidates count in channel-mutex pairing.
    #[arg(long, value_enum, default_value = "any")]
    select_mode: SelectModeArg,
    /// Semantic-table version (defaults to the trace header, then the
    /// bundled default).
    #[arg(long)]
    semantic_table: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Program model file.
    model: PathBuf,
    /// Seed for a randomized schedule.
    #[arg(long, conflicts_with = "script")]
    seed: Option<u64>,
    /// Script file with one goroutine id per pick (whitespace separated).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Stop after this many scheduler steps.
    #[arg(long, default_value_t = DEFAULT_STEP_BOUND)]
    step_bound: u64,
    /// Write the trace here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Program model file.
    model: PathBuf,
    /// Longest schedule explored.
    #[arg(long, default_value_t = DEFAULT_ORACLE_DEPTH)]
    depth: usize,
    /// Distinct states explored before giving up.
    #[arg(long, default_value_t = 1 << 20)]
    max_states: usize,
    /// Write a reachable deadlock's schedule here (replayable with
    /// `simulate --script`).
    #[arg(long)]
    witness_out: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// Print failures only.
    #[arg(long)]
    quiet: bool,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Corpus(args) => cmd_corpus(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

/// Table directory override, taken from the environment.
fn table_dir() -> Option<PathBuf> {
    std::env::var_os("BLOCKSLEUTH_TABLE_DIR").map(PathBuf::from)
}

fn load_table(version: &str) -> Result<SemanticTable> {
    load_semantic_table_from(table_dir().as_deref(), version)
        .with_context(|| format!("loading semantic table `{version}`"))
}

fn read_trace(path: &Path, version_override: Option<&str>) -> Result<Trace> {
    let text = if path == Path::new("-") {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading trace from stdin")?;
        buf
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    // The header may name the runtime version the trace was recorded
    // against; an explicit flag wins, the bundled default backstops.
    let header_version = text
        .lines()
        .next()
        .and_then(|l| l.split_whitespace().find_map(|w| w.strip_prefix("go=")))
        .map(str::to_string);
    let version = version_override
        .map(str::to_string)
        .or(header_version)
        .unwrap_or_else(|| DEFAULT_VERSION.to_string());
    let table = load_table(&version)?;
    let parsed = trace_io::parse_trace(BufReader::new(text.as_bytes()), &table)
        .with_context(|| format!("parsing {}", path.display()))?;
    for warning in &parsed.warnings {
        eprintln!("warning: line {}: {}", warning.line_no, warning.message);
    }
    Ok(parsed.trace)
}

fn cmd_detect(args: DetectArgs) -> Result<i32> {
    let trace = read_trace(&args.trace, args.semantic_table.as_deref())?;
    let config = AnalysisConfig {
        cycle_bound: args.cycle_bound,
        select_mode: args.select_mode.into(),
    };
    let report = analyze_trace(&trace, &config).context("analyzing trace")?;
    let rendered = match args.format {
        FormatArg::Text => render_text(&report, &trace),
        FormatArg::Json => render_json(&report, &trace),
    }
    .context("rendering report")?;
    print!("{rendered}");
    Ok(if report.findings.is_empty() { 0 } else { 1 })
}

fn read_model(path: &Path) -> Result<ProgramModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ProgramModel::parse(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn parse_script(path: &Path) -> Result<Vec<Gid>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading script {}", path.display()))?;
    let mut picks = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        for word in line.split_whitespace() {
            let id: u64 = word.parse().with_context(|| {
                format!("{}:{}: bad goroutine id `{word}`", path.display(), no + 1)
            })?;
            picks.push(Gid(id));
        }
    }
    Ok(picks)
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32> {
    let model = read_model(&args.model)?;
    let schedule = if let Some(path) = &args.script {
        Schedule::Script(parse_script(path)?)
    } else if let Some(seed) = args.seed {
        Schedule::SeededRandom(seed)
    } else {
        Schedule::RoundRobin
    };
    let out = run(&model, &schedule, args.step_bound).context("simulating")?;

    let text = trace_io::trace_to_string(&out.trace);
    match &args.out {
        Some(path) => fs::write(path, &text)
            .with_context(|| format!("writing trace to {}", path.display()))?,
        None => print!("{text}"),
    }

    // Ground-truth summary on stderr, leaving stdout to the trace.
    let gt = &out.ground_truth;
    let stderr = std::io::stderr();
    let mut err = stderr.lock();
    match out.stats.end {
        RunEnd::AllDone => writeln!(
            err,
            "completed: all {} goroutines finished in {} steps",
            gt.completed.len(),
            out.stats.steps
        )?,
        RunEnd::GlobalBlock => writeln!(
            err,
            "globally blocked: {} goroutine(s) stuck after {} steps",
            gt.blocked.len(),
            out.stats.steps
        )?,
        RunEnd::StepBound => writeln!(
            err,
            "step bound reached after {} steps ({} goroutine(s) blocked)",
            out.stats.steps,
            gt.blocked.len()
        )?,
    }
    for (gid, info) in &gt.blocked {
        writeln!(
            err,
            "blocked: {} ({}) {} (op {})",
            model.goroutine_name(*gid),
            gid,
            info.reason,
            info.op_index
        )?;
    }
    for fault in &gt.faults {
        writeln!(
            err,
            "fault: {} ({}) {} (op {})",
            model.goroutine_name(fault.gid),
            fault.gid,
            fault.kind,
            fault.op_index
        )?;
    }
    for gid in &gt.leaked {
        writeln!(err, "leaked: {} ({})", model.goroutine_name(*gid), gid)?;
    }
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let model = read_model(&args.model)?;
    let config = OracleConfig {
        max_states: args.max_states,
        max_depth: args.depth,
    };
    let verdict = explore(&model, &config).context("exploring schedules")?;
    if verdict.deadlock_reachable {
        let witness = verdict.witness.as_deref().unwrap_or_default();
        println!(
            "deadlock reachable: witness of {} pick(s), {} state(s) explored",
            witness.len(),
            verdict.states_explored
        );
        if let Some(path) = &args.witness_out {
            let mut text = String::from("# schedule reaching the deadlock; one pick per line\n");
            for gid in witness {
                text.push_str(&format!("{}\n", gid.0));
            }
            fs::write(path, text)
                .with_context(|| format!("writing witness to {}", path.display()))?;
        }
        return Ok(1);
    }
    if verdict.complete {
        println!(
            "no deadlock: {} state(s) fully explored, {} clean end(s), {} crash(es)",
            verdict.states_explored, verdict.clean_terminals, verdict.crashed_states
        );
        Ok(0)
    } else {
        println!(
            "inconclusive: budget exhausted after {} state(s) (depth {}, max-states {})",
            verdict.states_explored, args.depth, args.max_states
        );
        Ok(3)
    }
}

fn cmd_corpus(args: CorpusArgs) -> Result<i32> {
    let outcomes = blocksleuth::corpus::run_corpus();
    let mut failed = 0usize;
    for outcome in &outcomes {
        if outcome.passed() {
            if !args.quiet {
                println!("PASS {} [{}]", outcome.name, outcome.category);
            }
        } else {
            failed += 1;
            println!("FAIL {} [{}]", outcome.name, outcome.category);
            for failure in &outcome.failures {
                println!("  - {failure}");
            }
        }
    }
    println!(
        "{} case(s), {} passed, {} failed",
        outcomes.len(),
        outcomes.len() - failed,
        failed
    );
    Ok(if failed == 0 { 0 } else { 1 })
}
