//! The `eal` command line.
//!
//! Exit codes: 0 for success or a positive verdict, 1 for a negative verdict
//! (ill-formed, ill-typed, stuck on budget, oracle failure), 2 for usage,
//! syntax and I/O errors.

use std::io::{Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::complexity::{annotate, certificate};
use crate::depth::{check_depth, infer_region_depths};
use crate::encodings::{lookup, stdlib};
use crate::eval::{run, MachineState, RunError, RunOutcome, SchedulerMode, SchedulerPolicy};
use crate::reader::{parse, print_term, print_type, SourceUnit};
use crate::syntax::{revised_depth, RegionDepthContext};
use crate::testkit::{fuzz, GenConfig, StoreSeeding};
use crate::typing::check;

#[derive(Parser, Debug)]
#[command(
    name = "eal",
    version,
    about = "Depth checking, typing and evaluation of modal λ-programs with regions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide well-formedness in the depth system.
    Check {
        #[command(flatten)]
        input: Input,
        /// Print the derivation.
        #[arg(long)]
        derivation: bool,
        /// Depth of the judgement.
        #[arg(long, default_value_t = 0)]
        depth: u32,
    },
    /// Type-check against the declared region types.
    Type {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0)]
        depth: u32,
    },
    /// Evaluate under a scheduling policy.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        schedule: Schedule,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Print the trace as JSON lines.
        #[arg(long)]
        trace: bool,
        /// Add the measure and tower to each trace line.
        #[arg(long)]
        trace_measure: bool,
        /// Which read rule to take when both apply.
        #[arg(long, value_enum, default_value_t = CopyPreference::Copy)]
        copy_preference: CopyPreference,
        /// In exhaustive mode, interleave local steps too.
        #[arg(long)]
        full_interleaving: bool,
    },
    /// Print the elementary bound certificate.
    Bound {
        #[command(flatten)]
        input: Input,
    },
    /// List the enabled redex choices of the initial state.
    Enumerate {
        #[command(flatten)]
        input: Input,
    },
    /// The library of encodings.
    Stdlib {
        #[command(subcommand)]
        action: StdlibAction,
    },
    /// Generate programs and check the oracles over their reductions.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        max_depth: u32,
        #[arg(long, default_value_t = 40)]
        max_size: usize,
        #[arg(long, default_value_t = 2)]
        regions: usize,
        /// Generate typed programs and check subject reduction and progress.
        #[arg(long)]
        typed: bool,
        /// Steps per run, or states per exhaustive search.
        #[arg(long, default_value_t = 5000)]
        budget: usize,
    },
}

#[derive(Args, Debug)]
pub struct Input {
    /// Source file, or `-` for standard input.
    pub path: String,
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
#[group(multiple = false)]
pub struct Schedule {
    /// Seeded random scheduling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explore every interleaving.
    #[arg(long)]
    pub exhaustive: bool,
    /// First enabled choice (the default).
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CopyPreference {
    Copy,
    Consume,
}

#[derive(Subcommand, Debug)]
pub enum StdlibAction {
    /// Names and types of every entry.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Source of one entry.
    Show { name: String },
    /// Type-check every entry at its declared type.
    Check,
}

/// Outcome of a subcommand.
enum Exit {
    Ok,
    Negative,
    Usage(String),
}

fn read_input(path: &str) -> Result<String, String> {
    let mut s = String::new();
    if path == "-" {
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| format!("standard input: {e}"))?;
    } else {
        s = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    }
    Ok(s)
}

fn load(input: &Input) -> Result<SourceUnit, String> {
    parse(&read_input(&input.path)?).map_err(|e| format!("{}: {e}", input.path))
}

/// Declared region depths, or inferred ones when some region declares none.
fn depths(unit: &SourceUnit) -> Result<RegionDepthContext, String> {
    if let Some(r) = unit.region_depths() {
        return Ok(r);
    }
    infer_region_depths(&unit.body).map_err(|e| format!("cannot infer region depths: {e}"))
}

struct Out<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($o:expr, $($arg:tt)*) => {{
        let _ = writeln!($o.out, $($arg)*);
    }};
}

macro_rules! warn {
    ($o:expr, $($arg:tt)*) => {{
        let _ = writeln!($o.err, $($arg)*);
    }};
}

fn cmd_check(o: &mut Out, input: &Input, derivation: bool, delta: u32) -> Result<Exit, String> {
    let unit = load(input)?;
    let r = match depths(&unit) {
        Ok(r) => r,
        Err(e) => {
            if input.json {
                say!(o, "{}", json!({ "wellFormed": false, "error": e }));
            } else {
                say!(o, "ill-formed: {e}");
            }
            return Ok(Exit::Negative);
        }
    };
    match check_depth(&unit.body, &r, &unit.var_depths(), delta) {
        Ok(d) => {
            let depth = revised_depth(&unit.body, &r).map_err(|e| e.to_string())?;
            if input.json {
                let regions: std::collections::BTreeMap<String, u32> =
                    r.iter().map(|(k, v)| (k.to_string(), *v)).collect();
                let mut v = json!({ "wellFormed": true, "depth": depth, "regions": regions });
                if derivation {
                    v["derivation"] = serde_json::to_value(&d).expect("derivations serialize");
                }
                say!(o, "{v}");
            } else {
                say!(o, "well-formed at depth {depth}");
                if derivation {
                    print_derivation(o, &d, 0);
                }
            }
            Ok(Exit::Ok)
        }
        Err(e) => {
            if input.json {
                say!(o, "{}", e.to_json());
            } else {
                say!(o, "ill-formed: {e}");
            }
            Ok(Exit::Negative)
        }
    }
}

fn print_derivation(o: &mut Out, d: &crate::depth::DepthDerivation, indent: usize) {
    let binds = match &d.binds {
        Some((x, Some(k))) => format!("  [{x} : {k}]"),
        Some((x, None)) => format!("  [{x} : address]"),
        None => String::new(),
    };
    say!(
        o,
        "{}{:?} ⊢^{} at {}{binds}",
        "  ".repeat(indent),
        d.rule,
        d.delta,
        d.path
    );
    for p in &d.premises {
        print_derivation(o, p, indent + 1);
    }
}

fn cmd_type(o: &mut Out, input: &Input, delta: u32) -> Result<Exit, String> {
    let unit = load(input)?;
    let r = unit
        .region_types()
        .ok_or("every region needs a depth and a content type")?;
    let gamma = unit.var_types().ok_or("every variable needs a type")?;
    match check(&unit.body, &r, &gamma, delta, None) {
        Ok(a) => {
            if input.json {
                say!(o, "{}", json!({ "type": print_type(&a) }));
            } else {
                say!(o, "{}", print_type(&a));
            }
            Ok(Exit::Ok)
        }
        Err(e) => {
            if input.json {
                say!(o, "{}", e.to_json());
            } else {
                say!(o, "TypeError: {e}");
            }
            Ok(Exit::Negative)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    o: &mut Out,
    input: &Input,
    schedule: &Schedule,
    max_steps: usize,
    trace: bool,
    trace_measure: bool,
    copy: CopyPreference,
    full_interleaving: bool,
) -> Result<Exit, String> {
    let unit = load(input)?;
    let s = MachineState::new(&unit.body).map_err(|e| e.to_string())?;
    let mode = match (schedule.seed, schedule.exhaustive) {
        (Some(seed), _) => SchedulerMode::Seeded(seed),
        (None, true) => SchedulerMode::Exhaustive,
        (None, false) => SchedulerMode::Deterministic,
    };
    let policy = SchedulerPolicy {
        mode,
        prefer_copy: copy == CopyPreference::Copy,
        full_interleaving,
    };
    let r = if trace_measure { Some(depths(&unit)?) } else { None };
    let emit_trace = |o: &mut Out, t: &mut crate::eval::Trace| -> Result<(), String> {
        if let Some(r) = &r {
            annotate(t, r).map_err(|e| e.to_string())?;
        }
        let _ = o.out.write_all(t.to_jsonl().as_bytes());
        Ok(())
    };
    match run(&s, &policy, max_steps) {
        Ok(RunOutcome::Trace(mut t)) => {
            if trace || trace_measure {
                emit_trace(o, &mut t)?;
            } else if input.json {
                say!(o, "{}", json!({ "steps": t.len(), "final": t.last.text() }));
            } else {
                say!(o, "{}", t.last.text());
                warn!(o, "{} steps", t.len());
            }
            Ok(Exit::Ok)
        }
        Ok(RunOutcome::Tree(e)) => {
            let mut finals: Vec<String> = e.finals.iter().map(MachineState::text).collect();
            finals.sort();
            finals.dedup();
            if input.json {
                say!(
                    o,
                    "{}",
                    json!({ "finals": finals, "statesVisited": e.states_visited, "longest": e.longest })
                );
            } else {
                for f in &finals {
                    say!(o, "{f}");
                }
                warn!(
                    o,
                    "{} final states, {} states visited, longest reduction {}",
                    finals.len(),
                    e.states_visited,
                    e.longest
                );
            }
            Ok(Exit::Ok)
        }
        Err(RunError::BudgetExceeded { budget, partial }) => {
            if let (true, Some(mut t)) = (trace || trace_measure, *partial) {
                emit_trace(o, &mut t)?;
            }
            warn!(o, "step budget of {budget} exhausted");
            Ok(Exit::Negative)
        }
        Err(RunError::Divergent) => {
            warn!(o, "a reduction revisits a state");
            Ok(Exit::Negative)
        }
    }
}

fn cmd_bound(o: &mut Out, input: &Input) -> Result<Exit, String> {
    let unit = load(input)?;
    let r = depths(&unit)?;
    match certificate(&unit.body, &r) {
        Ok(c) => {
            if input.json {
                say!(o, "{}", serde_json::to_string(&c).expect("certificates serialize"));
            } else {
                say!(o, "alpha = {}", c.alpha);
                say!(o, "mu = {}", c.mu);
                say!(o, "bound = {}", c.tower);
            }
            Ok(Exit::Ok)
        }
        Err(e) => {
            say!(o, "no certificate: {e}");
            Ok(Exit::Negative)
        }
    }
}

fn cmd_enumerate(o: &mut Out, input: &Input) -> Result<Exit, String> {
    let unit = load(input)?;
    let s = MachineState::new(&unit.body).map_err(|e| e.to_string())?;
    let choices = s.enumerate_redexes();
    if input.json {
        say!(o, "{}", serde_json::to_string(&choices).expect("choices serialize"));
    } else {
        for c in &choices {
            let entry = c.entry.map(|e| format!(" entry {e}")).unwrap_or_default();
            say!(o, "thread {} at {}: {:?}{entry}", c.thread, c.path, c.rule);
        }
    }
    Ok(Exit::Ok)
}

fn cmd_stdlib(o: &mut Out, action: &StdlibAction) -> Result<Exit, String> {
    match action {
        StdlibAction::List { json } => {
            if *json {
                let v: Vec<_> = stdlib()
                    .iter()
                    .map(|e| json!({ "name": e.name, "type": e.type_text, "arity": e.arity, "description": e.description }))
                    .collect();
                say!(o, "{}", serde_json::Value::Array(v));
            } else {
                for e in stdlib() {
                    say!(o, "{:<16} : {:<40} {}", e.name, e.type_text, e.description);
                }
            }
            Ok(Exit::Ok)
        }
        StdlibAction::Show { name } => match crate::encodings::entry(name) {
            Some(e) => {
                say!(o, "{}", e.source.trim_end());
                Ok(Exit::Ok)
            }
            None => match lookup(name) {
                Some(t) => {
                    say!(o, "{}", print_term(&t));
                    Ok(Exit::Ok)
                }
                None => Err(format!("no library entry `{name}`")),
            },
        },
        StdlibAction::Check => {
            let mut ok = true;
            for e in stdlib() {
                let got = check(
                    &e.term(),
                    &e.region_types(),
                    &Default::default(),
                    e.depth,
                    Some(&e.declared_type()),
                );
                match got {
                    Ok(_) => say!(o, "ok    {}", e.name),
                    Err(err) => {
                        ok = false;
                        say!(o, "FAIL  {}: {err}", e.name);
                    }
                }
            }
            Ok(if ok { Exit::Ok } else { Exit::Negative })
        }
    }
}

fn cmd_fuzz(o: &mut Out, cfg: GenConfig, count: usize, budget: usize) -> Result<Exit, String> {
    let policies = [SchedulerPolicy::seeded(cfg.seed), SchedulerPolicy::exhaustive()];
    let summary = fuzz(&cfg, count, &policies, budget);
    say!(o, "{}", serde_json::to_string(&summary).expect("summaries serialize"));
    Ok(if summary.passed() { Exit::Ok } else { Exit::Negative })
}

/// Runs one invocation, writing to the given streams; returns the exit code.
pub fn run_cli(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut o = Out { out, err };
    let result = match &cli.command {
        Command::Check {
            input,
            derivation,
            depth,
        } => cmd_check(&mut o, input, *derivation, *depth),
        Command::Type { input, depth } => cmd_type(&mut o, input, *depth),
        Command::Run {
            input,
            schedule,
            max_steps,
            trace,
            trace_measure,
            copy_preference,
            full_interleaving,
        } => cmd_run(
            &mut o,
            input,
            schedule,
            *max_steps,
            *trace,
            *trace_measure,
            *copy_preference,
            *full_interleaving,
        ),
        Command::Bound { input } => cmd_bound(&mut o, input),
        Command::Enumerate { input } => cmd_enumerate(&mut o, input),
        Command::Stdlib { action } => cmd_stdlib(&mut o, action),
        Command::Fuzz {
            seed,
            count,
            max_depth,
            max_size,
            regions,
            typed,
            budget,
        } => {
            let cfg = GenConfig {
                seed: *seed,
                max_size: *max_size,
                max_depth: *max_depth,
                regions: *regions,
                stores: if *regions == 0 {
                    StoreSeeding::Empty
                } else {
                    StoreSeeding::UpTo(1)
                },
                typed: *typed,
            };
            cmd_fuzz(&mut o, cfg, *count, *budget)
        }
    };
    match result.unwrap_or_else(Exit::Usage) {
        Exit::Ok => 0,
        Exit::Negative => 1,
        Exit::Usage(msg) => {
            warn!(o, "error: {msg}");
            2
        }
    }
}

/// Parses `std::env::args` and runs.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = run_cli(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code)
}
