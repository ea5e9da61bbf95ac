use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use joinvir::context::Context;
use joinvir::detector::{
    detect_via_coverability, explore, viral_set_member, Budgets, DetectError, DetectionVerdict, Outcome, Strategy,
};
use joinvir::engine::{inject, run, Trace};
use joinvir::petri::{coverable, NetFile};
use joinvir::policy::{
    classify_context, enforcement_sound, non_infection_test, tokenize_context, NonInfection, PolicyError, TokenMode,
    TokenPolicy,
};
use joinvir::scenario::{Scenario, ScenarioError};
use joinvir::syntax::{check_core_fragment, desugar, parse, pretty, Name, Process, SyntaxError};

const EXIT_MISMATCH: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NOINPUT: u8 = 66;
const EXIT_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "joinvir", version, about = "Join-calculus workbench for self-replication analysis")]
struct Cli {
    /// Print results as JSON records.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reduce a program with seeded random choices and print the trace.
    Run {
        program: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        /// Plug the program into this context first.
        #[arg(long)]
        context: Option<PathBuf>,
        /// Print the final soup after the trace.
        #[arg(long)]
        dump: bool,
    },
    /// Parse a file and print it back.
    Parse {
        file: PathBuf,
        /// Print the core translation instead.
        #[arg(long)]
        core: bool,
        /// Report membership in the fragment without name generation.
        #[arg(long)]
        fragment: bool,
    },
    /// Decide whether a program replicates inside a context.
    Detect(DetectArgs),
    /// Petri-net queries.
    Petri {
        #[command(subcommand)]
        cmd: PetriCmd,
    },
    /// Containment policies.
    Policy {
        #[command(subcommand)]
        cmd: PolicyCmd,
    },
    /// Run a scenario file.
    Scenario {
        file: PathBuf,
        /// Write the compiled context.jc and process.jc here.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Write the witness trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Explore,
    Petri,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Bfs,
    Dfs,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    context: PathBuf,
    #[arg(long)]
    process: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Explore)]
    mode: Mode,
    #[arg(long, default_value_t = 10_000)]
    max_states: usize,
    #[arg(long, default_value_t = 200)]
    max_steps: usize,
    /// Check viral-set membership over this many infection rounds.
    #[arg(long)]
    iterations: Option<usize>,
    /// Write the witness trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Order::Bfs)]
    strategy: Order,
    /// Extra source names standing for the program, comma separated.
    #[arg(long, value_delimiter = ',')]
    payload: Vec<String>,
}

#[derive(Subcommand)]
enum PetriCmd {
    /// Is the target marking coverable from the initial one?
    Cover {
        #[arg(long)]
        net: PathBuf,
    },
}

#[derive(Subcommand)]
enum PolicyCmd {
    /// Compare the system before and after the process ran.
    Noninfect {
        #[arg(long)]
        context: PathBuf,
        #[arg(long)]
        process: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        tests: Vec<PathBuf>,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Classify the published channels of a context.
    Isolate {
        #[arg(long)]
        context: PathBuf,
    },
    /// Guard channels behind an access token.
    Tokenize {
        #[arg(long)]
        context: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        guard: Vec<String>,
        /// `spatial` or `counted:N`.
        #[arg(long, default_value = "spatial")]
        mode: String,
        /// Publish a `get_token` service.
        #[arg(long)]
        distributor: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the token-less probe battery against a guarded context.
    Enforce {
        #[arg(long)]
        context: PathBuf,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Failure {
        let error = e.into();
        let code = if error.downcast_ref::<SyntaxError>().is_some() {
            EXIT_USAGE
        } else if let Some(s) = error.downcast_ref::<ScenarioError>() {
            match s {
                ScenarioError::Syntax(_) => EXIT_USAGE,
                ScenarioError::Detect(DetectError::FragmentViolation(_)) => 3,
                ScenarioError::Io { .. } => EXIT_NOINPUT,
                _ => EXIT_DATA,
            }
        } else if let Some(DetectError::FragmentViolation(_)) = error.downcast_ref::<DetectError>() {
            3
        } else if error.downcast_ref::<std::io::Error>().is_some() {
            EXIT_NOINPUT
        } else if error.downcast_ref::<joinvir::context::ContextError>().is_some()
            || error.downcast_ref::<joinvir::engine::EngineError>().is_some()
            || error.downcast_ref::<PolicyError>().is_some()
            || error.downcast_ref::<joinvir::petri::NetParseError>().is_some()
        {
            EXIT_DATA
        } else {
            EXIT_SOFTWARE
        };
        Failure { code, error }
    }
}

fn with_code(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(with_code(EXIT_NOINPUT))
}

fn load_process(path: &Path) -> Result<Process, Failure> {
    let text = read(path)?;
    parse(&text).with_context(|| path.display().to_string()).map_err(with_code(EXIT_USAGE))
}

fn load_context(path: &Path) -> Result<Context, Failure> {
    let text = read(path)?;
    Context::from_jc(&text).with_context(|| path.display().to_string()).map_err(with_code(EXIT_DATA))
}

fn outcome_code(o: Outcome) -> u8 {
    match o {
        Outcome::NotVulnerable => 0,
        Outcome::Vulnerable => 1,
        Outcome::BudgetExhausted => 2,
    }
}

fn trace_text(v: &DetectionVerdict) -> String {
    if v.rounds.len() > 1 {
        let mut out = String::new();
        for (i, t) in v.rounds.iter().enumerate() {
            out.push_str(&format!("# round {}\n{}", i + 1, t));
        }
        return out;
    }
    v.witness.as_ref().map(Trace::to_string).unwrap_or_default()
}

fn report(v: &DetectionVerdict, trace: Option<&Path>, json: bool) -> Result<u8, Failure> {
    if let Some(path) = trace {
        fs::write(path, trace_text(v)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if json {
        let rec = json!({
            "outcome": v.outcome.as_str(),
            "witness_path": trace.filter(|_| v.witness.is_some()).map(|p| p.display().to_string()),
            "witness_steps": v.witness.as_ref().map(Trace::len),
            "rounds": v.rounds.len(),
            "stats": {
                "explored": v.stats.explored,
                "dedup_hits": v.stats.dedup_hits,
                "frontier_peak": v.stats.frontier_peak,
            },
        });
        println!("{rec}");
    } else {
        println!("{}", v.outcome);
        println!(
            "explored {}  dedup_hits {}  frontier_peak {}",
            v.stats.explored, v.stats.dedup_hits, v.stats.frontier_peak
        );
        if trace.is_none() && v.witness.is_some() {
            print!("{}", trace_text(v));
        }
    }
    Ok(outcome_code(v.outcome))
}

fn cmd_run(program: &Path, seed: u64, max_steps: usize, context: Option<&Path>, dump: bool, json: bool) -> Result<u8, Failure> {
    let p = load_process(program)?;
    let soup = match context {
        Some(c) => load_context(c)?.plug(&p)?,
        None => inject(&p)?,
    };
    let t = run(&soup, seed, max_steps)?;
    if json {
        let steps: Vec<Value> = t.steps.iter().enumerate().map(|(i, s)| json!({ "line": s.line(i + 1) })).collect();
        println!("{}", json!({ "seed": seed, "steps": steps }));
    } else {
        print!("{t}");
        if dump {
            print!("{}", t.last.dump());
        }
    }
    Ok(0)
}

fn cmd_parse(file: &Path, core: bool, fragment: bool, json: bool) -> Result<u8, Failure> {
    let p = load_process(file)?;
    if fragment {
        let r = check_core_fragment(&p);
        if json {
            let v: Vec<Value> =
                r.violations.iter().map(|v| json!({ "kind": v.kind.as_str(), "location": v.location })).collect();
            println!("{}", json!({ "in_fragment": r.in_fragment, "violations": v }));
        } else {
            println!("{r}");
        }
        return Ok(if r.in_fragment { 0 } else { 3 });
    }
    let out = if core { pretty(&desugar(&p)?) } else { pretty(&p) };
    println!("{out}");
    Ok(0)
}

fn cmd_detect(a: &DetectArgs, json: bool) -> Result<u8, Failure> {
    let ctx = load_context(&a.context)?;
    let p = load_process(&a.process)?;
    let budgets = Budgets {
        max_states: a.max_states,
        max_steps_per_branch: a.max_steps,
        strategy: match a.strategy {
            Order::Bfs => Strategy::BreadthFirst,
            Order::Dfs => Strategy::DepthFirst,
        },
        workers: a.workers.max(1),
        payload_names: a.payload.iter().map(|s| Name::new(s)).collect(),
    };
    let v = match (a.iterations, a.mode) {
        (Some(k), _) => viral_set_member(&ctx, &p, k, &budgets).map_err(|e| match e {
            DetectError::TooFewIterations { .. } => Failure { code: EXIT_USAGE, error: e.into() },
            e => e.into(),
        })?,
        (None, Mode::Explore) => explore(&ctx, &p, &budgets)?,
        (None, Mode::Petri) => detect_via_coverability(&ctx, &p, &budgets)?,
    };
    report(&v, a.trace.as_deref(), json)
}

fn cmd_cover(net: &Path, json: bool) -> Result<u8, Failure> {
    let f = NetFile::parse(&read(net)?)?;
    let c = coverable(&f.net, &f.init, &f.target);
    let labels: Vec<String> = c.witness.iter().flatten().map(|&t| f.net.transitions[t].label.clone()).collect();
    if json {
        println!("{}", json!({ "covered": c.covered, "witness": labels, "basis_size": c.basis_size }));
    } else {
        println!("covered: {}", c.covered);
        if c.covered {
            println!("witness: {}", if labels.is_empty() { "-".to_string() } else { labels.join(" ") });
        }
        println!("basis size: {}", c.basis_size);
    }
    Ok(0)
}

fn token_mode(s: &str) -> Result<TokenMode, Failure> {
    if s == "spatial" {
        return Ok(TokenMode::Spatial);
    }
    s.strip_prefix("counted:")
        .and_then(|n| n.parse().ok())
        .filter(|&n| n > 0)
        .map(TokenMode::Counted)
        .ok_or_else(|| Failure { code: EXIT_USAGE, error: anyhow::anyhow!("mode must be spatial or counted:N, got {s}") })
}

fn cmd_policy(cmd: &PolicyCmd, json: bool) -> Result<u8, Failure> {
    match cmd {
        PolicyCmd::Noninfect { context, process, tests, depth } => {
            let ctx = load_context(context)?;
            let p = load_process(process)?;
            let tests = tests.iter().map(|t| load_process(t)).collect::<Result<Vec<_>, _>>()?;
            let v = non_infection_test(&ctx, &p, &tests, *depth)?;
            if json {
                let outcome = match v.outcome {
                    NonInfection::SatisfiedToDepth(_) => "satisfied",
                    NonInfection::Violated => "violated",
                };
                let d = v.distinguishing.as_ref().map(|d| {
                    json!({ "test": d.test.to_string(), "original": d.original, "infected": d.infected })
                });
                println!("{}", json!({ "outcome": outcome, "depth": v.depth, "quiescent": v.quiescent, "distinguishing": d }));
            } else {
                println!("{v}");
            }
            Ok(match v.outcome {
                NonInfection::SatisfiedToDepth(_) => 0,
                NonInfection::Violated => 1,
            })
        }
        PolicyCmd::Isolate { context } => {
            let r = classify_context(&load_context(context)?);
            if json {
                let entries: Vec<Value> = r
                    .entries
                    .iter()
                    .map(|e| json!({ "channel": e.channel.to_string(), "case": e.case.to_string(), "writes": e.writes }))
                    .collect();
                println!("{}", json!({ "isolation_holds": r.isolation_holds, "entries": entries }));
            } else {
                println!("{r}");
            }
            Ok(if r.isolation_holds { 0 } else { 1 })
        }
        PolicyCmd::Tokenize { context, guard, mode, distributor, out } => {
            let ctx = load_context(context)?;
            let mut policy = TokenPolicy::spatial(guard.iter().map(|g| Name::new(g)));
            policy.mode = token_mode(mode)?;
            policy.distributor = *distributor;
            let g = tokenize_context(&ctx, &policy)?;
            match out {
                Some(path) => fs::write(path, g.to_jc()).with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{}", g.to_jc()),
            }
            Ok(0)
        }
        PolicyCmd::Enforce { context, depth } => {
            let sound = enforcement_sound(&load_context(context)?, *depth)?;
            if json {
                println!("{}", json!({ "sound": sound, "depth": depth }));
            } else {
                println!("{}", if sound { "sound" } else { "bypassed" });
            }
            Ok(if sound { 0 } else { 1 })
        }
    }
}

fn cmd_scenario(file: &Path, emit: Option<&Path>, trace: Option<&Path>, json: bool) -> Result<u8, Failure> {
    let s = Scenario::load(file)?;
    if let Some(dir) = emit {
        let (ctx, p) = s.compile()?;
        fs::create_dir_all(dir)?;
        fs::write(dir.join("context.jc"), ctx.to_jc())?;
        fs::write(dir.join("process.jc"), format!("{}\n", pretty(&p)))?;
    }
    let v = s.run()?;
    let code = report(&v, trace, json)?;
    match s.expect {
        Some(e) if e == v.outcome => {
            if !json {
                println!("expectation met");
            }
            Ok(0)
        }
        Some(e) => {
            eprintln!("expected {e}, got {}", v.outcome);
            Ok(EXIT_MISMATCH)
        }
        None => Ok(code),
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.cmd {
        Cmd::Run { program, seed, max_steps, context, dump } => {
            cmd_run(program, *seed, *max_steps, context.as_deref(), *dump, cli.json)
        }
        Cmd::Parse { file, core, fragment } => cmd_parse(file, *core, *fragment, cli.json),
        Cmd::Detect(a) => cmd_detect(a, cli.json),
        Cmd::Petri { cmd: PetriCmd::Cover { net } } => cmd_cover(net, cli.json),
        Cmd::Policy { cmd } => cmd_policy(cmd, cli.json),
        Cmd::Scenario { file, emit, trace } => cmd_scenario(file, emit.as_deref(), trace.as_deref(), cli.json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
