//! The `stochgame` command line.

pub mod gen;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{self, montecarlo};
use crate::knowledge::build_knowledge_arena;
use crate::model::{game_to_value, parse_game, parse_strategy, serialize_game, strategy_to_value, Arena, Objective, Player};
use crate::solver::{self, Limits, SolveReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stochgame", version, about = "Almost-sure winning in concurrent stochastic games with partial observation")]
pub struct Cli {
    /// Give up when the candidate space is larger than this.
    #[arg(long, global = true, default_value_t = solver::DEFAULT_MAX_CANDIDATES)]
    pub max_candidates: u128,

    /// Cap on knowledge states and on beliefs per belief graph.
    #[arg(long, global = true, default_value_t = solver::DEFAULT_MAX_BELIEFS)]
    pub max_beliefs: usize,

    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide almost-sure reachability or Büchi for Eve.
    Solve {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, value_parser = decision_objective)]
        objective: Objective,
        /// Include the per-candidate outcomes in the report.
        #[arg(long)]
        debug_candidates: bool,
    },
    /// Exact objective probability of a strategy pair.
    Eval(PairArgs),
    /// Monte Carlo estimate of the objective probability of a strategy pair.
    Simulate {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = montecarlo::DEFAULT_HORIZON)]
        horizon: usize,
    },
    /// Build the knowledge arena and print its census.
    Knowledge {
        #[arg(long)]
        game: PathBuf,
        /// Also print the knowledge arena as a game document.
        #[arg(long)]
        dump: bool,
    },
    /// Write a random game.
    Gen {
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        eve_actions: usize,
        #[arg(long, default_value_t = 2)]
        adam_actions: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 2)]
        eve_blocks: usize,
        #[arg(long, default_value_t = 2)]
        adam_blocks: usize,
        #[arg(long, default_value_t = 1)]
        finals: usize,
    },
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    eve: PathBuf,
    #[arg(long)]
    adam: PathBuf,
    #[arg(long)]
    objective: Objective,
}

fn decision_objective(text: &str) -> std::result::Result<Objective, String> {
    match text.parse::<Objective>().map_err(|e| e.to_string())? {
        o @ (Objective::Reachability | Objective::Buchi) => Ok(o),
        o => Err(format!("{o} is evaluation-only; solve accepts reach or buchi")),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // fails only if a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let start = Instant::now();
    let outcome = dispatch(&cli);
    let (code, summary) = match &outcome {
        Ok(summary) => (EXIT_OK, summary.clone()),
        Err(Failure { error, .. }) => {
            eprintln!("error: {error}");
            (exit_code(error), json!({ "error": error.to_string() }))
        }
    };
    if let Err(Failure { partial: Some(report), .. }) = &outcome {
        if let Err(e) = emit(&cli, &(pretty(report) + "\n")) {
            eprintln!("error: {e}");
        }
    }
    let record = json!({
        "command": command_name(&cli.command),
        "config": config(&cli),
        "elapsed_ms": start.elapsed().as_millis() as u64,
        "exit_code": code,
        "outcome": summary,
    });
    eprintln!("{record}");
    code
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::ResourceLimit { .. } => EXIT_LIMIT,
        _ => EXIT_INVALID,
    }
}

struct Failure {
    error: Error,
    partial: Option<Box<Value>>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, partial: None }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Solve { .. } => "solve",
        Command::Eval(_) => "eval",
        Command::Simulate { .. } => "simulate",
        Command::Knowledge { .. } => "knowledge",
        Command::Gen { .. } => "gen",
    }
}

fn config(cli: &Cli) -> Value {
    let mut v = json!({
        "max_candidates": count(cli.max_candidates),
        "max_beliefs": cli.max_beliefs,
        "threads": cli.threads,
        "seed": cli.seed,
        "out": cli.out.as_ref().map(|p| p.display().to_string()),
    });
    let obj = v.as_object_mut().unwrap();
    let path = |p: &Path| json!(p.display().to_string());
    match &cli.command {
        Command::Solve { game, objective, debug_candidates } => {
            obj.insert("game".into(), path(game));
            obj.insert("objective".into(), json!(objective.as_str()));
            obj.insert("debug_candidates".into(), json!(debug_candidates));
        }
        Command::Eval(pair) => pair_config(obj, pair),
        Command::Simulate { pair, samples, horizon } => {
            pair_config(obj, pair);
            obj.insert("samples".into(), json!(samples));
            obj.insert("horizon".into(), json!(horizon));
        }
        Command::Knowledge { game, dump } => {
            obj.insert("game".into(), path(game));
            obj.insert("dump".into(), json!(dump));
        }
        Command::Gen { .. } => {
            obj.insert("params".into(), serde_json::to_value(gen_params(cli)).unwrap());
        }
    }
    v
}

fn pair_config(obj: &mut serde_json::Map<String, Value>, pair: &PairArgs) {
    obj.insert("game".into(), json!(pair.game.display().to_string()));
    obj.insert("eve".into(), json!(pair.eve.display().to_string()));
    obj.insert("adam".into(), json!(pair.adam.display().to_string()));
    obj.insert("objective".into(), json!(pair.objective.as_str()));
}

fn gen_params(cli: &Cli) -> gen::GenParams {
    let Command::Gen { states, eve_actions, adam_actions, density, eve_blocks, adam_blocks, finals } = cli.command else {
        unreachable!("gen parameters requested for another command")
    };
    gen::GenParams {
        state_count: states,
        eve_action_count: eve_actions,
        adam_action_count: adam_actions,
        transition_density: density,
        eve_blocks,
        adam_blocks,
        final_count: finals,
        seed: cli.seed,
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_game(path: &Path) -> Result<Arena> {
    parse_game(&read(path)?)
}

/// Writes to `--out` through a temporary file in the same directory, or to
/// stdout.
fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => write_atomic(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn dispatch(cli: &Cli) -> std::result::Result<Value, Failure> {
    match &cli.command {
        Command::Solve { game, objective, debug_candidates } => cmd_solve(cli, game, *objective, *debug_candidates),
        Command::Eval(pair) => Ok(cmd_eval(cli, pair)?),
        Command::Simulate { pair, samples, horizon } => Ok(cmd_simulate(cli, pair, *samples, *horizon)?),
        Command::Knowledge { game, dump } => Ok(cmd_knowledge(cli, game, *dump)?),
        Command::Gen { .. } => Ok(cmd_gen(cli)?),
    }
}

fn limits(cli: &Cli) -> Limits {
    Limits {
        max_candidates: cli.max_candidates,
        max_beliefs: cli.max_beliefs,
    }
}

/// JSON form of a solve report.
pub fn report_to_value(arena: &Arena, report: &SolveReport, config: Value) -> Value {
    json!({
        "verdict": report.verdict.as_str(),
        "objective": report.objective.as_str(),
        "witness": report.witness.as_ref().map(|w| strategy_to_value(arena, w)),
        "witness_winning_knowledges": report
            .winning_knowledges
            .iter()
            .map(|k| k.display(arena))
            .collect::<Vec<_>>(),
        "witness_candidate": report.witness_candidate.as_ref().map(|c| count(c.index)),
        "candidates_checked": count(report.candidates_checked),
        "candidate_total": count(report.candidate_total),
        "elapsed_ms": report.elapsed.as_millis() as u64,
        "config": config,
    })
}

fn candidate_table(arena: &Arena, objective: Objective, limits: &Limits) -> Result<Value> {
    let ka = build_knowledge_arena(arena, limits.max_beliefs)?;
    let mut rows = Vec::new();
    for c in solver::enumerate_candidates(&ka, limits.max_candidates)? {
        let check = solver::check_candidate(&ka, &c.strategy, objective, limits.max_beliefs)?;
        let choice: serde_json::Map<String, Value> = c
            .strategy
            .choice
            .iter()
            .map(|(k, a)| (k.display(arena), json!(a.display(arena))))
            .collect();
        rows.push(json!({
            "index": count(c.index),
            "choice": choice,
            "eve_wins": check.eve_wins,
            "adversary_states": check.adversary.game.num_states(),
            "beliefs": check.adam.beliefs,
        }));
    }
    Ok(Value::Array(rows))
}

/// Counts are JSON numbers; values past u64 fall back to decimal strings.
fn count(n: u128) -> Value {
    match u64::try_from(n) {
        Ok(v) => json!(v),
        Err(_) => json!(n.to_string()),
    }
}

fn cmd_solve(cli: &Cli, path: &Path, objective: Objective, debug: bool) -> std::result::Result<Value, Failure> {
    let arena = load_game(path)?;
    let limits = limits(cli);
    let cfg = config(cli);
    match solver::solve(&arena, objective, &limits) {
        Ok(report) => {
            let mut v = report_to_value(&arena, &report, cfg);
            if debug {
                v.as_object_mut()
                    .unwrap()
                    .insert("candidates".into(), candidate_table(&arena, objective, &limits)?);
            }
            emit(cli, &(pretty(&v) + "\n"))?;
            Ok(json!({
                "verdict": report.verdict.as_str(),
                "candidates_checked": count(report.candidates_checked),
            }))
        }
        Err(abort) => {
            let partial = json!({
                "verdict": null,
                "objective": objective.as_str(),
                "witness": null,
                "witness_winning_knowledges": [],
                "candidates_checked": count(abort.candidates_checked),
                "error": abort.error.to_string(),
                "config": cfg,
            });
            let partial = matches!(abort.error, Error::ResourceLimit { .. }).then(|| Box::new(partial));
            Err(Failure {
                error: abort.error,
                partial,
            })
        }
    }
}

fn load_pair(pair: &PairArgs) -> Result<(Arena, crate::model::FiniteMemoryStrategy, crate::model::FiniteMemoryStrategy)> {
    let arena = load_game(&pair.game)?;
    let eve = parse_strategy(&arena, &read(&pair.eve)?)?;
    let adam = parse_strategy(&arena, &read(&pair.adam)?)?;
    if eve.owner != Player::Eve || adam.owner != Player::Adam {
        return Err(Error::validation("--eve and --adam must be owned by eve and adam"));
    }
    Ok((arena, eve, adam))
}

fn cmd_eval(cli: &Cli, pair: &PairArgs) -> Result<Value> {
    let (arena, eve, adam) = load_pair(pair)?;
    let result = eval::evaluate(&arena, &eve, &adam, pair.objective);
    let v = result.to_json();
    emit(cli, &(serde_json::to_string(&v).unwrap() + "\n"))?;
    Ok(v)
}

fn cmd_simulate(cli: &Cli, pair: &PairArgs, samples: u64, horizon: usize) -> Result<Value> {
    if samples == 0 {
        return Err(Error::validation("--samples must be at least 1"));
    }
    let (arena, eve, adam) = load_pair(pair)?;
    let sim = montecarlo::monte_carlo(&arena, &eve, &adam, pair.objective, samples, horizon, cli.seed);
    let v = sim.to_json();
    emit(cli, &(serde_json::to_string(&v).unwrap() + "\n"))?;
    Ok(v)
}

fn cmd_knowledge(cli: &Cli, path: &Path, dump: bool) -> Result<Value> {
    let arena = load_game(path)?;
    let ka = build_knowledge_arena(&arena, cli.max_beliefs)?;
    let census = ka.census();
    let mut text = String::new();
    if dump {
        text.push_str(&pretty(&game_to_value(ka.arena())));
        text.push('\n');
    }
    text.push_str(&census.to_string());
    text.push('\n');
    emit(cli, &text)?;
    Ok(json!({
        "knowledge_states": census.knowledge_states,
        "knowledges": census.knowledges,
        "edges": census.edges,
    }))
}

fn cmd_gen(cli: &Cli) -> Result<Value> {
    let params = gen_params(cli);
    params.validate()?;
    let arena = gen::random_arena(&params);
    emit(cli, &(serialize_game(&arena) + "\n"))?;
    Ok(json!({ "states": arena.num_states() }))
}
