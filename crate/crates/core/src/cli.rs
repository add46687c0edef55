//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure or non-unique outcome,
//! 2 usage error, 3 schema error, 4 solver error, 5 simulation error,
//! 6 I/O error. Errors are written to stderr as one JSON object.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::game_core::{
    brute_force_spe_capped, is_unique_outcome, solve_spe, GameDocument, GameError, Lottery, DEFAULT_PROFILE_CAP,
};
use crate::scenario::{presets, run_scenario, Scenario, ScenarioError};
use crate::solomon::{check_case, PreferenceRegime, Prop1Case, ProposerSelection, SolomonError, SolomonState};
use crate::sweep;
use crate::types::Amount;

pub mod exit {
    pub const OK: i32 = 0;
    pub const VIOLATION: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SCHEMA: i32 = 3;
    pub const SOLVER: i32 = 4;
    pub const SIMULATION: i32 = 5;
    pub const IO: i32 = 6;
}

#[derive(Parser, Debug)]
#[command(
    name = "solomonic",
    version,
    about = "Solomonic mechanism solver and mempool simulator"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the simultaneous-report mechanism and check truthful implementation.
    SolveSolomon(SolveArgs),
    /// Run a scenario file.
    Simulate(SimulateArgs),
    /// Solve a game file and cross-check against profile enumeration.
    VerifySpe(VerifyArgs),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Alpha,
    Beta,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProposerArg {
    A,
    B,
    Random,
    All,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub state: StateArg,
    /// Fines to check, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub fine: Vec<Amount>,
    #[arg(long, value_enum, default_value = "all")]
    pub proposer: ProposerArg,
    /// The rival prefers a fined third-party allocation to the true mother.
    #[arg(long)]
    pub malice: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<u32>,
    /// Mark the contract as visibly carrying the clause.
    #[arg(long)]
    pub signal: bool,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines trace destination.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub game: PathBuf,
    /// Profile cap for the enumeration cross-check.
    #[arg(long, default_value_t = DEFAULT_PROFILE_CAP)]
    pub cap: u128,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SweepCommand {
    /// Bot profitability as the legitimate claimant's absence probability varies.
    Absence {
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        payment: Amount,
        #[arg(long, default_value_t = 5)]
        fee: Amount,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Settlement delay as the claim window varies.
    Window {
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<u64>,
        /// Base scenario; a signaled-clause deterrence scenario when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        repetitions: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Performer share without the clause as the number of bots varies.
    Bots {
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        repetitions: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub detail: serde_json::Value,
}

impl CliError {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            kind,
            message: message.into(),
            detail: serde_json::Value::Null,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new(exit::IO, "io", format!("{}: {e}", path.display()))
    }

    fn to_json(&self) -> String {
        let mut v = json!({"error": self.kind, "code": self.code, "message": self.message});
        if !self.detail.is_null() {
            v["detail"] = self.detail.clone();
        }
        v.to_string()
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        let detail = match &e {
            GameError::IncomparableLottery { path, player, .. } => json!({"path": path, "player": player}),
            GameError::UnrankedOutcome { path, .. }
            | GameError::MissingPreference { path, .. }
            | GameError::MalformedTree { path, .. } => json!({ "path": path }),
            _ => serde_json::Value::Null,
        };
        CliError {
            code: exit::SOLVER,
            kind: e.kind(),
            message: e.to_string(),
            detail,
        }
    }
}

impl From<SolomonError> for CliError {
    fn from(e: SolomonError) -> Self {
        match e {
            SolomonError::Game(g) => g.into(),
            other => CliError::new(exit::SOLVER, "solomon", other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match &e {
            ScenarioError::Schema { path, line, column, .. } => CliError {
                code: exit::SCHEMA,
                kind: "schema",
                message: e.to_string(),
                detail: json!({"path": path, "line": line, "column": column}),
            },
            ScenarioError::Invalid(_) => CliError::new(exit::SCHEMA, "invalid_scenario", e.to_string()),
            ScenarioError::Simulation(_) => CliError::new(exit::SIMULATION, "simulation", e.to_string()),
        }
    }
}

/// What a command produced: text for stdout or a file, and its exit code.
struct Outcome {
    text: String,
    code: i32,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_or_print(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::new(exit::IO, "io", e.to_string())),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CaseVerdict<'a> {
    state: SolomonState,
    proposer: ProposerSelection,
    fine: Amount,
    outcome: String,
    unique: bool,
    truthful: bool,
    fines_on_path: Amount,
    orders_agree: bool,
    oracle_agrees: bool,
    profile_count: String,
    equilibrium_path: &'a [String],
    violation: &'a Option<String>,
}

impl<'a> From<&'a Prop1Case> for CaseVerdict<'a> {
    fn from(c: &'a Prop1Case) -> Self {
        CaseVerdict {
            state: c.state,
            proposer: c.proposer,
            fine: c.fine,
            outcome: c
                .outcome_set
                .iter()
                .map(Lottery::to_string)
                .collect::<Vec<_>>()
                .join(" ; "),
            unique: c.unique,
            truthful: c.truthful,
            fines_on_path: c.fines_on_path,
            orders_agree: c.orders_agree,
            oracle_agrees: c.oracle_agrees,
            profile_count: c.profile_count.to_string(),
            equilibrium_path: &c.equilibrium_path,
            violation: &c.violation,
        }
    }
}

fn solve_solomon(args: &SolveArgs, format: Format) -> Result<Outcome, CliError> {
    if args.fine.contains(&0) {
        return Err(CliError::new(exit::USAGE, "usage", "fines must be positive"));
    }
    let states: Vec<SolomonState> = match args.state {
        StateArg::Alpha => vec![SolomonState::Alpha],
        StateArg::Beta => vec![SolomonState::Beta],
        StateArg::All => SolomonState::ALL.to_vec(),
    };
    let proposers: Vec<ProposerSelection> = match args.proposer {
        ProposerArg::A => vec![ProposerSelection::A],
        ProposerArg::B => vec![ProposerSelection::B],
        ProposerArg::Random => vec![ProposerSelection::Random],
        ProposerArg::All => ProposerSelection::ALL.to_vec(),
    };
    let regime = if args.malice {
        PreferenceRegime::MALICE
    } else {
        PreferenceRegime::SMALL_FINE
    };
    let mut cases = Vec::new();
    for &s in &states {
        for &p in &proposers {
            for &f in &args.fine {
                cases.push(check_case(s, p, f, regime)?);
            }
        }
    }
    let ok = cases.iter().all(|c| c.violation.is_none());
    let verdicts: Vec<CaseVerdict> = cases.iter().map(CaseVerdict::from).collect();
    let text = match format {
        Format::Json if verdicts.len() == 1 => pretty(&verdicts[0]),
        Format::Json => pretty(&json!({"all_truthful": ok, "malice": args.malice, "cases": verdicts})),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                state: SolomonState,
                proposer: ProposerSelection,
                fine: Amount,
                outcome: &'a str,
                unique: bool,
                truthful: bool,
                fines_on_path: Amount,
                oracle_agrees: bool,
                profile_count: &'a str,
            }
            let rows: Vec<Row> = verdicts
                .iter()
                .map(|v| Row {
                    state: v.state,
                    proposer: v.proposer,
                    fine: v.fine,
                    outcome: &v.outcome,
                    unique: v.unique,
                    truthful: v.truthful,
                    fines_on_path: v.fines_on_path,
                    oracle_agrees: v.oracle_agrees,
                    profile_count: &v.profile_count,
                })
                .collect();
            sweep::to_csv(&rows)
        }
    };
    Ok(Outcome {
        text,
        code: if ok { exit::OK } else { exit::VIOLATION },
    })
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Ok(Scenario::from_json(&read(path)?)?)
}

fn simulate(args: &SimulateArgs, format: Format, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(r) = args.repetitions {
        scenario.repetitions = r;
    }
    if args.signal {
        scenario.clause.signal = true;
    }
    let out = run_scenario(&scenario)?;
    if let Some(t) = &args.trace {
        std::fs::write(t, out.trace_jsonl()).map_err(|e| CliError::io(t, e))?;
    }
    let text = match format {
        Format::Json => out.report.to_json_pretty(),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                rep: u32,
                seed: u64,
                outcome: crate::scenario::RunOutcome,
                destination: Option<String>,
                rounds: u32,
                delay: Option<u64>,
                bot_claims: u32,
            }
            let rows: Vec<Row> = out
                .report
                .runs
                .iter()
                .map(|r| Row {
                    rep: r.rep,
                    seed: r.seed,
                    outcome: r.outcome,
                    destination: r.settlement.as_ref().map(|s| s.destination().to_string()),
                    rounds: r.rounds,
                    delay: r.delay,
                    bot_claims: r.bot_claims,
                })
                .collect();
            sweep::to_csv(&rows)
        }
    };
    write_or_print(args.out.as_deref(), &text, stdout)?;
    Ok(Outcome {
        text: String::new(),
        code: exit::OK,
    })
}

fn verify_spe(args: &VerifyArgs, format: Format) -> Result<Outcome, CliError> {
    let text = read(&args.game)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let doc: GameDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError {
            code: exit::SCHEMA,
            kind: "schema",
            message: inner.to_string(),
            detail: json!({"path": path, "line": inner.line(), "column": inner.column()}),
        }
    })?;
    if doc.schema_version != GameDocument::SCHEMA_VERSION {
        return Err(CliError::new(
            exit::SCHEMA,
            "schema",
            format!("unsupported schema_version {}", doc.schema_version),
        ));
    }
    let prefs = doc.profile();
    let sol = solve_spe(&doc.root, &prefs)?;
    let uniq = is_unique_outcome(&sol);
    let oracle = match brute_force_spe_capped(&doc.root, &prefs, args.cap) {
        Ok(o) => Some(o.outcome_set == sol.outcome_set && o.profile_count == sol.profile_count),
        Err(GameError::ProfileCapExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let outcomes: Vec<String> = sol.outcome_set.iter().map(Lottery::to_string).collect();
    let path: Vec<String> = sol
        .equilibrium_path(&doc.root)
        .into_iter()
        .map(|(n, a)| format!("{n} -> {}", a.into_iter().collect::<Vec<_>>().join("|")))
        .collect();
    let body = match format {
        Format::Json => pretty(&json!({
            "name": doc.name,
            "unique": uniq.unique,
            "outcomes": outcomes,
            "outcome_set": sol.outcome_set,
            "profile_count": sol.profile_count.to_string(),
            "oracle_agrees": oracle,
            "equilibrium_path": path,
        })),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                name: &'a str,
                outcome: &'a str,
                unique: bool,
            }
            let rows: Vec<Row> = outcomes
                .iter()
                .map(|o| Row {
                    name: &doc.name,
                    outcome: o,
                    unique: uniq.unique,
                })
                .collect();
            sweep::to_csv(&rows)
        }
    };
    let code = if uniq.unique && oracle != Some(false) {
        exit::OK
    } else {
        exit::VIOLATION
    };
    match &args.out {
        Some(p) => {
            std::fs::write(p, &body).map_err(|e| CliError::io(p, e))?;
            Ok(Outcome {
                text: String::new(),
                code,
            })
        }
        None => Ok(Outcome { text: body, code }),
    }
}

fn emit_rows<T: Serialize>(
    rows: &[T],
    format: Format,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => sweep::to_csv(rows),
        Format::Json => pretty(&rows),
    };
    write_or_print(out, &text, stdout)
}

fn run_sweep(cmd: &SweepCommand, format: Format, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    match cmd {
        SweepCommand::Absence {
            grid,
            payment,
            fee,
            runs,
            seed,
            out,
        } => {
            let rows = sweep::sweep_absence(grid, *payment, *fee, *runs, *seed)
                .map_err(|e| CliError::new(exit::USAGE, "grid", e.to_string()))?;
            emit_rows(&rows, format, out.as_deref(), stdout)?;
        }
        SweepCommand::Window {
            grid,
            scenario,
            repetitions,
            seed,
            out,
        } => {
            if grid.contains(&0) {
                return Err(CliError::new(exit::USAGE, "grid", "windows must be at least 1 block"));
            }
            let base = match scenario {
                Some(p) => load_scenario(p)?,
                None => presets::deterrence(*seed, *repetitions, 1),
            };
            let rows = sweep::sweep_window(&base, grid)?;
            emit_rows(&rows, format, out.as_deref(), stdout)?;
        }
        SweepCommand::Bots {
            grid,
            repetitions,
            seed,
            out,
        } => {
            let rows = sweep::sweep_bots(grid, *repetitions, *seed)?;
            emit_rows(&rows, format, out.as_deref(), stdout)?;
        }
    }
    Ok(Outcome {
        text: String::new(),
        code: exit::OK,
    })
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run(args: impl IntoIterator<Item = OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            if code == exit::OK {
                let _ = write!(stdout, "{e}");
            } else {
                let err = CliError::new(exit::USAGE, "usage", e.to_string().trim_end());
                let _ = writeln!(stderr, "{}", err.to_json());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::SolveSolomon(a) => solve_solomon(a, cli.format.unwrap_or(Format::Json)).and_then(|o| {
            write_or_print(a.out.as_deref(), &o.text, stdout)?;
            Ok(Outcome {
                text: String::new(),
                code: o.code,
            })
        }),
        Command::Simulate(a) => simulate(a, cli.format.unwrap_or(Format::Json), stdout),
        Command::VerifySpe(a) => verify_spe(a, cli.format.unwrap_or(Format::Json)),
        Command::Sweep(s) => run_sweep(s, cli.format.unwrap_or(Format::Csv), stdout),
    };
    match result {
        Ok(o) => {
            if !o.text.is_empty() && stdout.write_all(o.text.as_bytes()).is_err() {
                return exit::IO;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.code
        }
    }
}
