//! `percentile`: solve, verify and simulate multi-constraint percentile
//! queries on weighted MDPs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use percentile_core::format::{parse_model, parse_query, parse_strategy, strategy_to_json, Model, Query, SCHEMAS};
use percentile_core::graph::max_end_components;
use percentile_core::sim::{estimate_percentiles, exact_constraint_probability, SimulationReport};
use percentile_core::solve::{family_name, solve_query, SolveOutcome, Verdict};
use percentile_core::strategy::{induced_chain, MooreStrategy, Policy, Strategy};
use percentile_core::{PercentileConstraint, Rational, WeightedMdp};

const EXIT_NO: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "percentile", version, about = "Multi-constraint percentile queries on weighted MDPs")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide a query and export a witness strategy.
    Solve(SolveArgs),
    /// Check a strategy file against a query.
    Verify(VerifyArgs),
    /// Estimate satisfaction frequencies of a strategy by simulation.
    Simulate(SimulateArgs),
    /// Print the maximal end components of a model.
    Mec {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the model, query and strategy file formats.
    Formats,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Overrides the query file's epsilon ("num/den").
    #[arg(long)]
    epsilon: Option<Rational>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Write the witness strategy here.
    #[arg(long)]
    strategy_out: Option<PathBuf>,
    /// Write the certificate here.
    #[arg(long)]
    certificate_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Simulate,
}

#[derive(Args, Clone)]
struct SimParams {
    #[arg(long, default_value_t = 10_000)]
    episodes: usize,
    #[arg(long, default_value_t = 1_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allowance on mean-payoff values for finite prefixes.
    #[arg(long, default_value = "1/10")]
    mp_slack: Rational,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[command(flatten)]
    sim: SimParams,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Strategy file; without it the query is solved first.
    #[arg(long)]
    strategy: Option<PathBuf>,
    #[command(flatten)]
    sim: SimParams,
}

/// Errors that map to the data-error exit code.
struct DataError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for DataError {
    fn from(e: E) -> Self {
        DataError(e.into())
    }
}

type CliResult = Result<u8, DataError>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(inputs: &Inputs) -> anyhow::Result<(Model, Query, Option<Rational>)> {
    let model = parse_model(&read(&inputs.model)?).with_context(|| inputs.model.display().to_string())?;
    let query = parse_query(&read(&inputs.query)?, &model).with_context(|| inputs.query.display().to_string())?;
    let eps = inputs.epsilon.clone().or_else(|| query.epsilon.clone());
    Ok((model, query, eps))
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Yes => 0,
        Verdict::No => EXIT_NO,
        Verdict::Unknown => EXIT_UNKNOWN,
    }
}

fn describe(c: &PercentileConstraint) -> String {
    let rel = if c.kind == percentile_core::PayoffKind::TruncatedSum { "<=" } else { ">=" };
    format!("P[{}_{} {rel} {}] >= {}", c.kind, c.dim + 1, c.value, c.prob)
}

fn write_out(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn solve_json(mdp: &WeightedMdp, out: &SolveOutcome) -> Value {
    let disjuncts: Vec<Value> = out
        .disjuncts
        .iter()
        .map(|d| {
            json!({
                "verdict": d.verdict,
                "family": d.family.map(family_name),
                "diagnostics": d.diagnostics,
                "certificate": d.certificate,
            })
        })
        .collect();
    let strategy = out.strategy().map(|s| serde_json::from_str::<Value>(&strategy_to_json(mdp, s)).expect("json"));
    json!({ "verdict": out.verdict, "disjunct": out.witness, "disjuncts": disjuncts, "strategy": strategy })
}

fn run_solve(args: &SolveArgs, as_json: bool) -> CliResult {
    let (model, query, eps) = load(&args.inputs)?;
    let out = solve_query(&model.mdp, &query.query, eps.as_ref())?;
    if let (Some(p), Some(s)) = (&args.strategy_out, out.strategy()) {
        write_out(p, &strategy_to_json(&model.mdp, s))?;
    }
    if let Some(p) = &args.certificate_out {
        let certs: Vec<_> = out.disjuncts.iter().map(|d| &d.certificate).collect();
        write_out(p, &serde_json::to_string_pretty(&certs)?)?;
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&solve_json(&model.mdp, &out))?);
    } else {
        let v = format!("{:?}", out.verdict).to_lowercase();
        match out.witness {
            Some(i) => println!("verdict: {v} (disjunct {})", i + 1),
            None => println!("verdict: {v}"),
        }
        for (i, d) in out.disjuncts.iter().enumerate() {
            let fam = d.family.map(family_name).unwrap_or("-");
            let size = d.certificate.as_ref().map(|c| c.product_states).unwrap_or(0);
            println!("  disjunct {}: {:?} [{fam}] product states {size}", i + 1, d.verdict);
            for note in &d.diagnostics {
                println!("    {note}");
            }
        }
        match out.strategy() {
            Some(Strategy::Finite(m)) => println!("strategy: finite, {} memory elements", m.minimized_memory_size()),
            Some(Strategy::Switching(_)) => println!("strategy: infinite-memory switching schedule"),
            None => {}
        }
    }
    Ok(verdict_code(out.verdict))
}

fn sim_report<P: Policy + Sync>(
    mdp: &WeightedMdp,
    policy: &P,
    init: usize,
    cs: &[PercentileConstraint],
    p: &SimParams,
    extra_slack: &Rational,
) -> anyhow::Result<SimulationReport> {
    let slack = &p.mp_slack + extra_slack;
    Ok(estimate_percentiles(mdp, policy, init, cs, p.horizon, p.episodes, p.seed, &slack)?)
}

fn print_sim(rep: &SimulationReport, cs: &[PercentileConstraint]) {
    println!(
        "simulation: {} episodes, horizon {}, seed {} ({}), {}% intervals",
        rep.episodes,
        rep.horizon,
        rep.seed,
        rep.generator,
        rep.confidence * 100.0
    );
    for (c, e) in cs.iter().zip(&rep.constraints) {
        println!(
            "  {}: frequency {:.4} [{:.4}, {:.4}] slack {} {}",
            describe(c),
            e.frequency,
            e.lower,
            e.upper,
            e.slack,
            if e.passes { "ok" } else { "FAIL" }
        );
    }
}

fn run_verify(args: &VerifyArgs, as_json: bool) -> CliResult {
    let (model, query, eps) = load(&args.inputs)?;
    let mdp = &model.mdp;
    let strategy: MooreStrategy =
        parse_strategy(&read(&args.strategy)?, mdp).with_context(|| args.strategy.display().to_string())?;
    let extra = eps.clone().unwrap_or_else(Rational::zero);
    let mut any = false;
    let mut blocks = Vec::new();
    for (i, block) in query.query.disjuncts.iter().enumerate() {
        let mut ok_all = true;
        let mut rows = Vec::new();
        match args.mode {
            Mode::Exact => {
                let chain = induced_chain(mdp, &strategy, query.query.init)?;
                for c in block {
                    let chk = exact_constraint_probability(mdp, &chain, c)?;
                    let (ok, how) = if chk.certifies(&c.prob) {
                        (true, "exact")
                    } else if chk.refutes(&c.prob) {
                        (false, "exact")
                    } else {
                        eprintln!("warning: {} is not decided exactly; falling back to simulation", describe(c));
                        let rep = sim_report(mdp, &strategy, query.query.init, std::slice::from_ref(c), &args.sim, &extra)?;
                        (rep.all_pass(), "simulated")
                    };
                    ok_all &= ok;
                    rows.push(json!({
                        "constraint": describe(c), "lower": chk.lower, "upper": chk.upper, "method": how, "satisfied": ok,
                    }));
                }
            }
            Mode::Simulate => {
                let rep = sim_report(mdp, &strategy, query.query.init, block, &args.sim, &extra)?;
                for (c, e) in block.iter().zip(&rep.constraints) {
                    ok_all &= e.passes;
                    rows.push(json!({
                        "constraint": describe(c), "estimate": e, "method": "simulated", "satisfied": e.passes,
                    }));
                }
            }
        }
        any |= ok_all;
        blocks.push(json!({ "disjunct": i + 1, "satisfied": ok_all, "constraints": rows }));
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&json!({ "satisfied": any, "disjuncts": blocks }))?);
    } else {
        for b in &blocks {
            println!("disjunct {}: {}", b["disjunct"], if b["satisfied"] == true { "satisfied" } else { "violated" });
            for r in b["constraints"].as_array().into_iter().flatten() {
                let mark = if r["satisfied"] == true { "ok" } else { "FAIL" };
                let prob = match (&r["lower"], &r["upper"]) {
                    (Value::String(l), Value::String(u)) if l == u => format!("P = {l}"),
                    (Value::String(l), Value::String(u)) => format!("P in [{l}, {u}]"),
                    _ => format!("frequency {:.4}", r["estimate"]["frequency"].as_f64().unwrap_or(0.0)),
                };
                println!("  {}: {prob} ({}) {mark}", r["constraint"].as_str().unwrap_or(""), r["method"].as_str().unwrap_or(""));
            }
        }
    }
    Ok(if any { 0 } else { EXIT_NO })
}

fn run_simulate(args: &SimulateArgs, as_json: bool) -> CliResult {
    let (model, query, eps) = load(&args.inputs)?;
    let mdp = &model.mdp;
    let init = query.query.init;
    let extra = eps.clone().unwrap_or_else(Rational::zero);
    let (strategy, block) = match &args.strategy {
        Some(p) => {
            let m = parse_strategy(&read(p)?, mdp).with_context(|| p.display().to_string())?;
            (Strategy::Finite(m), query.query.disjuncts[0].clone())
        }
        None => {
            let out = solve_query(mdp, &query.query, eps.as_ref())?;
            match (out.witness, out.strategy()) {
                (Some(i), Some(s)) => (s.clone(), query.query.disjuncts[i].clone()),
                _ => {
                    let v = if out.verdict == Verdict::Yes { "yes, but no strategy was produced" } else { "no witness to simulate" };
                    eprintln!("verdict {:?}: {v}", out.verdict);
                    return Ok(if out.verdict == Verdict::Yes { EXIT_UNKNOWN } else { verdict_code(out.verdict) });
                }
            }
        }
    };
    let rep = sim_report(mdp, &strategy, init, &block, &args.sim, &extra)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&rep)?);
    } else {
        print_sim(&rep, &block);
    }
    Ok(if rep.all_pass() { 0 } else { EXIT_NO })
}

fn run_mec(model: &Path, as_json: bool) -> CliResult {
    let m = parse_model(&read(model)?).with_context(|| model.display().to_string())?;
    let mdp = &m.mdp;
    let dec = max_end_components(mdp);
    let mecs: Vec<Value> = dec
        .mecs
        .iter()
        .map(|mec| {
            let acts: Vec<Value> = mec
                .state_actions()
                .map(|(s, a)| json!({ "state": mdp.state_name(s), "action": mdp.action(s, a).name }))
                .collect();
            json!({
                "states": mec.states.iter().map(|s| mdp.state_name(*s)).collect::<Vec<_>>(),
                "actions": acts,
            })
        })
        .collect();
    if as_json {
        println!("{}", serde_json::to_string_pretty(&json!({ "mecs": mecs }))?);
    } else {
        println!("{} maximal end components", dec.len());
        for (i, mec) in dec.mecs.iter().enumerate() {
            let names: Vec<&str> = mec.states.iter().map(|s| mdp.state_name(*s)).collect();
            println!("  {}: {{{}}}", i + 1, names.join(", "));
            for (s, a) in mec.state_actions() {
                println!("      {} --{}-->", mdp.state_name(s), mdp.action(s, a).name);
            }
        }
    }
    Ok(0)
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PERCENTILE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| format!("PERCENTILE_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("PERCENTILE_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let res = match &cli.cmd {
        Cmd::Solve(a) => run_solve(a, cli.json),
        Cmd::Verify(a) => run_verify(a, cli.json),
        Cmd::Simulate(a) => run_simulate(a, cli.json),
        Cmd::Mec { model } => run_mec(model, cli.json),
        Cmd::Formats => {
            print!("{SCHEMAS}");
            Ok(0)
        }
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(DataError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
