use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rmab_core::experiments::builders::{build_benchmark_4state, build_slow_and_steady, SlowSteadyParams};
use rmab_core::experiments::criteria::diffusion_rows;
use rmab_core::experiments::repro::{repro, ReproOptions};
use rmab_core::experiments::sweep::{make_policy, run_sweep, simulate_cell, PolicyKind, PriorityChoice, SimulationRow, SweepSpec};
use rmab_core::experiments::to_csv;
use rmab_core::instance_file::InstanceFile;
use rmab_core::lp::{relax_instance, upper_bound, LpConfig, Relaxation, Truncation};
use rmab_core::oracle::{exact_policy_value, exact_value, CountSpace, STATE_ACTION_LIMIT};
use rmab_core::policies::{whittle_report, DEFAULT_GRID_POINTS};
use rmab_core::sim::{SimConfig, DEFAULT_SEED};
use rmab_core::{Error, ExactRational, InstanceF64};

#[derive(Parser)]
#[command(name = "rmab", version, about = "Restless bandits with many arms: LP bound, policies, simulation, exact oracle")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Instance file, or builtin:slow-steady / builtin:benchmark.
    #[arg(long, global = true)]
    instance: Option<String>,
    /// Number of arms; overrides the file's N.
    #[arg(long = "N", global = true)]
    arms: Option<u64>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory for CSV and report output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; changes speed only, never output.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TRule {
    HalfLog,
    Tail,
}

#[derive(Args)]
struct TruncationArgs {
    /// Fixed LP horizon.
    #[arg(long = "T", conflicts_with = "rule")]
    periods: Option<usize>,
    #[arg(long = "T-rule", value_enum)]
    rule: Option<TRule>,
    /// Absolute bound on the neglected discounted tail for --T-rule tail.
    #[arg(long = "tail-tol", default_value_t = 1e-6)]
    tail_tol: f64,
}

impl TruncationArgs {
    fn truncation(&self) -> Truncation {
        match (self.periods, self.rule) {
            (Some(t), _) => Truncation::Fixed(t),
            (None, Some(TRule::HalfLog)) => Truncation::HalfLog,
            (None, _) => Truncation::TailTol(self.tail_tol),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the LP relaxation and print its bound and budget prices.
    SolveLp {
        #[command(flatten)]
        truncation: TruncationArgs,
    },
    /// Check indexability and compute Whittle indices.
    Whittle {
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid: usize,
    },
    /// Simulate a policy and print one CSV row.
    Simulate {
        /// fluid or whittle.
        #[arg(long, default_value = "fluid")]
        policy: String,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        /// Write diffusion statistics to OUT/diffusion.csv.
        #[arg(long)]
        record_diffusion: bool,
        /// whittle-order, lp-dual, or file:PATH.
        #[arg(long, default_value = "lp-dual")]
        priority: String,
        /// Simulated horizon; defaults to the LP horizon.
        #[arg(long = "T-sim")]
        sim_horizon: Option<usize>,
        #[command(flatten)]
        truncation: TruncationArgs,
    },
    /// Optimality gap against N for several policies.
    Sweep {
        /// Comma-separated, strictly increasing arm counts.
        #[arg(long = "Ns", value_delimiter = ',', required = true)]
        arms: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "fluid,whittle")]
        policies: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value = "lp-dual")]
        priority: String,
        #[arg(long = "tail-tol", default_value_t = 1e-6)]
        tail_tol: f64,
    },
    /// Exact optimal value by count-space value iteration (small N only).
    Oracle {
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run a pinned experiment (slow-steady or benchmark) and check it.
    Repro { name: String },
}

fn validation(msg: impl Into<String>) -> anyhow::Error {
    Error::Parse(msg.into()).into()
}

fn load(global: &Global) -> Result<InstanceFile> {
    let spec = global.instance.as_deref().ok_or_else(|| validation("--instance is required"))?;
    let file = match spec {
        "builtin:slow-steady" => {
            InstanceFile::from_template(&build_slow_and_steady::<ExactRational>(&SlowSteadyParams::pinned())?, None)?
        }
        "builtin:benchmark" => InstanceFile::from_template(&build_benchmark_4state::<ExactRational>(), None)?,
        path => InstanceFile::read(Path::new(path)).with_context(|| format!("reading instance {path}"))?,
    };
    Ok(file)
}

fn instance(global: &Global) -> Result<InstanceF64> {
    Ok(load(global)?.instance(global.arms)?)
}

fn relax(inst: &InstanceF64, truncation: Truncation) -> Result<Relaxation<f64>> {
    Ok(relax_instance(inst, &LpConfig::with_truncation(truncation))?)
}

fn write_out(global: &Global, name: &str, body: &str) -> Result<Option<PathBuf>> {
    let Some(dir) = &global.out else {
        return Ok(None);
    };
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(Some(path))
}

/// Write to stdout; a closed pipe (`rmab ... | head`) ends output quietly.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn solve_lp(global: &Global, truncation: &TruncationArgs) -> Result<()> {
    let inst = instance(global)?;
    let r = relax(&inst, truncation.truncation())?;
    let labels = inst.model().labels();
    let mut occupation = String::from("t,state,action,x\n");
    for t in 1..=r.periods {
        for (s, x) in r.solution.occupation.slice(t).iter().enumerate() {
            for (a, v) in x.iter().enumerate() {
                occupation.push_str(&format!("{t},{},{a},{v}\n", labels[s]));
            }
        }
    }
    write_out(global, "occupation.csv", &occupation)?;
    print_json(&json!({
        "T": r.periods,
        "per_arm_value": r.solution.objective,
        "upper_bound": upper_bound(&r.solution, inst.arms()),
        "duals": r.solution.duals,
        "warnings": r.solution.warnings,
    }))
}

fn whittle(global: &Global, grid: usize) -> Result<()> {
    let model = load(global)?.model::<f64>()?;
    let report = whittle_report(&model, grid);
    let body = if report.indexable {
        json!({ "indexable": true, "indices": report.indices })
    } else {
        let w = report.witness.as_ref().expect("non-indexable reports carry a witness");
        json!({
            "indexable": false,
            "witness": {
                "state": model.label(w.state),
                "state_index": w.state,
                "lambda_lo": w.lambda_lo,
                "lambda_hi": w.lambda_hi,
            },
        })
    };
    print_json(&body)
}

struct SimulateArgs<'a> {
    policy: &'a str,
    reps: usize,
    record_diffusion: bool,
    priority: &'a str,
    sim_horizon: Option<usize>,
    truncation: &'a TruncationArgs,
}

fn simulate(global: &Global, args: SimulateArgs<'_>) -> Result<()> {
    if args.record_diffusion && global.out.is_none() {
        return Err(validation("--record-diffusion needs --out DIR"));
    }
    let kind: PolicyKind = args.policy.parse()?;
    let inst = instance(global)?;
    let priority = PriorityChoice::parse(args.priority, inst.model().n_states())?;
    let r = relax(&inst, args.truncation.truncation())?;
    let config = SimConfig {
        horizon: args.sim_horizon,
        replications: args.reps,
        master_seed: global.seed,
        record_diffusion: args.record_diffusion,
        reference: args.record_diffusion.then(|| r.solution.occupation.clone()),
        threads: global.threads,
        ..SimConfig::default()
    };
    let (row, out) = simulate_cell(&inst, &r, kind, &priority, &config)?;
    let body = to_csv(&[SimulationRow::from(&row)])?;
    emit(&body)?;
    write_out(global, "simulate.csv", &body)?;
    if let Some(d) = &out.diffusion {
        let rows = diffusion_rows(&d.mean_abs_ztilde, &d.std_error, inst.model().n_states());
        write_out(global, "diffusion.csv", &to_csv(&rows)?)?;
    }
    Ok(())
}

fn sweep(global: &Global, arms: &[u64], policies: &[String], reps: usize, priority: &str, tail_tol: f64) -> Result<()> {
    let file = load(global)?;
    let template = file.template::<f64>()?;
    eprintln!("admissible N stride: {}", template.admissible_stride());
    let policies = policies.iter().map(|p| p.parse()).collect::<rmab_core::Result<Vec<PolicyKind>>>()?;
    let n_states = template.model().n_states();
    let mut spec = SweepSpec::new(template, arms.to_vec(), policies);
    spec.replications = reps;
    spec.seed = global.seed;
    spec.tail_tol = tail_tol;
    spec.priority = PriorityChoice::parse(priority, n_states)?;
    spec.threads = global.threads;
    let res = run_sweep(&spec)?;
    let rows = to_csv(&res.rows)?;
    let slopes = to_csv(&res.slopes)?;
    emit(&rows)?;
    eprint!("{slopes}");
    write_out(global, "sweep.csv", &rows)?;
    write_out(global, "slopes.csv", &slopes)?;
    Ok(())
}

/// Counts sit below the oracle guard once it has run.
fn whole(n: u128) -> u64 {
    u64::try_from(n).unwrap_or(u64::MAX)
}

fn oracle(global: &Global, tol: f64) -> Result<()> {
    let inst = instance(global)?;
    let exact = exact_value(&inst, tol)?;
    let r = relax(&inst, Truncation::TailTol(tol))?;
    let fluid = exact_fluid_value(&inst, &r);
    print_json(&json!({
        "V_star": exact.value,
        "lp_upper_bound": upper_bound(&r.solution, inst.arms()),
        "fb_exact": fluid,
        "guards": {
            "count_states": whole(CountSpace::size_of(inst.arms(), inst.model().n_states())),
            "state_actions": whole(exact.state_actions),
            "limit": whole(STATE_ACTION_LIMIT),
        },
    }))
}

/// Exact fluid-balance value over the LP horizon, when it can be computed.
fn exact_fluid_value(inst: &InstanceF64, r: &Relaxation<f64>) -> Option<f64> {
    let policy = make_policy(PolicyKind::FluidBalance, inst, r, &PriorityChoice::LpDual).ok()?;
    exact_policy_value(inst, policy.as_ref(), r.periods).ok().map(|v| v.value)
}

fn run_repro(global: &Global, name: &str) -> Result<ExitCode> {
    let opts = ReproOptions {
        seed: global.seed,
        threads: global.threads,
        out: global.out.clone().unwrap_or_else(|| PathBuf::from("repro")),
    };
    let report = repro(name, &opts)?;
    for c in &report.criteria {
        emit(&format!("{c}\n"))?;
    }
    for (stage, d) in &report.timings {
        eprintln!("{stage}: {:.3}s", d.as_secs_f64());
    }
    eprintln!("bundle: {}", report.dir.display());
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::SolveLp { truncation } => solve_lp(g, truncation)?,
        Command::Whittle { grid } => whittle(g, *grid)?,
        Command::Simulate { policy, reps, record_diffusion, priority, sim_horizon, truncation } => simulate(
            g,
            SimulateArgs {
                policy,
                reps: *reps,
                record_diffusion: *record_diffusion,
                priority,
                sim_horizon: *sim_horizon,
                truncation,
            },
        )?,
        Command::Sweep { arms, policies, reps, priority, tail_tol } => sweep(g, arms, policies, *reps, priority, *tail_tol)?,
        Command::Oracle { tol } => oracle(g, *tol)?,
        Command::Repro { name } => return run_repro(g, name),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}
