//! Command-line driver: one subcommand per engine module.
//!
//! Exit status is 0 on success, 1 on a domain error (one line on stderr)
//! and 2 on a usage error.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use repomech::audit::{build_transcript, verify_transcript_bytes, ExpectedRoots, StubSealer, Verdict};
use repomech::bayesian::{TargetGame, TypeRange};
use repomech::contract::{ContractState, Event};
use repomech::equilibrium::{
    enumeration_seeds, equilibrium_from_seed, jpm, jpm_constrained, write_equilibria_csv, Dealer, EquilibriumPoint,
};
use repomech::strategy_lab::{sweep_schedule_misreports, sweep_spread_misreports, DeviationSpace, Env};
use repomech::EngineError;

pub use config::{load_config, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "repomech", version, about = "Repo dealer equilibria, joint-profit selection and the escrow protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the money-market dealer's hurdle.
    #[arg(long)]
    kappa_mm: Option<f64>,
    /// Override the repo-market dealer's hurdle.
    #[arg(long)]
    kappa_rm: Option<f64>,
    /// Override the number of grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate balanced Nash equilibria from seeds on the money-market rate.
    Eq {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Joint profit maximization, constrained by max(kappa_mm, kappa_rm).
    Jpm {
        #[command(flatten)]
        common: Common,
    },
    /// Run the escrow contract, scripted truthfully or from an events file.
    Protocol {
        #[command(flatten)]
        common: Common,
        /// JSON array of events to apply instead of the truthful script.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Include the auditor opening in the transcript.
        #[arg(long)]
        auditor: bool,
    },
    /// Transcript verification.
    Audit {
        #[command(subcommand)]
        action: AuditAction,
    },
    /// Schedule and spread misreport sweeps.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 1000)]
        fuzz: usize,
    },
    /// Volume-targeting equilibrium under private client shocks.
    Bayes {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        volume: f64,
        #[arg(long, default_value_t = 1000)]
        draws: u64,
        #[arg(long, default_value_t = 1.0)]
        theta_lo: f64,
        #[arg(long, default_value_t = 2.0)]
        theta_hi: f64,
    },
}

#[derive(Subcommand, Debug)]
enum AuditAction {
    Verify {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        roots: PathBuf,
    },
}

/// Parses `argv` (program name first) and runs the command.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            1
        }
    }
}

type Run = Result<i32, String>;

fn domain(e: EngineError) -> String {
    e.to_string()
}

struct Ctx {
    cfg: RunConfig,
    kappa_mm: f64,
    kappa_rm: f64,
    grid: usize,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

impl Ctx {
    fn load(c: &Common) -> Result<Self, String> {
        let cfg = load_config(&c.config).map_err(domain)?;
        for k in [c.kappa_mm, c.kappa_rm].into_iter().flatten() {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(format!("hurdles must be nonnegative, got {k}"));
            }
        }
        if c.grid.is_some_and(|g| g < 2) {
            return Err("grid needs at least 2 points".into());
        }
        Ok(Ctx {
            kappa_mm: c.kappa_mm.unwrap_or(cfg.kappa_mm),
            kappa_rm: c.kappa_rm.unwrap_or(cfg.kappa_rm),
            grid: c.grid.unwrap_or(cfg.grid),
            out: c.out.clone().or_else(|| cfg.out.clone()),
            jobs: c.jobs,
            cfg,
        })
    }

    fn env(&self) -> Result<Env, String> {
        let mut env = Env::new(&self.cfg.market, self.grid, self.kappa_mm, self.kappa_rm, self.cfg.seed).map_err(domain)?;
        env.deadlines = self.cfg.deadlines;
        Ok(env)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), String> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        }
        Ok(())
    }

    fn parallel<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R, String> {
        match self.jobs {
            None => Ok(f()),
            Some(0) => Err("--jobs must be at least 1".into()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?;
                Ok(pool.install(f))
            }
        }
    }
}

fn dispatch(command: Command) -> Run {
    match command {
        Command::Eq { common, seeds } => eq(&Ctx::load(&common)?, seeds),
        Command::Jpm { common } => run_jpm(&Ctx::load(&common)?),
        Command::Protocol { common, events, auditor } => protocol(&Ctx::load(&common)?, events.as_deref(), auditor),
        Command::Audit { action: AuditAction::Verify { transcript, roots } } => verify(&transcript, &roots),
        Command::Sweep { common, step, fuzz } => sweep(&Ctx::load(&common)?, step, fuzz),
        Command::Bayes { common, volume, draws, theta_lo, theta_hi } => {
            bayes(&Ctx::load(&common)?, volume, draws, theta_lo, theta_hi)
        }
    }
}

fn eq(ctx: &Ctx, seeds: usize) -> Run {
    let rows: Vec<(f64, EquilibriumPoint)> = enumeration_seeds(&ctx.cfg.market, seeds)
        .into_iter()
        .map(|s| equilibrium_from_seed(&ctx.cfg.market, s).map(|p| (s, p)))
        .collect::<Result<_, _>>()
        .map_err(domain)?;
    let mut buf = Vec::new();
    write_equilibria_csv(&mut buf, &rows).map_err(|e| e.to_string())?;
    ctx.write("equilibria.csv", &buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(0)
}

fn run_jpm(ctx: &Ctx) -> Run {
    let kappa = ctx.kappa_mm.max(ctx.kappa_rm);
    let point = if kappa > 0.0 {
        match jpm_constrained(&ctx.cfg.market, kappa).map_err(domain)? {
            Some(p) => p,
            None => {
                println!("kappa={kappa:.9}");
                println!("abort: no volume clears the hurdle");
                return Ok(0);
            }
        }
    } else {
        jpm(&ctx.cfg.market).map_err(domain)?
    };
    let text = format!(
        "kappa={kappa:.9}\nT*={:.9}\nr_mm*={:.9}\nr_rm*={:.9}\nspread={:.9}\nprofit={:.9}\n",
        point.volume,
        point.pair.r_mm,
        point.pair.r_rm,
        point.spread(),
        point.joint_profit
    );
    ctx.write("jpm.txt", text.as_bytes())?;
    print!("{text}");
    Ok(0)
}

fn protocol(ctx: &Ctx, events: Option<&Path>, auditor: bool) -> Run {
    let env = ctx.env()?;
    let script: Vec<Event> = match events {
        Some(path) => {
            let text = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_slice(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => {
            let (first, second) = match env.first_mover() {
                Dealer::Mm => (env.kappa_mm, env.kappa_rm),
                Dealer::Rm => (env.kappa_rm, env.kappa_mm),
            };
            env.episode_events(&env.mm_truth, &env.rm_truth, first, second).map_err(domain)?
        }
    };
    let mut state = ContractState::genesis(env.contract_config()).map_err(|e| e.to_string())?;
    for (i, event) in script.iter().enumerate() {
        match state.apply_event(event.clone()) {
            Ok(next) => state = next,
            Err(e) => eprintln!("event {i} ({}) rejected: {e}", event.name()),
        }
    }
    if !state.phase.is_terminal() {
        return Err(format!("events ended in phase {:?}; add ticks past the deadline or complete the run", state.phase));
    }
    let transcript = build_transcript(&state, &env.salts(Dealer::Mm), &env.salts(Dealer::Rm), &StubSealer, auditor)
        .map_err(|e| e.to_string())?;
    let roots = ExpectedRoots { mm_root: transcript.mm_root, rm_root: transcript.rm_root };
    ctx.write("events.json", pretty(&script).as_bytes())?;
    ctx.write("state.json", state.to_canonical_json().as_bytes())?;
    ctx.write("transcript.json", transcript.to_canonical_json().as_bytes())?;
    ctx.write("roots.json", pretty(&roots).as_bytes())?;
    println!("phase={:?}", state.phase);
    if let Some(k) = state.spread_constraint {
        println!("kappa_hat={k}");
    }
    match (state.outcome, &state.abort_reason) {
        (Some(sel), None) => {
            println!("index={}\nT*={}\nr_mm*={}\nr_rm*={}\nr_bd={}", sel.index, sel.volume, sel.r_mm, sel.r_rm, sel.r_bd)
        }
        (_, Some(reason)) => println!("abort_reason={reason}"),
        _ => {}
    }
    Ok(0)
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn verify(transcript: &Path, roots: &Path) -> Run {
    let bytes = fs::read(transcript).map_err(|e| format!("cannot read {}: {e}", transcript.display()))?;
    let roots_text = fs::read(roots).map_err(|e| format!("cannot read {}: {e}", roots.display()))?;
    let expected: ExpectedRoots = serde_json::from_slice(&roots_text).map_err(|e| format!("{}: {e}", roots.display()))?;
    let verdict = verify_transcript_bytes(&bytes, &expected, &StubSealer);
    println!("{verdict}");
    Ok(match verdict {
        Verdict::Fail(_) => 1,
        _ => 0,
    })
}

fn sweep(ctx: &Ctx, step: f64, fuzz: usize) -> Run {
    let env = ctx.env()?;
    let space = DeviationSpace::uniform(step, 0.5, fuzz).map_err(domain)?;
    let mut candidates: Vec<f64> = (0..=7).map(|k| k as f64 * 0.5).chain([ctx.kappa_mm, ctx.kappa_rm]).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (schedules, spreads) = ctx.parallel(|| {
        (sweep_schedule_misreports(&env, &space), sweep_spread_misreports(&env, &candidates))
    })?;
    let (schedules, spreads) = (schedules.map_err(domain)?, spreads.map_err(domain)?);
    let mut a = Vec::new();
    schedules.write_csv(&mut a).map_err(|e| e.to_string())?;
    let mut b = Vec::new();
    spreads.report.write_csv(&mut b).map_err(|e| e.to_string())?;
    ctx.write("schedule_sweep.csv", &a)?;
    ctx.write("spread_sweep.csv", &b)?;
    ctx.write("spread_paths.json", pretty(&spreads.orders).as_bytes())?;
    println!("schedule_cells={}", schedules.cells.len());
    println!("schedule_max_gain={:.9}", schedules.max_gain);
    println!("hurdle_violations={}", schedules.hurdle_violations);
    println!("spread_cells={}", spreads.report.cells.len());
    println!("spread_max_gain={:.9}", spreads.report.max_gain);
    for o in &spreads.orders {
        println!(
            "first_mover={:?} spe_paths={} kappa_hat_is_max={} outcome_equivalent={}",
            o.first_mover,
            o.spe_paths.len(),
            o.all_spe_kappa_is_h,
            o.all_spe_outcome_equivalent
        );
    }
    let dominated = schedules.dominance_holds() && spreads.report.dominance_holds();
    println!("truthful_dominant={dominated}");
    Ok(0)
}

fn bayes(ctx: &Ctx, volume: f64, draws: u64, lo: f64, hi: f64) -> Run {
    let range = || TypeRange::uniform(lo, hi).map_err(domain);
    let game = TargetGame::new(&ctx.cfg.market, range()?, range()?).map_err(domain)?;
    let verdict = game.check_target_equilibrium(volume).map_err(domain)?;
    let report = ctx.parallel(|| game.monte_carlo_deviation(volume, draws, ctx.grid, ctx.cfg.seed))?.map_err(domain)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(|e| e.to_string())?;
    ctx.write("bayes_draws.csv", &buf)?;
    println!("T={volume:.9}");
    println!("holds={}", verdict.holds);
    println!("margin_mm={:.9}", verdict.margin_mm);
    println!("margin_rm={:.9}", verdict.margin_rm);
    println!("draws={draws}");
    println!("max_gain={:.9e}", report.max_gain);
    Ok(0)
}
