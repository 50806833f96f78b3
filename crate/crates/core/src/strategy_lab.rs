//! Brute-force incentive checks run through the full contract pipeline.
//!
//! Every episode builds a fresh contract, submits both schedules with their
//! commitments, posts deposits, plays the spread negotiation and executes.
//! A dealer's payoff is half the reported spread times the executed volume,
//! a large negative sentinel when the executed half-spread is below its
//! true hurdle, and zero on abort.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::audit::{commit_schedule, salts_from_seed};
use crate::contract::{
    filter_feasible, select_trade, Candidate, Client, ContractConfig, ContractState, Deadlines, Event, Phase,
    ProtocolError, ReportedSchedule, Selection, SpreadResponse,
};
use crate::equilibrium::Dealer;
use crate::error::{EngineError, Result};
use crate::fixed::{Fixed, SCALE};
use crate::schedules::SchedulePair;

/// Payoff for executing a trade below one's true hurdle.
pub const HURDLE_SENTINEL: f64 = -1e6;

/// Dominance is checked up to this slack.
pub const DOMINANCE_TOL: f64 = 1e-12;

fn fx(x: f64) -> Result<Fixed> {
    Fixed::from_f64(x).ok_or_else(|| EngineError::config(format!("{x} does not fit the fixed-point range")))
}

fn protocol(e: ProtocolError) -> EngineError {
    EngineError::config(format!("protocol rejected a scripted event: {e}"))
}

/// True schedules, hurdles and protocol settings for a batch of episodes.
#[derive(Debug, Clone)]
pub struct Env {
    pub market: SchedulePair,
    pub grid: Vec<Fixed>,
    pub mm_truth: Vec<Fixed>,
    pub rm_truth: Vec<Fixed>,
    pub kappa_mm: Fixed,
    pub kappa_rm: Fixed,
    pub mm_dealer: String,
    pub rm_dealer: String,
    pub deadlines: Deadlines,
    pub seed: u64,
}

impl Env {
    pub fn new(market: &SchedulePair, grid_size: usize, kappa_mm: f64, kappa_rm: f64, seed: u64) -> Result<Self> {
        if !(kappa_mm >= 0.0 && kappa_rm >= 0.0) {
            return Err(EngineError::config("hurdles must be nonnegative"));
        }
        let d = market.discretize(grid_size)?;
        Ok(Env {
            market: market.clone(),
            grid: d.grid.points().iter().map(|&t| fx(t)).collect::<Result<_>>()?,
            mm_truth: d.r_mm.iter().map(|&r| fx(r)).collect::<Result<_>>()?,
            rm_truth: d.r_rm.iter().map(|&r| fx(r)).collect::<Result<_>>()?,
            kappa_mm: fx(kappa_mm)?,
            kappa_rm: fx(kappa_rm)?,
            mm_dealer: "dealer-mm".into(),
            rm_dealer: "dealer-rm".into(),
            deadlines: Deadlines { commit: 10, negotiate: 20, select: 30, execute: 40 },
            seed,
        })
    }

    /// Same environment with the dealer ids swapped so the other dealer
    /// moves first in the spread negotiation.
    pub fn with_first_mover(&self, first: Dealer) -> Self {
        let mut env = self.clone();
        let (a, b) = ("dealer-a".to_string(), "dealer-b".to_string());
        (env.mm_dealer, env.rm_dealer) = match first {
            Dealer::Mm => (a, b),
            Dealer::Rm => (b, a),
        };
        env
    }

    pub fn first_mover(&self) -> Dealer {
        if self.mm_dealer < self.rm_dealer { Dealer::Mm } else { Dealer::Rm }
    }

    pub fn true_kappa(&self, dealer: Dealer) -> Fixed {
        match dealer {
            Dealer::Mm => self.kappa_mm,
            Dealer::Rm => self.kappa_rm,
        }
    }

    pub fn contract_config(&self) -> ContractConfig {
        let t_max = *self.grid.last().unwrap();
        ContractConfig {
            grid: self.grid.clone(),
            mm_dealer: self.mm_dealer.clone(),
            rm_dealer: self.rm_dealer.clone(),
            deadlines: self.deadlines,
            mm_endowment: t_max,
            rm_endowment: t_max,
        }
    }

    /// Salts used for each side's commitment, derived from the seed.
    pub fn salts(&self, side: Dealer) -> Vec<[u8; 32]> {
        let label = match side {
            Dealer::Mm => "mm",
            Dealer::Rm => "rm",
        };
        salts_from_seed(self.seed, label, self.grid.len())
    }

    /// Scripted events for one episode. The first mover reports `first`;
    /// the second mover's report `second` becomes a raise when it exceeds
    /// `first` and an acceptance otherwise.
    pub fn episode_events(&self, mm_rates: &[Fixed], rm_rates: &[Fixed], first: Fixed, second: Fixed) -> Result<Vec<Event>> {
        let mm = ReportedSchedule::from_rates(&self.mm_dealer, Dealer::Mm, &self.grid, mm_rates);
        let rm = ReportedSchedule::from_rates(&self.rm_dealer, Dealer::Rm, &self.grid, rm_rates);
        let commit = |s: &ReportedSchedule, side| {
            commit_schedule(&s.entries, &self.salts(side)).map(|c| c.root).map_err(|e| EngineError::config(e.to_string()))
        };
        let (mm_root, rm_root) = (commit(&mm, Dealer::Mm)?, commit(&rm, Dealer::Rm)?);
        let t_max = *self.grid.last().unwrap();
        let (first_id, second_id) = match self.first_mover() {
            Dealer::Mm => (self.mm_dealer.clone(), self.rm_dealer.clone()),
            Dealer::Rm => (self.rm_dealer.clone(), self.mm_dealer.clone()),
        };
        let response = if second > first { SpreadResponse::Raise { kappa: second } } else { SpreadResponse::Accept };
        Ok(vec![
            Event::SubmitSchedule { schedule: mm, commitment: mm_root },
            Event::SubmitSchedule { schedule: rm, commitment: rm_root },
            Event::PostDeposit { client: Client::MoneyMarket, amount: t_max },
            Event::PostDeposit { client: Client::RepoMarket, amount: t_max },
            Event::SubmitFirstSpread { dealer_id: first_id, kappa: first },
            Event::RespondSpread { dealer_id: second_id, response },
            Event::RequestExecute,
            Event::RequestExecute,
        ])
    }

    /// Runs one episode to a terminal state.
    pub fn run_episode(&self, mm_rates: &[Fixed], rm_rates: &[Fixed], first: Fixed, second: Fixed) -> Result<ContractState> {
        let mut state = ContractState::genesis(self.contract_config()).map_err(protocol)?;
        for event in self.episode_events(mm_rates, rm_rates, first, second)? {
            if state.phase.is_terminal() {
                break;
            }
            state = state.apply_event(event).map_err(protocol)?;
        }
        Ok(state)
    }

    /// Episode with truthful spread reports from both dealers.
    pub fn run_truthful_spreads(&self, mm_rates: &[Fixed], rm_rates: &[Fixed]) -> Result<ContractState> {
        let (first, second) = match self.first_mover() {
            Dealer::Mm => (self.kappa_mm, self.kappa_rm),
            Dealer::Rm => (self.kappa_rm, self.kappa_mm),
        };
        self.run_episode(mm_rates, rm_rates, first, second)
    }

    pub fn payoff(&self, dealer: Dealer, state: &ContractState) -> f64 {
        dealer_payoff(state, self.true_kappa(dealer))
    }
}

/// Payoff of a dealer with true hurdle `kappa` from a finished episode.
pub fn dealer_payoff(state: &ContractState, kappa: Fixed) -> f64 {
    match (state.phase, state.outcome) {
        (Phase::Settled, Some(sel)) => {
            let c = Candidate { volume: sel.volume, r_mm: sel.r_mm, r_rm: sel.r_rm };
            if !c.clears(kappa) {
                HURDLE_SENTINEL
            } else {
                c.profit() as f64 / (2.0 * (SCALE as f64) * (SCALE as f64))
            }
        }
        _ => 0.0,
    }
}

/// Uniform rate offsets plus the random per-point fuzz tier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSpace {
    pub mm_offsets: Vec<f64>,
    pub rm_offsets: Vec<f64>,
    pub fuzz_samples: usize,
    pub fuzz_max_offset: f64,
}

impl DeviationSpace {
    /// Offsets `k * step` for `k = 0..=max/step`, filtered so the money-market
    /// side only reports higher rates and the repo-market side only lower
    /// ones (clients never accept worse than their own schedule).
    pub fn uniform(step: f64, max: f64, fuzz_samples: usize) -> Result<Self> {
        if !(step > 0.0 && max >= 0.0) {
            return Err(EngineError::config("deviation step must be positive"));
        }
        let n = (max / step).round() as i64;
        let candidates: Vec<f64> = (-n..=n).map(|k| k as f64 * step).collect();
        Ok(DeviationSpace {
            mm_offsets: candidates.iter().copied().filter(|&o| o >= 0.0).collect(),
            rm_offsets: candidates.iter().copied().filter(|&o| o <= 0.0).collect(),
            fuzz_samples,
            fuzz_max_offset: max,
        })
    }

    pub fn offsets(&self, dealer: Dealer) -> &[f64] {
        match dealer {
            Dealer::Mm => &self.mm_offsets,
            Dealer::Rm => &self.rm_offsets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffCell {
    pub dealer: Dealer,
    pub own: String,
    pub opponent: String,
    pub payoff: f64,
    pub truthful_payoff: f64,
    pub gain: f64,
    pub kappa_hat: Option<Fixed>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub cells: Vec<PayoffCell>,
    /// Largest deviation gain over truthful reporting; dominance means this
    /// is at most zero (up to [`DOMINANCE_TOL`]).
    pub max_gain: f64,
    pub witness: Option<PayoffCell>,
    /// Executed trades that missed a dealer's true hurdle although both
    /// spreads were reported truthfully.
    pub hurdle_violations: usize,
}

impl SimulationReport {
    fn from_cells(scenario: &str, cells: Vec<PayoffCell>, hurdle_violations: usize) -> Self {
        let witness = cells.iter().filter(|c| c.gain > DOMINANCE_TOL).max_by(|a, b| a.gain.total_cmp(&b.gain)).cloned();
        let max_gain = cells.iter().map(|c| c.gain).fold(f64::NEG_INFINITY, f64::max);
        SimulationReport { scenario: scenario.to_string(), cells, max_gain, witness, hurdle_violations }
    }

    pub fn dominance_holds(&self) -> bool {
        self.max_gain <= DOMINANCE_TOL
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "dealer", "own", "opponent", "payoff", "truthful_payoff", "gain", "kappa_hat"])?;
        for c in &self.cells {
            w.write_record([
                self.scenario.clone(),
                format!("{:?}", c.dealer).to_lowercase(),
                c.own.clone(),
                c.opponent.clone(),
                format!("{:.9}", c.payoff),
                format!("{:.9}", c.truthful_payoff),
                format!("{:.9}", c.gain),
                c.kappa_hat.map(|k| k.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn shifted(rates: &[Fixed], offset: f64) -> Result<Vec<Fixed>> {
    let o = fx(offset)?;
    rates
        .iter()
        .map(|r| r.checked_add(o).ok_or_else(|| EngineError::config("rate offset overflows")))
        .collect()
}

fn executed_hurdle_violation(env: &Env, state: &ContractState) -> bool {
    match state.outcome {
        Some(sel) if state.phase == Phase::Settled => {
            let c = Candidate { volume: sel.volume, r_mm: sel.r_mm, r_rm: sel.r_rm };
            !(c.clears(env.kappa_mm) && c.clears(env.kappa_rm))
        }
        _ => false,
    }
}

/// Each dealer misreports its client schedule by every offset in the space
/// against every opponent offset, plus the per-point fuzz tier against a
/// truthful opponent; spreads are reported truthfully throughout.
pub fn sweep_schedule_misreports(env: &Env, space: &DeviationSpace) -> Result<SimulationReport> {
    let mut jobs: Vec<(Dealer, String, Vec<Fixed>, String, Vec<Fixed>)> = Vec::new();
    for dealer in [Dealer::Mm, Dealer::Rm] {
        let other = match dealer {
            Dealer::Mm => Dealer::Rm,
            Dealer::Rm => Dealer::Mm,
        };
        let (own_truth, opp_truth) = match dealer {
            Dealer::Mm => (&env.mm_truth, &env.rm_truth),
            Dealer::Rm => (&env.rm_truth, &env.mm_truth),
        };
        for &p in space.offsets(other) {
            let opp = shifted(opp_truth, p)?;
            for &o in space.offsets(dealer) {
                jobs.push((dealer, format!("{o:+.3}"), shifted(own_truth, o)?, format!("{p:+.3}"), opp.clone()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
        rng.set_stream(match dealer {
            Dealer::Mm => 1,
            Dealer::Rm => 2,
        });
        for k in 0..space.fuzz_samples {
            jobs.push((dealer, format!("fuzz-{k}"), fuzzed(own_truth, dealer, space.fuzz_max_offset, &mut rng)?, "+0.000".into(), opp_truth.clone()));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(dealer, own_label, own, opp_label, opp)| {
            let (mm, rm) = match dealer {
                Dealer::Mm => (own, opp),
                Dealer::Rm => (opp, own),
            };
            let (mm_t, rm_t) = match dealer {
                Dealer::Mm => (&env.mm_truth, opp),
                Dealer::Rm => (opp, &env.rm_truth),
            };
            let dev = env.run_truthful_spreads(mm, rm)?;
            let truth = env.run_truthful_spreads(mm_t, rm_t)?;
            let (payoff, truthful_payoff) = (env.payoff(*dealer, &dev), env.payoff(*dealer, &truth));
            let violations = executed_hurdle_violation(env, &dev) as usize + executed_hurdle_violation(env, &truth) as usize;
            Ok((
                PayoffCell {
                    dealer: *dealer,
                    own: own_label.clone(),
                    opponent: opp_label.clone(),
                    payoff,
                    truthful_payoff,
                    gain: payoff - truthful_payoff,
                    kappa_hat: dev.spread_constraint,
                },
                violations,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = rows.iter().map(|r| r.1).sum();
    Ok(SimulationReport::from_cells("schedule-misreports", rows.into_iter().map(|r| r.0).collect(), violations))
}

/// Independent per-point offsets, then a running max (mm) or min (rm) so
/// the report stays monotone and on the client-acceptable side.
fn fuzzed(truth: &[Fixed], dealer: Dealer, max: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Fixed>> {
    let mut out: Vec<Fixed> = Vec::with_capacity(truth.len());
    for &r in truth {
        let o = fx(rng.gen_range(0.0..=max))?;
        let candidate = match dealer {
            Dealer::Mm => Fixed(r.raw() + o.raw()),
            Dealer::Rm => Fixed(r.raw() - o.raw()),
        };
        let next = match (dealer, out.last()) {
            (Dealer::Mm, Some(&prev)) => candidate.max(prev),
            (Dealer::Rm, Some(&prev)) => candidate.min(prev),
            (_, None) => candidate,
        };
        out.push(next);
    }
    Ok(out)
}

/// One path of the negotiation game: first report, second report and the
/// resulting constraint and trade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadPath {
    pub first: Fixed,
    pub second: Fixed,
    pub kappa_hat: Fixed,
    pub outcome: Option<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoverOrderAnalysis {
    pub first_mover: Dealer,
    pub truthful_path: SpreadPath,
    pub spe_paths: Vec<SpreadPath>,
    /// Constraint the truthful path would reach, `max(kappa_mm, kappa_rm)`.
    pub h: Fixed,
    pub all_spe_kappa_is_h: bool,
    /// Every equilibrium path executes the same trade as the truthful one.
    pub all_spe_outcome_equivalent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadSweepReport {
    pub report: SimulationReport,
    pub orders: Vec<MoverOrderAnalysis>,
}

/// Plays every pair of spread reports from `candidates` in both mover
/// orders with truthful schedules, checks weak dominance of truthful
/// reporting for each role, and enumerates the subgame-perfect paths.
pub fn sweep_spread_misreports(env: &Env, candidates: &[f64]) -> Result<SpreadSweepReport> {
    let reports: Vec<Fixed> = candidates.iter().map(|&k| fx(k)).collect::<Result<_>>()?;
    for k in [env.kappa_mm, env.kappa_rm] {
        if !reports.contains(&k) {
            return Err(EngineError::config(format!("candidate reports must include the true hurdle {k}")));
        }
    }
    let mut cells = Vec::new();
    let mut orders = Vec::new();
    for first_mover in [Dealer::Mm, Dealer::Rm] {
        let e = env.with_first_mover(first_mover);
        let second_mover = match first_mover {
            Dealer::Mm => Dealer::Rm,
            Dealer::Rm => Dealer::Mm,
        };
        let n = reports.len();
        let grid: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let states = grid
            .par_iter()
            .map(|&(i, j)| e.run_episode(&e.mm_truth, &e.rm_truth, reports[i], reports[j]))
            .collect::<Result<Vec<_>>>()?;
        let u = |d: Dealer, i: usize, j: usize| e.payoff(d, &states[i * n + j]);
        let truth1 = reports.iter().position(|&k| k == e.true_kappa(first_mover)).unwrap();
        let truth2 = reports.iter().position(|&k| k == e.true_kappa(second_mover)).unwrap();
        let role = |d: Dealer, first: bool| format!("{}{}", if first { "first-" } else { "second-" }, format!("{d:?}").to_lowercase());
        for i in 0..n {
            for j in 0..n {
                let k_hat = states[i * n + j].spread_constraint;
                cells.push(PayoffCell {
                    dealer: first_mover,
                    own: format!("{}:{}", role(first_mover, true), reports[i]),
                    opponent: reports[j].to_string(),
                    payoff: u(first_mover, i, j),
                    truthful_payoff: u(first_mover, truth1, j),
                    gain: u(first_mover, i, j) - u(first_mover, truth1, j),
                    kappa_hat: k_hat,
                });
                cells.push(PayoffCell {
                    dealer: second_mover,
                    own: format!("{}:{}", role(second_mover, false), reports[j]),
                    opponent: reports[i].to_string(),
                    payoff: u(second_mover, i, j),
                    truthful_payoff: u(second_mover, i, truth2),
                    gain: u(second_mover, i, j) - u(second_mover, i, truth2),
                    kappa_hat: k_hat,
                });
            }
        }

        let best_responses: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let best = (0..n).map(|j| u(second_mover, i, j)).fold(f64::NEG_INFINITY, f64::max);
                (0..n).filter(|&j| u(second_mover, i, j) >= best - DOMINANCE_TOL).collect()
            })
            .collect();
        let worst_for_first: Vec<f64> = (0..n)
            .map(|i| best_responses[i].iter().map(|&j| u(first_mover, i, j)).fold(f64::INFINITY, f64::min))
            .collect();
        let path = |i: usize, j: usize| {
            let s = &states[i * n + j];
            SpreadPath {
                first: reports[i],
                second: reports[j],
                kappa_hat: s.spread_constraint.unwrap_or(Fixed::ZERO),
                outcome: if s.phase == Phase::Settled { s.outcome } else { None },
            }
        };
        let mut spe_paths = Vec::new();
        for i in 0..n {
            for &j in &best_responses[i] {
                let value = u(first_mover, i, j);
                if worst_for_first.iter().all(|&w| w <= value + DOMINANCE_TOL) {
                    spe_paths.push(path(i, j));
                }
            }
        }
        let h = env.kappa_mm.max(env.kappa_rm);
        let truthful_path = path(truth1, truth2);
        orders.push(MoverOrderAnalysis {
            first_mover,
            all_spe_kappa_is_h: spe_paths.iter().all(|p| p.kappa_hat == h),
            all_spe_outcome_equivalent: spe_paths.iter().all(|p| p.outcome == truthful_path.outcome),
            truthful_path,
            spe_paths,
            h,
        });
    }
    Ok(SpreadSweepReport { report: SimulationReport::from_cells("spread-misreports", cells, 0), orders })
}

/// One candidate equilibrium for the selection-risk comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskCandidate {
    pub r_mm: f64,
    pub r_rm: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRiskReport {
    pub expected_half_spread: f64,
    pub hurdle: f64,
    /// Whether the ex-ante expected half-spread clears the hurdle.
    pub trades_without_protocol: bool,
    /// Index and half-spread of the protocol's choice; `None` means abort.
    pub protocol_choice: Option<(usize, f64)>,
}

/// Compares allocating on the expected half-spread across equilibria with
/// the protocol's hurdle-filtered joint-profit choice.
pub fn selection_risk_demo(equilibria: &[RiskCandidate], weights: &[f64], hurdle: f64) -> Result<SelectionRiskReport> {
    if equilibria.is_empty() || equilibria.len() != weights.len() {
        return Err(EngineError::config("one weight per equilibrium required"));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(EngineError::config(format!("weights must be nonnegative and sum to 1, got {total}")));
    }
    let expected_half_spread = equilibria.iter().zip(weights).map(|(e, w)| w * 0.5 * (e.r_rm - e.r_mm)).sum::<f64>();
    let candidates: Vec<Candidate> = equilibria
        .iter()
        .map(|e| Ok(Candidate { volume: fx(e.volume)?, r_mm: fx(e.r_mm)?, r_rm: fx(e.r_rm)? }))
        .collect::<Result<_>>()?;
    let choice = select_trade(&candidates, &filter_feasible(&candidates, fx(hurdle)?));
    Ok(SelectionRiskReport {
        expected_half_spread,
        hurdle,
        trades_without_protocol: expected_half_spread >= hurdle,
        protocol_choice: choice.map(|s| (s.index, 0.5 * (s.r_rm.to_f64() - s.r_mm.to_f64()))),
    })
}
