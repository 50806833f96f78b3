//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! nonzero if any criterion fails for a reason not listed in `KNOWN_GAPS`.
//!
//! Run alone with `cargo test -p repomech --test acceptance`.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use repomech::audit::{build_transcript, prove_membership, verify_transcript_bytes, ExpectedRoots, StubSealer, Verdict};
use repomech::bayesian::{TargetGame, TypeRange};
use repomech::contract::{
    filter_feasible, select_trade, Asset, Candidate, Client, ContractState, Event, Party, Phase, ReportedSchedule,
    ScheduleEntry, SpreadResponse,
};
use repomech::digest::Digest;
use repomech::equilibrium::{equilibrium_from_seed, is_nash, jpm, jpm_constrained, Dealer, RatePair};
use repomech::fixed::Fixed;
use repomech::schedules::SchedulePair;
use repomech::strategy_lab::{
    selection_risk_demo, sweep_schedule_misreports, sweep_spread_misreports, DeviationSpace, Env, RiskCandidate,
};

/// Clauses that cannot hold as stated. Each still runs and is reported as
/// a failure; it just does not fail the process.
const KNOWN_GAPS: &[(u32, &str, &str)] = &[(
    8,
    "boundary-at-sqrt(5/3)",
    "both worst-type margins vanish at T = sqrt(1.5); sqrt(5/3) is outside the pass region by more than one grid step",
)];

struct Clause {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn clause(name: &'static str, pass: bool, detail: impl Into<String>) -> Clause {
    Clause { name, pass, detail: detail.into() }
}

fn reference() -> SchedulePair {
    SchedulePair::symmetric_sqrt(6.0).unwrap()
}

fn fx(x: f64) -> Fixed {
    Fixed::from_f64(x).unwrap()
}

fn jpm_reference() -> Vec<Clause> {
    let m = reference();
    let start = Instant::now();
    let p = jpm(&m).unwrap();
    let elapsed = start.elapsed();
    // grid oracle straight from the closed-form inverses
    let (mut best_t, mut best_pi) = (0.0, f64::NEG_INFINITY);
    let mut t = 0.0;
    while t <= 3f64.sqrt() {
        let pi = ((6.0 - t * t) - t * t) * t;
        if pi > best_pi {
            (best_t, best_pi) = (t, pi);
        }
        t += 1e-4;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    vec![
        clause(
            "closed-form",
            close(p.volume, 1.0) && close(p.pair.r_mm, 1.0) && close(p.pair.r_rm, 5.0) && close(p.joint_profit, 4.0),
            format!("T*={:.9} r_mm*={:.9} r_rm*={:.9} profit={:.9}", p.volume, p.pair.r_mm, p.pair.r_rm, p.joint_profit),
        ),
        clause("grid-oracle", (best_t - p.volume).abs() <= 1e-4, format!("oracle T={best_t:.4}")),
        clause("runtime", elapsed < Duration::from_secs(1), format!("{elapsed:.2?}")),
    ]
}

fn constrained_jpm() -> Vec<Clause> {
    let m = reference();
    let p = jpm_constrained(&m, 2.5).unwrap();
    let above = jpm_constrained(&m, 3.1).unwrap();
    let (t, pi) = p.map(|p| (p.volume, p.joint_profit)).unwrap_or((f64::NAN, f64::NAN));
    vec![
        clause("boundary-volume", (t - 0.5f64.sqrt()).abs() <= 1e-6, format!("T*={t:.9}")),
        clause("boundary-profit", (pi - 3.535534).abs() <= 1e-5, format!("profit={pi:.9}")),
        clause("abort-above-max", above.is_none(), format!("kappa 3.1 -> {:?}", above.map(|p| p.volume))),
    ]
}

fn selection_risk() -> Vec<Clause> {
    let eq = [RiskCandidate { r_mm: 6.0, r_rm: 12.0, volume: 1.0 }, RiskCandidate { r_mm: 6.0, r_rm: 8.0, volume: 1.0 }];
    let r = selection_risk_demo(&eq, &[0.5, 0.5], 2.5).unwrap();
    vec![
        clause("expected-half-spread", r.expected_half_spread == 2.0, format!("E={}", r.expected_half_spread)),
        clause("no-trade-on-expectation", !r.trades_without_protocol, ""),
        clause("protocol-picks-3", r.protocol_choice.map(|c| c.1) == Some(3.0), format!("{:?}", r.protocol_choice)),
    ]
}

fn no_excess_inventory() -> Vec<Clause> {
    let m = reference();
    let r_hat = m.crossing_rate();
    let mut worst_gap = 0.0f64;
    let mut all_nash = true;
    for k in 1..=100 {
        let p = equilibrium_from_seed(&m, r_hat * k as f64 / 100.0).unwrap();
        let gap = (m.demand().eval(p.pair.r_mm).unwrap() - m.supply().eval(p.pair.r_rm).unwrap()).abs();
        worst_gap = worst_gap.max(gap);
        all_nash &= p.is_nash && is_nash(&m, p.pair).unwrap().is_nash;
    }
    vec![
        clause("balanced", worst_gap <= 1e-8, format!("max |D-S|={worst_gap:.1e}")),
        clause("nash", all_nash, "100 seeds"),
    ]
}

fn multiplicity() -> Vec<Clause> {
    let m = reference();
    let r_hat = m.crossing_rate();
    let volumes: Vec<f64> =
        (1..=20).map(|k| equilibrium_from_seed(&m, 0.2 * r_hat * k as f64 / 20.0).unwrap().volume).collect();
    let increasing = volumes.windows(2).all(|w| w[1] > w[0]);
    vec![clause(
        "distinct-increasing",
        increasing && volumes.len() == 20,
        format!("T from {:.6} to {:.6}", volumes[0], volumes[19]),
    )]
}

/// Dealer payoffs written out directly from the schedules, independent of
/// the equilibrium module.
fn oracle_payoff(m: &SchedulePair, dealer: Dealer, r_mm: f64, r_rm: f64) -> f64 {
    let d = m.demand().eval(r_mm).unwrap();
    let s = m.supply().eval(r_rm).unwrap();
    let q = d.min(s);
    let spread = 0.5 * (r_rm - r_mm).max(0.0) * q;
    match dealer {
        Dealer::Mm => spread - r_mm * (d - q),
        Dealer::Rm => spread - r_rm * (s - q),
    }
}

fn deviation_scan(rb: f64, at: f64) -> Vec<f64> {
    let mut points: Vec<f64> = (0..250).map(|k| rb * k as f64 / 249.0).collect();
    for j in 0..125 {
        let delta = 10f64.powf(-1.0 - 10.0 * j as f64 / 124.0);
        points.extend([at - delta, at + delta]);
    }
    points.retain(|&r| (0.0..=rb).contains(&r));
    points
}

fn oracle_is_nash(m: &SchedulePair, r_mm: f64, r_rm: f64) -> bool {
    let rb = m.rate_bound();
    let base_mm = oracle_payoff(m, Dealer::Mm, r_mm, r_rm);
    let base_rm = oracle_payoff(m, Dealer::Rm, r_mm, r_rm);
    deviation_scan(rb, r_mm).iter().all(|&r| oracle_payoff(m, Dealer::Mm, r, r_rm) - base_mm <= 1e-12)
        && deviation_scan(rb, r_rm).iter().all(|&r| oracle_payoff(m, Dealer::Rm, r_mm, r) - base_rm <= 1e-12)
}

fn nash_oracle() -> Vec<Clause> {
    let start = Instant::now();
    let base = reference();
    let cells: Vec<(f64, f64)> = (0..50)
        .flat_map(|i| (0..50).map(move |j| (0.5 + 2.5 * i as f64 / 49.0, j as f64 / 49.0)))
        .collect();
    let results: Vec<(bool, bool)> = cells
        .par_iter()
        .map(|&(theta, frac)| {
            let m = base.with_shocks(theta, 1.0).unwrap();
            let r_mm = frac * m.crossing_rate();
            let r_rm = m.balanced_counterpart(r_mm).unwrap();
            (is_nash(&m, RatePair::new(r_mm, r_rm)).unwrap().is_nash, oracle_is_nash(&m, r_mm, r_rm))
        })
        .collect();
    let elapsed = start.elapsed();
    let agree = results.iter().filter(|(a, b)| a == b).count();
    let nash = results.iter().filter(|r| r.0).count();
    vec![
        clause("agreement", agree == cells.len(), format!("{agree}/{} cells agree, {nash} Nash", cells.len())),
        clause("runtime", elapsed < Duration::from_secs(60), format!("{elapsed:.2?}")),
    ]
}

fn truthful_dominance() -> Vec<Clause> {
    let env = Env::new(&reference(), 101, 1.0, 2.5, 11).unwrap();
    let schedules = sweep_schedule_misreports(&env, &DeviationSpace::uniform(0.05, 0.5, 1000).unwrap()).unwrap();
    let candidates: Vec<f64> = (0..=7).map(|k| k as f64 * 0.5).collect();
    let spreads = sweep_spread_misreports(&env, &candidates).unwrap();
    let zero = Env::new(&reference(), 101, 0.0, 0.0, 11).unwrap();
    let zero_spreads = sweep_spread_misreports(&zero, &candidates).unwrap();
    let spe_ok = spreads.orders.iter().all(|o| !o.spe_paths.is_empty() && o.all_spe_kappa_is_h);
    let zero_ok = zero_spreads.orders.iter().all(|o| o.truthful_path.kappa_hat == Fixed::ZERO && o.all_spe_outcome_equivalent);
    let strict = |r: &repomech::strategy_lab::SimulationReport| r.cells.iter().filter(|c| c.gain > 1e-12).count();
    vec![
        clause(
            "schedule-sweep",
            strict(&schedules) == 0 && schedules.hurdle_violations == 0,
            format!("{} cells, max gain {:.1e}", schedules.cells.len(), schedules.max_gain),
        ),
        clause(
            "spread-sweep",
            strict(&spreads.report) == 0 && strict(&zero_spreads.report) == 0,
            format!("{} cells", spreads.report.cells.len() + zero_spreads.report.cells.len()),
        ),
        clause(
            "spe-kappa-is-max",
            spe_ok,
            spreads.orders.iter().map(|o| format!("{:?}-first: {} paths", o.first_mover, o.spe_paths.len())).collect::<Vec<_>>().join(", "),
        ),
        clause("zero-hurdles", zero_ok, ""),
    ]
}

fn bayesian_target() -> Vec<Clause> {
    let game = TargetGame::new(&reference(), TypeRange::uniform(1.0, 2.0).unwrap(), TypeRange::uniform(1.0, 2.0).unwrap()).unwrap();
    let v = game.check_target_equilibrium(1.0).unwrap();
    let mc = game.monte_carlo_deviation(1.0, 1000, 501, 2024).unwrap();
    let scan = game.scan_target_volumes(1001).unwrap();
    let step = scan[1].volume - scan[0].volume;
    let boundary = scan.iter().take_while(|v| v.holds).last().map(|v| v.volume).unwrap_or(0.0);
    let single_switch = scan.windows(2).all(|w| w[0].holds || !w[1].holds);
    vec![
        clause(
            "margins-at-1",
            v.holds && (v.margin_mm - 2.0 / 3.0).abs() <= 1e-9 && (v.margin_rm - 2.0 / 3.0).abs() <= 1e-9,
            format!("margins {:.9}/{:.9}", v.margin_mm, v.margin_rm),
        ),
        clause("monte-carlo", mc.max_gain <= 1e-9, format!("max gain {:.1e} over {} draws", mc.max_gain, mc.draws.len())),
        clause("single-switch", single_switch, format!("last passing T={boundary:.6}")),
        clause(
            "boundary-at-sqrt(5/3)",
            single_switch && (boundary - (5.0f64 / 3.0).sqrt()).abs() <= step,
            format!("observed {boundary:.6}, sqrt(5/3)={:.6}, sqrt(1.5)={:.6}, step {step:.6}", (5.0f64 / 3.0).sqrt(), 1.5f64.sqrt()),
        ),
    ]
}

fn honest_run(env: &Env) -> ContractState {
    let (first, second) = match env.first_mover() {
        Dealer::Mm => (env.kappa_mm, env.kappa_rm),
        Dealer::Rm => (env.kappa_rm, env.kappa_mm),
    };
    env.run_episode(&env.mm_truth, &env.rm_truth, first, second).unwrap()
}

fn flip(bytes: &mut [u8], rng: &mut ChaCha8Rng) {
    let i = rng.gen_range(0..bytes.len());
    bytes[i] ^= 1 << rng.gen_range(0..8);
}

fn audit_soundness() -> Vec<Clause> {
    let env = Env::new(&reference(), 101, 1.0, 2.5, 9).unwrap();
    let state = honest_run(&env);
    let (mm_salts, rm_salts) = (env.salts(Dealer::Mm), env.salts(Dealer::Rm));
    let public = build_transcript(&state, &mm_salts, &rm_salts, &StubSealer, false).unwrap();
    let full = build_transcript(&state, &mm_salts, &rm_salts, &StubSealer, true).unwrap();
    let roots = ExpectedRoots { mm_root: public.mm_root, rm_root: public.rm_root };
    let public_bytes = public.to_canonical_json().into_bytes();
    let full_bytes = full.to_canonical_json().into_bytes();
    let public_verdict = verify_transcript_bytes(&public_bytes, &roots, &StubSealer);
    let full_verdict = verify_transcript_bytes(&full_bytes, &roots, &StubSealer);

    // replay the selection from the opened leaves
    let opening = full.opening.as_ref().unwrap();
    let candidates: Vec<Candidate> = opening
        .mm
        .iter()
        .zip(&opening.rm)
        .map(|(a, b)| Candidate { volume: a.volume, r_mm: a.rate, r_rm: b.rate })
        .collect();
    let replay = select_trade(&candidates, &filter_feasible(&candidates, full.spread_constraint.unwrap()));
    let exact = replay.is_some() && replay == state.outcome && full.outcome.as_ref().map(|o| o.index as usize) == replay.map(|s| s.index);

    let mm_entries = &state.mm_report.as_ref().unwrap().schedule.entries;
    let path_ok = (0..mm_entries.len()).all(|i| prove_membership(mm_entries, &mm_salts, i).unwrap().path.len() == 7)
        && [2usize, 3, 64, 65, 1000].iter().all(|&n| {
            let e: Vec<ScheduleEntry> = (0..n).map(|k| ScheduleEntry { volume: Fixed(k as i64), rate: Fixed(1) }).collect();
            let s = vec![[0u8; 32]; n];
            prove_membership(&e, &s, n - 1).unwrap().path.len() == (n as f64).log2().ceil() as usize
        });

    let escapes: usize = (0..10_000u64)
        .into_par_iter()
        .filter(|&trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            rng.set_stream(trial);
            let verdict = match trial % 10 {
                0 => {
                    let mut r = roots.clone();
                    let target = if rng.gen_bool(0.5) { r.mm_root.as_mut() } else { r.rm_root.as_mut() };
                    let Digest(bytes) = target.unwrap();
                    flip(bytes, &mut rng);
                    verify_transcript_bytes(&full_bytes, &r, &StubSealer)
                }
                k => {
                    let mut bytes = if k % 2 == 0 { public_bytes.clone() } else { full_bytes.clone() };
                    flip(&mut bytes, &mut rng);
                    verify_transcript_bytes(&bytes, &roots, &StubSealer)
                }
            };
            !matches!(verdict, Verdict::Fail(_))
        })
        .count();

    vec![
        clause("honest-public", public_verdict == Verdict::PublicOk, public_verdict.to_string()),
        clause("honest-full", full_verdict == Verdict::FullOk, full_verdict.to_string()),
        clause("bit-exact-replay", exact, format!("index {:?}", replay.map(|s| s.index))),
        clause("path-length", path_ok, "ceil(log2 I)"),
        clause("tamper-detection", escapes == 0, format!("{escapes}/10000 tampered inputs accepted")),
    ]
}

/// One fuzzed event sequence: mostly the honest script with random edits,
/// sometimes pure noise.
fn fuzz_events(env: &Env, honest: &[Event], rng: &mut ChaCha8Rng) -> Vec<Event> {
    let t_max = *env.grid.last().unwrap();
    let ids = [env.mm_dealer.clone(), env.rm_dealer.clone(), "intruder".to_string()];
    let kappas = [0.0, 0.5, 1.0, 2.0, 2.5, 2.9, 3.0, 4.0];
    let random_event = |rng: &mut ChaCha8Rng| -> Event {
        match rng.gen_range(0..9) {
            0 | 1 => {
                let mut e = honest[rng.gen_range(0..2)].clone();
                if let Event::SubmitSchedule { schedule, commitment } = &mut e {
                    match rng.gen_range(0..5) {
                        0 => schedule.dealer_id = ids.choose(rng).unwrap().clone(),
                        1 => {
                            let i = rng.gen_range(0..schedule.entries.len());
                            schedule.entries[i].rate = Fixed(schedule.entries[i].rate.raw() + rng.gen_range(-500_000_000..500_000_000));
                        }
                        2 => {
                            let mut entries = schedule.entries.clone();
                            entries.reverse();
                            *schedule = ReportedSchedule::signed(&schedule.dealer_id.clone(), schedule.side, entries);
                        }
                        3 => commitment.0[0] ^= 1,
                        _ => {}
                    }
                }
                e
            }
            2 | 3 => Event::PostDeposit {
                client: if rng.gen_bool(0.5) { Client::MoneyMarket } else { Client::RepoMarket },
                amount: match rng.gen_range(0..4) {
                    0 => t_max,
                    1 => Fixed(t_max.raw() / rng.gen_range(1..5)),
                    2 => Fixed(t_max.raw() + rng.gen_range(1..1000)),
                    _ => Fixed(rng.gen_range(-10..t_max.raw())),
                },
            },
            4 => Event::SubmitFirstSpread { dealer_id: ids.choose(rng).unwrap().clone(), kappa: fx(*kappas.choose(rng).unwrap()) },
            5 => Event::RespondSpread {
                dealer_id: ids.choose(rng).unwrap().clone(),
                response: if rng.gen_bool(0.4) {
                    SpreadResponse::Accept
                } else {
                    SpreadResponse::Raise { kappa: fx(*kappas.choose(rng).unwrap()) }
                },
            },
            6 => Event::Tick { now: rng.gen_range(0..60) },
            _ => Event::RequestExecute,
        }
    };
    let mut events: Vec<Event> = if rng.gen_bool(0.7) { honest.to_vec() } else { Vec::new() };
    for _ in 0..rng.gen_range(0..12) {
        let pos = rng.gen_range(0..=events.len());
        match rng.gen_range(0..3) {
            0 if !events.is_empty() => {
                events.remove(pos.min(events.len() - 1));
            }
            1 if !events.is_empty() => {
                let i = pos.min(events.len() - 1);
                events[i] = random_event(rng);
            }
            _ => events.insert(pos, random_event(rng)),
        }
    }
    events
}

fn escrow_empty(s: &ContractState) -> bool {
    [Party::EscrowMm, Party::EscrowRm]
        .iter()
        .all(|&p| s.ledger.balance(p, Asset::Cash) == Fixed::ZERO && s.ledger.balance(p, Asset::Securities) == Fixed::ZERO)
}

fn protocol_safety() -> Vec<Clause> {
    let env = Env::new(&reference(), 11, 1.0, 2.5, 3).unwrap();
    let (first, second) = (env.kappa_mm, env.kappa_rm);
    let honest = env.episode_events(&env.mm_truth, &env.rm_truth, first, second).unwrap();
    let genesis = ContractState::genesis(env.contract_config()).unwrap();
    let totals = (genesis.ledger.total(Asset::Cash), genesis.ledger.total(Asset::Securities));

    #[derive(Default)]
    struct Tally {
        conservation: usize,
        stranded: usize,
        hurdle: usize,
        stuck: usize,
        settled: usize,
        aborted: usize,
    }
    let tallies: Vec<Tally> = (0..10_000u64)
        .into_par_iter()
        .map(|seq| {
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            rng.set_stream(seq);
            let mut events = fuzz_events(&env, &honest, &mut rng);
            events.push(Event::Tick { now: 1_000 });
            let mut t = Tally::default();
            let mut state = genesis.clone();
            for e in events {
                let Ok(next) = state.apply_event(e) else { continue };
                state = next;
                if (state.ledger.total(Asset::Cash), state.ledger.total(Asset::Securities)) != totals {
                    t.conservation += 1;
                }
                if state.phase.is_terminal() && !escrow_empty(&state) {
                    t.stranded += 1;
                }
                if state.phase == Phase::Settled {
                    let ok = match (state.outcome, state.spread_constraint) {
                        (Some(sel), Some(k)) => Candidate { volume: sel.volume, r_mm: sel.r_mm, r_rm: sel.r_rm }.clears(k),
                        _ => false,
                    };
                    t.hurdle += !ok as usize;
                }
            }
            match state.phase {
                Phase::Settled => t.settled += 1,
                Phase::Aborted => t.aborted += 1,
                _ => t.stuck += 1,
            }
            t
        })
        .collect();
    let sum = |f: fn(&Tally) -> usize| tallies.iter().map(f).sum::<usize>();
    let (settled, aborted) = (sum(|t| t.settled), sum(|t| t.aborted));
    vec![
        clause("conservation", sum(|t| t.conservation) == 0, format!("{settled} settled, {aborted} aborted")),
        clause("no-stranded-deposits", sum(|t| t.stranded) == 0, ""),
        clause("hurdle-on-execution", sum(|t| t.hurdle) == 0, ""),
        clause("always-terminates", sum(|t| t.stuck) == 0, format!("{} stuck", sum(|t| t.stuck))),
        clause("both-outcomes-exercised", settled > 0 && aborted > 0, ""),
    ]
}

fn main() {
    let criteria: [(u32, &str, fn() -> Vec<Clause>); 10] = [
        (1, "JPM reference", jpm_reference),
        (2, "constrained JPM", constrained_jpm),
        (3, "selection risk", selection_risk),
        (4, "no excess inventory", no_excess_inventory),
        (5, "multiplicity", multiplicity),
        (6, "Nash oracle equivalence", nash_oracle),
        (7, "truthful reporting dominance", truthful_dominance),
        (8, "Bayesian target equilibrium", bayesian_target),
        (9, "audit soundness", audit_soundness),
        (10, "protocol safety", protocol_safety),
    ];
    let mut unexpected = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let clauses = run();
        let failed: Vec<&Clause> = clauses.iter().filter(|c| !c.pass).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let details: Vec<String> = clauses
            .iter()
            .map(|c| {
                let mark = if c.pass { "ok" } else { "FAILED" };
                if c.detail.is_empty() { format!("{} {mark}", c.name) } else { format!("{} {mark} ({})", c.name, c.detail) }
            })
            .collect();
        println!("criterion {id:>2} {verdict}: {title} [{:.2?}] {}", start.elapsed(), details.join("; "));
        for c in failed {
            match KNOWN_GAPS.iter().find(|g| g.0 == id && g.1 == c.name) {
                Some(gap) => println!("             known gap `{}`: {}", c.name, gap.2),
                None => unexpected += 1,
            }
        }
        for gap in KNOWN_GAPS.iter().filter(|g| g.0 == id) {
            if clauses.iter().any(|c| c.name == gap.1 && c.pass) {
                println!("             known gap `{}` now passes; remove it from KNOWN_GAPS", gap.1);
                unexpected += 1;
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} unexpected acceptance failure(s)");
        std::process::exit(1);
    }
}
