//! Complete-information dealer game.
//!
//! Each dealer quotes its own client a rate; the interdealer trade clears at
//! the midpoint and the traded volume is `Q = min(D(r_mm), S(r_rm))`. A
//! dealer left with unsold client volume pays its own rate on the excess.

use std::io::Write;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{EngineError, Result};
use crate::numeric::{bisect, bisect_edge, golden_section_max, linspace, GOLDEN_TOL};
use crate::schedules::SchedulePair;

/// Absolute tolerance for balance and Nash verdicts.
pub const NASH_TOL: f64 = 1e-8;

/// Successive best-response moves below this count as a fixed point.
pub const BR_CONVERGENCE_TOL: f64 = 1e-8;
pub const BR_MAX_ITER: usize = 10_000;
const BR_DAMPING: f64 = 0.5;

/// Payoff differences below this are treated as ties between candidates.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dealer {
    Mm,
    Rm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePair {
    pub r_mm: f64,
    pub r_rm: f64,
}

impl RatePair {
    pub fn new(r_mm: f64, r_rm: f64) -> Self {
        RatePair { r_mm, r_rm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub pair: RatePair,
    pub volume: f64,
    pub is_balanced: bool,
    pub is_nash: bool,
    pub constrained_mm: bool,
    pub constrained_rm: bool,
    pub interdealer_rate: f64,
    pub joint_profit: f64,
}

impl EquilibriumPoint {
    pub fn spread(&self) -> f64 {
        self.pair.r_rm - self.pair.r_mm
    }
}

/// `r_bd = (r_mm + r_rm) / 2`: each dealer keeps half the spread.
pub fn interdealer_rate(pair: RatePair) -> Result<f64> {
    if pair.r_mm > pair.r_rm {
        return Err(EngineError::NegativeSpread { r_mm: pair.r_mm, r_rm: pair.r_rm });
    }
    Ok(0.5 * (pair.r_rm - pair.r_mm) + pair.r_mm)
}

/// Money-market dealer payoff: half the spread on the matched volume minus
/// its rate on unmatched client cash.
pub fn payoff_mm(market: &SchedulePair, r_mm: f64, r_rm: f64) -> Result<f64> {
    let d = market.demand().eval(r_mm)?;
    let s = market.supply().eval(r_rm)?;
    let q = d.min(s);
    Ok(0.5 * (r_rm - r_mm).max(0.0) * q - r_mm * (d - q).max(0.0))
}

/// Repo-market dealer payoff, the mirror of [`payoff_mm`].
pub fn payoff_rm(market: &SchedulePair, r_mm: f64, r_rm: f64) -> Result<f64> {
    let d = market.demand().eval(r_mm)?;
    let s = market.supply().eval(r_rm)?;
    let q = d.min(s);
    Ok(0.5 * (r_rm - r_mm).max(0.0) * q - r_rm * (s - q).max(0.0))
}

pub fn payoff(market: &SchedulePair, dealer: Dealer, r_mm: f64, r_rm: f64) -> Result<f64> {
    match dealer {
        Dealer::Mm => payoff_mm(market, r_mm, r_rm),
        Dealer::Rm => payoff_rm(market, r_mm, r_rm),
    }
}

/// Unconstrained maximizer of `(r_rm - r) D(r) / 2` over `r`: the root of
/// `(r_rm - r) D'(r) - D(r)` on `(0, r_rm)`.
pub fn peak_mm(market: &SchedulePair, r_rm: f64) -> Result<f64> {
    if r_rm <= 0.0 {
        return Err(EngineError::DegenerateDomain(format!("peak_mm needs r_rm > 0, got {r_rm}")));
    }
    let demand = market.demand();
    let r_rm = r_rm.min(market.rate_bound());
    bisect(
        |r| (r_rm - r) * demand.slope(r).unwrap_or(f64::NAN) - demand.eval(r).unwrap_or(f64::NAN),
        0.0,
        r_rm,
    )
}

/// Unconstrained maximizer of `(r - r_mm) S(r) / 2`: the root of
/// `S(r) + (r - r_mm) S'(r)` on `(r_mm, r_b)`.
pub fn peak_rm(market: &SchedulePair, r_mm: f64) -> Result<f64> {
    let rb = market.rate_bound();
    if r_mm >= rb {
        return Err(EngineError::DegenerateDomain(format!("peak_rm needs r_mm < r_b = {rb}, got {r_mm}")));
    }
    let supply = market.supply();
    let r_mm = r_mm.max(0.0);
    bisect(
        |r| supply.eval(r).unwrap_or(f64::NAN) + (r - r_mm) * supply.slope(r).unwrap_or(f64::NAN),
        r_mm,
        rb,
    )
}

/// Evaluates a rate pair: balance, Nash verdict, constrained flags and the
/// derived interdealer quantities.
pub fn is_nash(market: &SchedulePair, pair: RatePair) -> Result<EquilibriumPoint> {
    let d = market.demand().eval(pair.r_mm)?;
    let s = market.supply().eval(pair.r_rm)?;
    let volume = d.min(s);
    let is_balanced = (d - s).abs() <= NASH_TOL;
    let (mut is_nash, mut constrained_mm, mut constrained_rm) = (false, false, false);
    if let (Ok(pk_mm), Ok(pk_rm)) = (peak_mm(market, pair.r_rm), peak_rm(market, pair.r_mm)) {
        constrained_mm = pair.r_mm < pk_mm - NASH_TOL;
        constrained_rm = pair.r_rm > pk_rm + NASH_TOL;
        is_nash = is_balanced && pair.r_mm <= pk_mm + NASH_TOL && pair.r_rm >= pk_rm - NASH_TOL;
    }
    Ok(EquilibriumPoint {
        pair,
        volume,
        is_balanced,
        is_nash,
        constrained_mm,
        constrained_rm,
        interdealer_rate: 0.5 * (pair.r_mm + pair.r_rm),
        joint_profit: (pair.r_rm - pair.r_mm) * volume,
    })
}

/// Constructive equilibrium from a money-market seed rate: rebalance, pull
/// the mm rate down to its peak if it overshoots, then push the rm rate up
/// to its peak if it undershoots, rebalancing after each move. The sequence
/// runs once and the result is checked with [`is_nash`].
pub fn equilibrium_from_seed(market: &SchedulePair, seed: f64) -> Result<EquilibriumPoint> {
    let r_hat = market.crossing_rate();
    if !(seed >= 0.0 && seed <= r_hat + NASH_TOL) {
        return Err(EngineError::Domain { rate: seed, bound: r_hat });
    }
    let mut r_mm = seed.min(r_hat);
    let mut r_rm = market.balanced_counterpart(r_mm)?;

    let pk_mm = peak_mm(market, r_rm)?;
    if r_mm > pk_mm + NASH_TOL {
        r_mm = pk_mm;
        r_rm = market.balanced_counterpart(r_mm)?;
    }

    let pk_rm = peak_rm(market, r_mm)?;
    if r_rm < pk_rm - NASH_TOL {
        r_rm = pk_rm;
        r_mm = market.balanced_mm(r_rm)?;
    }

    is_nash(market, RatePair::new(r_mm, r_rm))
}

/// `n` uniform seeds on `[0, r_hat]`; a single seed is the zero-trade one.
pub fn enumeration_seeds(market: &SchedulePair, n: usize) -> Vec<f64> {
    linspace(0.0, market.crossing_rate(), n)
}

/// Equilibria from [`enumeration_seeds`], in seed order.
pub fn enumerate_equilibria(market: &SchedulePair, n: usize) -> Result<Vec<EquilibriumPoint>> {
    if n == 0 {
        return Err(EngineError::config("enumeration needs at least one seed"));
    }
    enumeration_seeds(market, n).into_iter().map(|s| equilibrium_from_seed(market, s)).collect()
}

/// Joint profit `(S^-1(T) - D^-1(T)) T` of a balanced trade of volume `T`.
pub fn joint_profit(market: &SchedulePair, volume: f64) -> Result<f64> {
    Ok((market.supply().inverse(volume)? - market.demand().inverse(volume)?) * volume)
}

/// Derivative of [`joint_profit`] in closed form.
pub fn jpm_foc(market: &SchedulePair, volume: f64) -> Result<f64> {
    let (d, s) = (market.demand(), market.supply());
    Ok(s.inverse(volume)? - d.inverse(volume)? + volume * (s.inverse_slope(volume)? - d.inverse_slope(volume)?))
}

fn balanced_point(market: &SchedulePair, volume: f64) -> Result<EquilibriumPoint> {
    let r_mm = market.demand().inverse(volume)?;
    let r_rm = market.supply().inverse(volume)?;
    is_nash(market, RatePair::new(r_mm, r_rm))
}

/// Maximizes joint profit over balanced volumes in `[0, hi]`: golden-section
/// search, then bisection on the first-order condition when it brackets a
/// root near the estimate.
fn maximize_profit(market: &SchedulePair, hi: f64) -> Result<f64> {
    let profit = |t: f64| joint_profit(market, t).unwrap_or(f64::NEG_INFINITY);
    let (t_gold, _) = golden_section_max(profit, 0.0, hi, GOLDEN_TOL);
    if t_gold <= 0.0 || t_gold >= hi {
        return Ok(t_gold);
    }
    let width = 1e-4 * hi;
    let (lo_b, hi_b) = ((t_gold - width).max(0.0), (t_gold + width).min(hi));
    let refined = bisect(|t| jpm_foc(market, t).unwrap_or(f64::NAN), lo_b, hi_b);
    Ok(match refined {
        Ok(t) if profit(t) >= profit(t_gold) => t,
        _ => t_gold,
    })
}

/// Joint-profit-maximizing balanced trade.
pub fn jpm(market: &SchedulePair) -> Result<EquilibriumPoint> {
    let t = maximize_profit(market, market.max_trade())?;
    balanced_point(market, t)
}

/// Half-spread `(S^-1(T) - D^-1(T)) / 2` available at volume `T`.
pub fn half_spread(market: &SchedulePair, volume: f64) -> Result<f64> {
    Ok(0.5 * (market.supply().inverse(volume)? - market.demand().inverse(volume)?))
}

/// Joint profit maximization subject to a minimum half-spread `kappa`.
/// Returns `None` when no positive volume clears the hurdle.
pub fn jpm_constrained(market: &SchedulePair, kappa: f64) -> Result<Option<EquilibriumPoint>> {
    if !(kappa >= 0.0) {
        return Err(EngineError::config(format!("minimum spread must be nonnegative, got {kappa}")));
    }
    // the half-spread strictly falls with volume, so the feasible set is
    // [0, t_kappa] and it holds positive volumes only if h(0) > kappa
    if half_spread(market, 0.0)? <= kappa {
        return Ok(None);
    }
    let feasible = |t: f64| half_spread(market, t).map(|h| h >= kappa).unwrap_or(false);
    let t_kappa = bisect_edge(feasible, 0.0, market.max_trade());
    if t_kappa <= 0.0 {
        return Ok(None);
    }
    let unconstrained = maximize_profit(market, market.max_trade())?;
    let t = if unconstrained <= t_kappa { unconstrained } else { maximize_profit(market, t_kappa)? };
    if t <= 0.0 {
        return Ok(None);
    }
    balanced_point(market, t).map(Some)
}

/// Minimum committed volumes and the rate bounds they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundingCommitment {
    pub floor_mm: f64,
    pub floor_rm: f64,
    pub r_fc_mm: f64,
    pub r_fc_rm: f64,
}

impl FundingCommitment {
    pub fn new(market: &SchedulePair, floor_mm: f64, floor_rm: f64) -> Result<Self> {
        for (name, floor, max) in [
            ("money-market", floor_mm, market.demand().max_volume()),
            ("repo-market", floor_rm, market.supply().max_volume()),
        ] {
            if !(floor >= 0.0) {
                return Err(EngineError::InfeasibleCommitment(format!("{name} floor {floor} is negative")));
            }
            if floor > market.max_trade() + NASH_TOL || floor > max {
                return Err(EngineError::InfeasibleCommitment(format!(
                    "{name} floor {floor} exceeds the largest balanced trade {}",
                    market.max_trade()
                )));
            }
        }
        Ok(FundingCommitment {
            floor_mm,
            floor_rm,
            r_fc_mm: market.demand().inverse(floor_mm)?,
            r_fc_rm: market.supply().inverse(floor_rm)?,
        })
    }

    pub fn none(market: &SchedulePair) -> Self {
        FundingCommitment { floor_mm: 0.0, floor_rm: 0.0, r_fc_mm: 0.0, r_fc_rm: market.rate_bound() }
    }
}

/// Best response of `dealer` to the opponent's rate within its committed
/// rate interval. Each payoff piece (split at the balance rate and at the
/// opponent's rate) is searched by golden section; endpoints are compared
/// too since the inventory piece can be convex. Near-ties go to the rate
/// with less own inventory.
pub fn best_response(market: &SchedulePair, dealer: Dealer, opponent_rate: f64, fc: &FundingCommitment) -> Result<f64> {
    let rb = market.rate_bound();
    let (lo, hi) = match dealer {
        Dealer::Mm => (fc.r_fc_mm, rb),
        Dealer::Rm => (0.0, fc.r_fc_rm),
    };
    if lo > hi {
        return Err(EngineError::InfeasibleCommitment(format!("empty rate interval [{lo}, {hi}]")));
    }
    let balance = match dealer {
        Dealer::Mm => {
            let s = market.supply().eval(opponent_rate)?;
            if s >= market.demand().max_volume() { rb } else { market.demand().inverse(s)? }
        }
        Dealer::Rm => {
            let d = market.demand().eval(opponent_rate)?;
            if d >= market.supply().max_volume() { 0.0 } else { market.supply().inverse(d)? }
        }
    };
    let value = |r: f64| match dealer {
        Dealer::Mm => payoff_mm(market, r, opponent_rate),
        Dealer::Rm => payoff_rm(market, opponent_rate, r),
    };
    let mut cuts = vec![lo, hi];
    for c in [balance, opponent_rate] {
        if c > lo && c < hi {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut candidates: Vec<f64> = cuts.clone();
    for w in cuts.windows(2) {
        let (x, _) = golden_section_max(|r| value(r).unwrap_or(f64::NEG_INFINITY), w[0], w[1], GOLDEN_TOL);
        candidates.push(x);
    }
    let less_inventory = |a: f64, b: f64| match dealer {
        Dealer::Mm => a < b,
        Dealer::Rm => a > b,
    };
    let mut best = (candidates[0], value(candidates[0])?);
    for &r in &candidates[1..] {
        let v = value(r)?;
        if v > best.1 + TIE_TOL || ((v - best.1).abs() <= TIE_TOL && less_inventory(r, best.0)) {
            best = (r, v);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommitmentOutcome {
    pub point: EquilibriumPoint,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped alternating best response from the commitment corner
/// `(r_fc_mm, r_fc_rm)`. Hitting the iteration limit is reported, not
/// fatal.
pub fn commitment_equilibrium(market: &SchedulePair, fc: &FundingCommitment) -> Result<CommitmentOutcome> {
    let (mut r_mm, mut r_rm) = (fc.r_fc_mm, fc.r_fc_rm);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < BR_MAX_ITER {
        iterations += 1;
        let next_mm = (1.0 - BR_DAMPING) * r_mm + BR_DAMPING * best_response(market, Dealer::Mm, r_rm, fc)?;
        let next_rm = (1.0 - BR_DAMPING) * r_rm + BR_DAMPING * best_response(market, Dealer::Rm, next_mm, fc)?;
        let moved = (next_mm - r_mm).abs().max((next_rm - r_rm).abs());
        r_mm = next_mm;
        r_rm = next_rm;
        if moved < BR_CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(iterations, r_mm, r_rm, "best-response iteration hit the limit without converging");
    }
    Ok(CommitmentOutcome { point: is_nash(market, RatePair::new(r_mm, r_rm))?, iterations, converged })
}

/// Writes `(seed, r_mm, r_rm, T, spread, joint_profit, is_nash)` rows.
pub fn write_equilibria_csv<W: Write>(out: W, rows: &[(f64, EquilibriumPoint)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "r_mm", "r_rm", "T", "spread", "joint_profit", "is_nash"])?;
    for (seed, p) in rows {
        w.write_record([
            format!("{seed:.9}"),
            format!("{:.9}", p.pair.r_mm),
            format!("{:.9}", p.pair.r_rm),
            format!("{:.9}", p.volume),
            format!("{:.9}", p.spread()),
            format!("{:.9}", p.joint_profit),
            p.is_nash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
