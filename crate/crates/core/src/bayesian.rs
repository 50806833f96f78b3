//! Volume-targeting equilibria when client shocks are private.
//!
//! Each dealer privately observes its own client's multiplicative shock and
//! quotes the rate that delivers a common target volume `T` whatever the
//! realized type. Such a profile is an equilibrium when the worst-case
//! rates across both type ranges still sit on the inventory-reducing side
//! of the peaks; because peaks do not depend on a dealer's own type and the
//! target rates are monotone in type, the worst cases sit at the lower ends
//! of the ranges.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{payoff_mm, payoff_rm, peak_mm, peak_rm, Dealer, NASH_TOL};
use crate::error::{EngineError, Result};
use crate::numeric::linspace;
use crate::schedules::SchedulePair;

#[derive(Debug, Clone, PartialEq)]
pub enum TypeDistribution {
    Uniform,
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeRange {
    lo: f64,
    hi: f64,
    distribution: TypeDistribution,
}

impl TypeRange {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(EngineError::config(format!("type range needs 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(TypeRange { lo, hi, distribution: TypeDistribution::Uniform })
    }

    /// Finite support with probability weights summing to one.
    pub fn discrete(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(EngineError::config("discrete types need one weight per value"));
        }
        if values.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(EngineError::config("discrete types must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(EngineError::config(format!("type weights must be nonnegative and sum to 1, got {total}")));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(TypeRange { lo, hi, distribution: TypeDistribution::Discrete { values, weights } })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn distribution(&self) -> &TypeDistribution {
        &self.distribution
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.distribution {
            TypeDistribution::Uniform if self.lo == self.hi => self.lo,
            TypeDistribution::Uniform => rng.gen_range(self.lo..=self.hi),
            TypeDistribution::Discrete { values, weights } => {
                let idx = WeightedIndex::new(weights).expect("weights validated at construction");
                values[idx.sample(rng)]
            }
        }
    }
}

/// Verdict of the worst-case conditions with both slack margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetVerdict {
    pub volume: f64,
    pub holds: bool,
    /// Peak of the money-market dealer minus its highest target rate.
    pub margin_mm: f64,
    /// Lowest repo-market target rate minus its peak.
    pub margin_rm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrawResult {
    pub draw: u64,
    pub theta_mm: f64,
    pub theta_rm: f64,
    pub best_deviation_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub volume: f64,
    pub draws: Vec<DrawResult>,
    pub max_gain: f64,
}

impl DeviationReport {
    /// Writes `(draw, theta_mm, theta_rm, best_deviation_gain)` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["draw", "theta_mm", "theta_rm", "best_deviation_gain"])?;
        for d in &self.draws {
            w.write_record([
                d.draw.to_string(),
                format!("{:.9}", d.theta_mm),
                format!("{:.9}", d.theta_rm),
                format!("{:.9e}", d.best_deviation_gain),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Baseline schedules plus a private type range for each client.
#[derive(Debug, Clone)]
pub struct TargetGame {
    baseline: SchedulePair,
    mm: TypeRange,
    rm: TypeRange,
}

impl TargetGame {
    /// The shocks already present in `market` are discarded; types come from
    /// the ranges.
    pub fn new(market: &SchedulePair, mm: TypeRange, rm: TypeRange) -> Result<Self> {
        Ok(TargetGame { baseline: market.with_shocks(1.0, 1.0)?, mm, rm })
    }

    pub fn baseline(&self) -> &SchedulePair {
        &self.baseline
    }

    pub fn range(&self, dealer: Dealer) -> &TypeRange {
        match dealer {
            Dealer::Mm => &self.mm,
            Dealer::Rm => &self.rm,
        }
    }

    /// Rate that makes a client of type `theta` trade exactly `volume`.
    pub fn target_rate(&self, dealer: Dealer, volume: f64, theta: f64) -> Result<f64> {
        let schedule = match dealer {
            Dealer::Mm => self.baseline.demand(),
            Dealer::Rm => self.baseline.supply(),
        };
        if !(theta > 0.0) || !(volume >= 0.0) || volume / theta > schedule.max_volume() {
            return Err(EngineError::InfeasibleTarget { target: volume, theta });
        }
        schedule.inverse(volume / theta)
    }

    /// Largest balanced volume at the minimal-type profile; every type
    /// profile in range can deliver it.
    pub fn max_target_volume(&self) -> Result<f64> {
        Ok(self.baseline.with_shocks(self.mm.lo, self.rm.lo)?.max_trade())
    }

    pub fn check_target_equilibrium(&self, volume: f64) -> Result<TargetVerdict> {
        // target mm rates fall with the type and rm rates rise with it, and
        // both peaks rise with the opponent's rate
        let worst_mm = self.target_rate(Dealer::Mm, volume, self.mm.lo)?;
        let worst_rm = self.target_rate(Dealer::Rm, volume, self.rm.lo)?;
        let margin_mm = peak_mm(&self.baseline, worst_rm)? - worst_mm;
        let margin_rm = worst_rm - peak_rm(&self.baseline, worst_mm)?;
        Ok(TargetVerdict {
            volume,
            holds: margin_mm >= -NASH_TOL && margin_rm >= -NASH_TOL,
            margin_mm,
            margin_rm,
        })
    }

    /// Verdicts for `n` uniform volumes on `[0, max_target_volume]`.
    pub fn scan_target_volumes(&self, n: usize) -> Result<Vec<TargetVerdict>> {
        if n < 2 {
            return Err(EngineError::config(format!("volume scan needs at least 2 points, got {n}")));
        }
        let t_max = self.max_target_volume()?;
        linspace(0.0, t_max, n).into_iter().map(|t| self.check_target_equilibrium(t.min(t_max))).collect()
    }

    /// Volumes from [`TargetGame::scan_target_volumes`] that pass.
    pub fn enumerate_target_volumes(&self, n: usize) -> Result<Vec<f64>> {
        Ok(self.scan_target_volumes(n)?.into_iter().filter(|v| v.holds).map(|v| v.volume).collect())
    }

    /// For each draw, fixes both dealers at their target rates for the drawn
    /// types and scans `grid` alternative own rates on `[0, r_b]` for each
    /// dealer, inventory penalty included. Draw `k` uses stream `k` of a
    /// generator seeded with `seed`, so results do not depend on thread
    /// scheduling.
    pub fn monte_carlo_deviation(&self, volume: f64, draws: u64, grid: usize, seed: u64) -> Result<DeviationReport> {
        let rb = self.baseline.rate_bound();
        let alternatives = linspace(0.0, rb, grid);
        let results = (0..draws)
            .into_par_iter()
            .map(|draw| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(draw);
                let theta_mm = self.mm.sample(&mut rng);
                let theta_rm = self.rm.sample(&mut rng);
                let gain = self.deviation_gain(volume, theta_mm, theta_rm, &alternatives)?;
                Ok(DrawResult { draw, theta_mm, theta_rm, best_deviation_gain: gain })
            })
            .collect::<Result<Vec<_>>>()?;
        let max_gain = results.iter().map(|d| d.best_deviation_gain).fold(f64::NEG_INFINITY, f64::max);
        Ok(DeviationReport { volume, draws: results, max_gain })
    }

    /// Largest payoff improvement either dealer finds over its target rate
    /// against the realized types.
    pub fn deviation_gain(&self, volume: f64, theta_mm: f64, theta_rm: f64, alternatives: &[f64]) -> Result<f64> {
        let realized = self.baseline.with_shocks(theta_mm, theta_rm)?;
        let r_mm = self.target_rate(Dealer::Mm, volume, theta_mm)?;
        let r_rm = self.target_rate(Dealer::Rm, volume, theta_rm)?;
        let base_mm = payoff_mm(&realized, r_mm, r_rm)?;
        let base_rm = payoff_rm(&realized, r_mm, r_rm)?;
        let mut gain = 0.0f64;
        for &r in alternatives {
            gain = gain.max(payoff_mm(&realized, r, r_rm)? - base_mm);
            gain = gain.max(payoff_rm(&realized, r_mm, r)? - base_rm);
        }
        Ok(gain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn game() -> TargetGame {
        TargetGame::new(
            &SchedulePair::symmetric_sqrt(6.0).unwrap(),
            TypeRange::uniform(1.0, 2.0).unwrap(),
            TypeRange::uniform(1.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn target_rate_examples() {
        let g = game();
        assert!((g.target_rate(Dealer::Mm, 1.0, 2.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((g.target_rate(Dealer::Rm, 1.0, 1.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((g.target_rate(Dealer::Mm, 1.0, 4.0).unwrap() - 0.0625).abs() < 1e-12);
        assert!(matches!(g.target_rate(Dealer::Mm, 10.0, 1.0), Err(EngineError::InfeasibleTarget { .. })));
    }

    #[test]
    fn reference_margins() {
        let v = game().check_target_equilibrium(1.0).unwrap();
        assert!(v.holds);
        assert!((v.margin_mm - 2.0 / 3.0).abs() < 1e-9);
        assert!((v.margin_rm - 2.0 / 3.0).abs() < 1e-9);
        assert!(game().check_target_equilibrium(0.0).unwrap().holds);
    }

    #[test]
    fn boundary_is_where_both_margins_vanish() {
        // margin_mm = (6 - T^2)/3 - T^2 and margin_rm = (6 - 4T^2)/3
        let g = game();
        let edge = 1.5f64.sqrt();
        let v = g.check_target_equilibrium(edge).unwrap();
        assert!(v.margin_mm.abs() < 1e-9 && v.margin_rm.abs() < 1e-9);
        assert!(g.check_target_equilibrium(edge - 1e-6).unwrap().holds);
        assert!(!g.check_target_equilibrium(edge + 1e-6).unwrap().holds);
    }

    #[test]
    fn enumeration_is_a_prefix() {
        let g = game();
        let scan = g.scan_target_volumes(100).unwrap();
        let first_fail = scan.iter().position(|v| !v.holds).unwrap();
        assert!(first_fail > 2);
        assert!(scan[first_fail..].iter().all(|v| !v.holds));
        assert_eq!(g.enumerate_target_volumes(2).unwrap(), vec![0.0]);
    }

    #[test]
    fn monte_carlo_finds_no_gain_at_reference() {
        let r = game().monte_carlo_deviation(1.0, 200, 201, 7).unwrap();
        assert_eq!(r.draws.len(), 200);
        assert!(r.max_gain <= 1e-9, "{}", r.max_gain);
    }

    #[test]
    fn monte_carlo_finds_gain_past_boundary() {
        let r = game().monte_carlo_deviation(1.3, 200, 201, 7).unwrap();
        assert!(r.max_gain > 1e-6);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let a = game().monte_carlo_deviation(1.0, 50, 21, 3).unwrap();
        let b = game().monte_carlo_deviation(1.0, 50, 21, 3).unwrap();
        assert_eq!(a, b);
        let single = game().deviation_gain(1.0, 1.5, 1.5, &linspace(0.0, 6.0, 201)).unwrap();
        assert!(single <= 1e-9);
    }

    #[test]
    fn discrete_types_validate_weights() {
        assert!(TypeRange::discrete(vec![1.0, 2.0], vec![0.5, 0.4]).is_err());
        let t = TypeRange::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!((t.lo(), t.hi()), (1.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..20).all(|_| [1.0, 2.0].contains(&t.sample(&mut rng))));
    }

    proptest! {
        #[test]
        fn induced_volume_hits_target(theta in 1.0f64..=2.0, frac in 0.0f64..=1.0) {
            let g = game();
            let t = frac * g.max_target_volume().unwrap();
            let market = g.baseline().with_shocks(theta, theta).unwrap();
            let r_mm = g.target_rate(Dealer::Mm, t, theta).unwrap();
            let r_rm = g.target_rate(Dealer::Rm, t, theta).unwrap();
            prop_assert!((market.demand().eval(r_mm).unwrap() - t).abs() <= 1e-9);
            prop_assert!((market.supply().eval(r_rm).unwrap() - t).abs() <= 1e-9);
        }

        #[test]
        fn distinct_targets_give_distinct_rates(theta in 1.0f64..=2.0, a in 0.05f64..1.2, b in 0.05f64..1.2) {
            prop_assume!((a - b).abs() > 1e-6);
            let g = game();
            prop_assert!(g.target_rate(Dealer::Mm, a, theta).unwrap() != g.target_rate(Dealer::Mm, b, theta).unwrap());
            prop_assert!(g.target_rate(Dealer::Rm, a, theta).unwrap() != g.target_rate(Dealer::Rm, b, theta).unwrap());
        }

        #[test]
        fn target_rates_monotone_in_type(t in 0.1f64..1.5, lo in 1.0f64..1.5, hi in 1.5f64..2.0) {
            let g = game();
            prop_assert!(g.target_rate(Dealer::Mm, t, hi).unwrap() < g.target_rate(Dealer::Mm, t, lo).unwrap());
            prop_assert!(g.target_rate(Dealer::Rm, t, hi).unwrap() > g.target_rate(Dealer::Rm, t, lo).unwrap());
        }
    }
}
