//! Hurdle filtering and joint-profit selection over candidate trades.

use serde::{Deserialize, Serialize};

use crate::fixed::{exact_profit, Fixed};

/// One grid point of the paired reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub volume: Fixed,
    pub r_mm: Fixed,
    pub r_rm: Fixed,
}

impl Candidate {
    /// `(r_rm - r_mm) >= 2 kappa`, evaluated exactly.
    pub fn clears(&self, kappa: Fixed) -> bool {
        self.r_rm.raw() as i128 - self.r_mm.raw() as i128 >= 2 * kappa.raw() as i128
    }

    pub fn profit(&self) -> i128 {
        exact_profit(self.r_mm, self.r_rm, self.volume)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub volume: Fixed,
    pub r_mm: Fixed,
    pub r_rm: Fixed,
    pub r_bd: Fixed,
}

/// Indices with a positive volume whose half-spread clears `kappa`.
pub fn filter_feasible(candidates: &[Candidate], kappa: Fixed) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.volume > Fixed::ZERO && c.clears(kappa))
        .map(|(i, _)| i)
        .collect()
}

/// Joint-profit maximizer over `feasible`; equal profits go to the larger
/// volume. `None` when nothing is feasible.
pub fn select_trade(candidates: &[Candidate], feasible: &[usize]) -> Option<Selection> {
    let index = feasible
        .iter()
        .copied()
        .max_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            ca.profit().cmp(&cb.profit()).then(ca.volume.cmp(&cb.volume))
        })?;
    let c = candidates[index];
    Some(Selection { index, volume: c.volume, r_mm: c.r_mm, r_rm: c.r_rm, r_bd: c.r_mm.midpoint(c.r_rm) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::SchedulePair;
    use proptest::prelude::*;

    fn fx(x: f64) -> Fixed {
        Fixed::from_f64(x).unwrap()
    }

    fn cand(volume: f64, r_mm: f64, r_rm: f64) -> Candidate {
        Candidate { volume: fx(volume), r_mm: fx(r_mm), r_rm: fx(r_rm) }
    }

    fn reference(count: usize) -> Vec<Candidate> {
        let d = SchedulePair::symmetric_sqrt(6.0).unwrap().discretize(count).unwrap();
        (0..count).map(|i| cand(d.grid.points()[i], d.r_mm[i], d.r_rm[i])).collect()
    }

    #[test]
    fn hurdle_keeps_wide_spreads() {
        let c = [cand(1.0, 6.0, 12.0), cand(1.0, 6.0, 8.0)];
        assert_eq!(filter_feasible(&c, fx(2.5)), vec![0]);
        assert_eq!(filter_feasible(&c, fx(0.0)), vec![0, 1]);
    }

    #[test]
    fn three_point_grid() {
        let c = reference(3);
        // the zero-volume point has half-spread 3 but no trade
        assert_eq!(filter_feasible(&c, fx(2.0)), vec![1]);
        assert_eq!(filter_feasible(&c, fx(0.0)), vec![1, 2]);
    }

    #[test]
    fn reference_grid_selection() {
        let c = reference(101);
        let sel = select_trade(&c, &filter_feasible(&c, fx(2.0))).unwrap();
        // the grid point just above 1 leaves a half-spread below 2
        assert!((sel.volume.to_f64() - 1.0).abs() < 0.02);
        assert!(sel.r_rm.raw() - sel.r_mm.raw() >= 4 * crate::fixed::SCALE);
        let profit = (sel.r_rm.to_f64() - sel.r_mm.to_f64()) * sel.volume.to_f64();
        assert!((profit - 4.0).abs() < 1e-3);
        let unconstrained = select_trade(&c, &filter_feasible(&c, fx(0.0))).unwrap();
        assert!((unconstrained.volume.to_f64() - 1.0).abs() <= 3f64.sqrt() / 100.0);
    }

    #[test]
    fn ties_prefer_larger_volume() {
        let c = [cand(1.0, 1.0, 5.0), cand(2.0, 2.0, 4.0)];
        assert_eq!(select_trade(&c, &[0, 1]).unwrap().index, 1);
        assert_eq!(select_trade(&c, &[0]).unwrap().index, 0);
        assert!(select_trade(&c, &[]).is_none());
    }

    #[test]
    fn interdealer_rate_is_midpoint() {
        let c = [cand(1.0, 1.0, 5.0)];
        assert_eq!(select_trade(&c, &[0]).unwrap().r_bd, fx(3.0));
    }

    proptest! {
        #[test]
        fn matches_brute_force(raw in prop::collection::vec((1i64..5_000, 0i64..3_000, 0i64..6_000), 1..20), kappa in 0i64..2_000) {
            let c: Vec<Candidate> = raw.iter().enumerate().map(|(i, &(v, a, b))| Candidate {
                volume: Fixed(i as i64 * 10_000 + v), r_mm: Fixed(a), r_rm: Fixed(b),
            }).collect();
            let feasible = filter_feasible(&c, Fixed(kappa));
            let got = select_trade(&c, &feasible);
            let mut best: Option<usize> = None;
            for i in 0..c.len() {
                if c[i].volume.raw() > 0 && 2 * (c[i].r_rm.raw() - c[i].r_mm.raw()) >= 4 * kappa {
                    best = match best {
                        Some(j) if c[j].profit() > c[i].profit() => Some(j),
                        _ => Some(i),
                    };
                }
            }
            prop_assert_eq!(got.map(|s| s.index), best);
            if let Some(s) = got {
                prop_assert!(2 * (s.r_rm.raw() - s.r_mm.raw()) >= 4 * kappa);
            }
        }
    }
}
