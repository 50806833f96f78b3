use proptest::prelude::*;
use repomech::equilibrium::{half_spread, jpm, jpm_constrained, joint_profit, FundingCommitment, commitment_equilibrium};
use repomech::schedules::{SchedulePair, ScheduleModel, Side};

fn quadratic() -> SchedulePair {
    SchedulePair::new(
        ScheduleModel::quadratic_cap(Side::Demand, 1.0, 4.0, 1.0).unwrap(),
        ScheduleModel::quadratic_cap(Side::Supply, 1.0, 4.0, 1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn jpm_beats_every_balanced_volume() {
    for m in [SchedulePair::symmetric_sqrt(6.0).unwrap(), quadratic()] {
        let p = jpm(&m).unwrap();
        let t_max = m.max_trade();
        for k in 0..=1000 {
            let t = t_max * k as f64 / 1000.0;
            assert!(joint_profit(&m, t).unwrap() <= p.joint_profit + 1e-9, "T={t}");
        }
    }
}

#[test]
fn commitments_hold_volume_at_the_floor() {
    let m = SchedulePair::symmetric_sqrt(6.0).unwrap();
    let fc = FundingCommitment::new(&m, 1.0, 1.0).unwrap();
    let out = commitment_equilibrium(&m, &fc).unwrap();
    assert!(out.converged);
    assert!(out.point.volume >= 1.0 - 1e-6, "{:?}", out.point);
}

proptest! {
    #[test]
    fn constrained_volume_shrinks_with_hurdle(a in 0.0f64..2.9, b in 0.0f64..2.9) {
        let m = SchedulePair::symmetric_sqrt(6.0).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let p_lo = jpm_constrained(&m, lo).unwrap().unwrap();
        let p_hi = jpm_constrained(&m, hi).unwrap().unwrap();
        prop_assert!(p_hi.volume <= p_lo.volume + 1e-9);
        prop_assert!(p_hi.joint_profit <= p_lo.joint_profit + 1e-9);
        prop_assert!(half_spread(&m, p_hi.volume).unwrap() >= hi - 1e-9);
    }
}
