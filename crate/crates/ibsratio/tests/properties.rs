//! Property tests for the ledger bookkeeping and the bound layer.

use ibsratio::analysis::{
    efficiency_bound_rho, efficiency_lower_bound_r_dependent, mse_upper_bound,
    rr_feasible_interval, sef_lower_bound, variance_efficiency_factor,
};
use ibsratio::montecarlo::resolve_cell;
use ibsratio::population::{PairedSampleLedger, Population, PopulationModel};
use ibsratio::{required_successes, TargetParameter};
use proptest::prelude::*;

fn param_strategy() -> impl Strategy<Value = TargetParameter> {
    prop::sample::select(TargetParameter::ALL.to_vec())
}

proptest! {
    #[test]
    fn ledger_invariants_hold_for_any_interleaving(
        seed in any::<u64>(),
        sides in prop::collection::vec(any::<bool>(), 1..80),
        p1 in 0.05f64..0.95,
        p2 in 0.05f64..0.95,
    ) {
        let model = PopulationModel::new(p1, p2).unwrap();
        let mut ledger = PairedSampleLedger::simulated(model, seed);
        for &side in &sides {
            let side = if side { Population::First } else { Population::Second };
            ledger.draw(side).unwrap();
            let c = ledger.counts();
            let (s1, s2) = ledger.surplus_sizes();
            prop_assert_eq!(s1.min(s2), 0);
            prop_assert_eq!(c.pairs_drawn, c.consumed1 + s1 as u64);
            prop_assert_eq!(c.pairs_drawn, c.consumed2 + s2 as u64);
            prop_assert_eq!(c.pairs_drawn, c.consumed1.max(c.consumed2));
        }
    }

    #[test]
    fn mse_bounds_and_vef_are_ordered(
        param in param_strategy(),
        r in 2u64..200,
        p in 0.001f64..0.999,
    ) {
        let (p_dep, constant) = mse_upper_bound(param, r, p).unwrap();
        prop_assert!(p_dep > 0.0);
        prop_assert!(p_dep < constant);
        let vef = variance_efficiency_factor(param, r, p).unwrap();
        prop_assert!(vef > 0.0 && vef < 1.0);
        prop_assert!((vef - p_dep / constant).abs() <= 1e-9 * vef);
    }

    #[test]
    fn sef_bound_lies_in_unit_interval(
        r in 2u64..200,
        alpha in 0u64..=1,
        p1 in 0.001f64..0.999,
        p2 in 0.001f64..0.999,
    ) {
        let sef = sef_lower_bound(r, alpha, p1, p2).unwrap();
        prop_assert!(sef > 0.5 && sef < 1.0);
    }

    #[test]
    fn feasible_interval_brackets_the_resolved_ratio(
        rho in 0.001f64..0.09,
        big_r in 0.02f64..50.0,
    ) {
        let (lo, hi) = rr_feasible_interval(rho, 1.0).unwrap();
        prop_assert!(lo < hi);
        if big_r > lo && big_r < hi {
            let (p1, p2) = resolve_cell(rho, big_r).unwrap();
            prop_assert!(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0);
        }
    }
}

#[test]
fn rho_bound_sits_below_every_r_specific_bound() {
    // 50 log-spaced ratios inside the feasible interval, for each rho;
    // the R-independent curve must lie below all R-specific curves built
    // with the closed-form sef lower bound.
    for param in [TargetParameter::RiskRatio, TargetParameter::LogRiskRatio] {
        for mu_bar in [0.04, 0.09] {
            let r = required_successes(mu_bar, param).unwrap();
            for rho in [0.003, 0.01, 0.05] {
                let indep = efficiency_bound_rho(param, r, rho).unwrap();
                let (lo, hi) = rr_feasible_interval(rho, 1.0).unwrap();
                for k in 0..50 {
                    // strictly inside the open interval
                    let t = (k as f64 + 0.5) / 50.0;
                    let big_r = lo * (hi / lo).powf(t);
                    let (p1, p2) = resolve_cell(rho, big_r).unwrap();
                    let sef = sef_lower_bound(r, param.alpha(), p1, p2).unwrap();
                    let rdep =
                        efficiency_lower_bound_r_dependent(param, r, p1, p2, sef).unwrap();
                    assert!(
                        indep <= rdep + 1e-12,
                        "{param} mu={mu_bar} rho={rho} R={big_r}: {indep} > {rdep}"
                    );
                }
            }
        }
    }
}
