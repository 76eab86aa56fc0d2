//! Property tests: structural invariants that must hold on any input,
//! not just the worked examples.

use proptest::prelude::*;

use dfrelay_core::analysis::{
    expected_savings_perfect, expected_savings_practical, hypoexp_pdf, outage_closed_form,
    regime_probabilities,
};
use dfrelay_core::channel::{FadingStats, LinkGains, PowerBudget};
use dfrelay_core::csi::{allocation_under_csi, average_regime, average_snrs, CsiModel};
use dfrelay_core::montecarlo::{estimate_regime_probs, McConfig};
use dfrelay_core::ratecore::{
    classify_regime, direct_rate, optimal_allocation, rate_constraints, PowerAllocation, Regime,
};

fn gain() -> impl Strategy<Value = f64> {
    // Log-uniform over six decades keeps all three regimes reachable.
    (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))
}

fn power() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

fn rate() -> impl Strategy<Value = f64> {
    0.05f64..2.0
}

prop_compose! {
    fn gains_and_budget()(
        g_rs in gain(), g_ds in gain(), g_dr in gain(),
        ps in power(), pr in power(),
    ) -> (LinkGains, PowerBudget) {
        (
            LinkGains::new(g_rs, g_ds, g_dr).unwrap(),
            PowerBudget::new(ps, pr).unwrap(),
        )
    }
}

prop_compose! {
    fn stats_and_budget()(
        l_rs in rate(), l_ds in rate(), l_dr in rate(),
        ps in power(), pr in power(),
    ) -> (FadingStats, PowerBudget) {
        let budget = PowerBudget::new(ps, pr).unwrap();
        (FadingStats::from_rates(l_rs, l_ds, l_dr, &budget).unwrap(), budget)
    }
}

proptest! {
    #[test]
    fn regime_partition_matches_thresholds((gains, budget) in gains_and_budget()) {
        let regime = classify_regime(&gains, &budget);
        let lower = gains.g_rs_sq() <= gains.g_ds_sq();
        let upper = gains.g_rs_sq()
            <= gains.g_ds_sq() + budget.pr / budget.ps * gains.g_dr_sq();
        let expected = if lower {
            Regime::R0
        } else if upper {
            Regime::R1
        } else {
            Regime::R2
        };
        prop_assert_eq!(regime, expected);
    }

    #[test]
    fn optimal_allocation_is_feasible((gains, budget) in gains_and_budget()) {
        let (regime, alloc, rate) = optimal_allocation(&gains, &budget).unwrap();
        prop_assert!(alloc.check_feasible(&budget).is_ok());
        prop_assert!(
            (alloc.alpha_s + alloc.beta_s - budget.ps).abs() <= 16.0 * f64::EPSILON * budget.ps
        );
        prop_assert!(alloc.beta_r >= 0.0 && alloc.beta_r <= budget.pr * (1.0 + 1e-12));
        prop_assert!(rate.is_finite() && rate >= 0.0);
        if regime == Regime::R0 {
            prop_assert_eq!(alloc.alpha_s, 0.0);
            prop_assert_eq!(alloc.beta_r, 0.0);
        }
    }

    #[test]
    fn optimal_never_below_direct((gains, budget) in gains_and_budget()) {
        let (_, _, rate) = optimal_allocation(&gains, &budget).unwrap();
        prop_assert!(rate >= direct_rate(&gains, &budget) - 1e-12);
    }

    #[test]
    fn no_feasible_allocation_beats_the_closed_form(
        (gains, budget) in gains_and_budget(),
        alpha_frac in 0.0f64..0.999,
        repeat_frac in 0.0f64..1.0,
    ) {
        let (_, _, best) = optimal_allocation(&gains, &budget).unwrap();
        let alpha_s = alpha_frac * budget.ps;
        let beta_r = repeat_frac * budget.pr;
        let k_s = if alpha_s > 0.0 { (budget.pr - beta_r) / alpha_s } else { 0.0 };
        let rival = PowerAllocation {
            alpha_s,
            beta_s: budget.ps - alpha_s,
            k_s,
            beta_r,
        };
        prop_assert!(rival.check_feasible(&budget).is_ok());
        let pair = rate_constraints(&gains, &rival);
        prop_assert!(pair.min() <= best + 1e-9,
            "rival {} beats closed form {}", pair.min(), best);
    }

    #[test]
    fn reduced_csi_allocations_are_transmittable(
        (gains, budget) in gains_and_budget(),
        l_rs in rate(), l_ds in rate(), l_dr in rate(),
        model in prop::sample::select(vec![CsiModel::Practical, CsiModel::LongTerm]),
    ) {
        let stats = FadingStats::from_rates(l_rs, l_ds, l_dr, &budget).unwrap();
        let (_, alloc) = allocation_under_csi(model, &gains, &stats, &budget).unwrap();
        prop_assert!(alloc.check_feasible(&budget).is_ok());
    }

    #[test]
    fn regime_probabilities_form_a_simplex((stats, _) in stats_and_budget()) {
        let p = regime_probabilities(&stats);
        for v in [p.p0, p.p1, p.p2] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((p.p0 + p.p1 + p.p2 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn outage_components_are_probabilities(
        (stats, budget) in stats_and_budget(),
        alpha_frac in 0.0f64..0.99,
        target in 0.2f64..6.0,
    ) {
        let alpha_s = alpha_frac * budget.ps;
        let out = outage_closed_form(&stats, alpha_s, budget.ps - alpha_s, &budget, target)
            .unwrap();
        for v in [out.p_dt, out.p_relay, out.p_dest, out.total] {
            prop_assert!((0.0..=1.0 + 1e-9).contains(&v), "component {v}");
        }
        let sum = out.p_dt + out.p_relay + out.p_dest;
        prop_assert!((out.total - sum).abs() <= 1e-12);
    }

    #[test]
    fn outage_decreases_with_power(
        (stats, _) in stats_and_budget(),
        alpha_frac in 0.0f64..0.99,
        target in 0.2f64..4.0,
        p_low in 1.0f64..100.0,
    ) {
        let totals: Vec<f64> = [p_low, 4.0 * p_low].iter().map(|&p| {
            let budget = PowerBudget::equal(p).unwrap();
            let st = FadingStats::from_rates(
                stats.lambda_rs, stats.lambda_ds, stats.lambda_dr, &budget).unwrap();
            outage_closed_form(&st, alpha_frac * p, p - alpha_frac * p, &budget, target)
                .unwrap()
                .total
        }).collect();
        prop_assert!(totals[1] <= totals[0] + 1e-9);
    }

    #[test]
    fn hypoexp_density_nonnegative(
        l_ds in rate(),
        gap in 0.0f64..2.0,
        w in -1.0f64..50.0,
    ) {
        let v = hypoexp_pdf(w, l_ds, l_ds + gap);
        prop_assert!(v >= 0.0);
        if w < 0.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn savings_stay_within_the_relay_budget((stats, budget) in stats_and_budget()) {
        let perfect = expected_savings_perfect(&stats, &budget);
        prop_assert!((0.0..=budget.pr).contains(&perfect));
        let practical = expected_savings_practical(&stats, &budget);
        prop_assert!((0.0..=budget.pr).contains(&practical));
        if average_regime(&average_snrs(&stats, &budget)) != Regime::R1 {
            prop_assert_eq!(practical, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimates_do_not_depend_on_chunking(
        (stats, budget) in stats_and_budget(),
        chunk_a in 1u64..10_000,
        chunk_b in 1u64..10_000,
        seed in any::<u64>(),
    ) {
        let run = |chunk| {
            let cfg = McConfig::new(3_000, seed, chunk).unwrap();
            estimate_regime_probs(&stats, &budget, &cfg)
        };
        let (a, b) = (run(chunk_a), run(chunk_b));
        prop_assert_eq!(a.p0.mean.to_bits(), b.p0.mean.to_bits());
        prop_assert_eq!(a.p1.mean.to_bits(), b.p1.mean.to_bits());
        prop_assert_eq!(a.p2.mean.to_bits(), b.p2.mean.to_bits());
        prop_assert_eq!(a.p1.stderr.to_bits(), b.p1.stderr.to_bits());
    }
}
