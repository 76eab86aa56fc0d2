//! Self-check suite: every closed form in the library against an
//! independent oracle (exhaustive grid search, Monte Carlo, or
//! quadrature), with measured deviations in the report. All sampling is
//! seeded, so a report is bitwise reproducible at any worker count.

use clap::{Args, ValueEnum};

use dfrelay_core::analysis::{
    expected_savings_perfect, expected_savings_perfect_quadrature, expected_savings_practical,
    outage_asymptotic, outage_closed_form, regime_probabilities,
};
use dfrelay_core::channel::{fade_at, pathloss_stats, snr_to_power, FadingStats, Geometry, PowerBudget};
use dfrelay_core::csi::{long_term_allocation, CsiModel};
use dfrelay_core::montecarlo::{
    derive_seed, diversity_slope, estimate_outage, estimate_regime_probs, estimate_savings,
    Estimate, McConfig, OutagePolicy, SlopeSource,
};
use dfrelay_core::ratecore::{
    optimal_allocation, oracle_allocation, rate_constraints, OracleGrid, Regime,
};

use crate::args::CommonArgs;
use crate::config::{parse_value, Overridable};
use crate::csvout::CsvDoc;
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    /// 10⁵ draws per estimate; finishes in seconds.
    Quick,
    /// 10⁶ draws per estimate.
    Full,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, value_enum, default_value_t = Level::Quick)]
    pub level: Level,

    /// Override the per-estimate draw count implied by the level.
    #[arg(long)]
    pub trials: Option<u64>,

    /// Corrupt one closed form before comparison; the suite must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

impl Overridable for VerifyArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "level" => {
                self.level = ValueEnum::from_str(value, true)
                    .map_err(|_| format!("config key 'level': unknown level '{value}'"))?
            }
            "trials" => self.trials = Some(parse_value(key, value)?),
            _ => return self.common.set(key, value),
        }
        Ok(true)
    }
}

struct Metric {
    name: &'static str,
    value: f64,
    limit: f64,
}

impl Metric {
    fn ok(&self) -> bool {
        self.value <= self.limit
    }
}

struct Check {
    name: &'static str,
    metrics: Vec<Metric>,
}

impl Check {
    fn passed(&self) -> bool {
        self.metrics.iter().all(Metric::ok)
    }

    fn worst(&self) -> &Metric {
        self.metrics
            .iter()
            .max_by(|a, b| {
                (a.value / a.limit.max(1e-300))
                    .partial_cmp(&(b.value / b.limit.max(1e-300)))
                    .expect("finite metric ratios")
            })
            .expect("every check reports at least one metric")
    }
}

fn z_score(est: &Estimate, truth: f64) -> f64 {
    if est.stderr == 0.0 {
        if est.mean == truth {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (est.mean - truth).abs() / est.stderr
    }
}

fn allocation_optimality(channels: u64, seed: u64) -> Result<Check, Failure> {
    let budget = PowerBudget::new(1.5, 1.0)?;
    let stats = FadingStats::from_rates(1.0, 2.0, 1.0, &budget)?;
    let grid = OracleGrid::default();
    let mut max_deficit = f64::NEG_INFINITY;
    for i in 0..channels {
        let gains = fade_at(&stats, seed, i);
        let (_, _, rate) = optimal_allocation(&gains, &budget)?;
        let (_, best) = oracle_allocation(&gains, &budget, &grid)?;
        max_deficit = max_deficit.max(best - rate);
    }
    Ok(Check {
        name: "allocation_optimality",
        metrics: vec![Metric {
            name: "max_deficit_vs_refined_oracle",
            value: max_deficit,
            limit: 1e-6,
        }],
    })
}

fn rate_crossing(seed: u64) -> Result<Check, Failure> {
    let budget = PowerBudget::new(1.5, 1.0)?;
    let stats = FadingStats::from_rates(1.0, 2.0, 1.0, &budget)?;
    let mut max_gap = 0.0f64;
    for i in 0..10_000 {
        let gains = fade_at(&stats, seed, i);
        let (regime, alloc, _) = optimal_allocation(&gains, &budget)?;
        if regime != Regime::R0 {
            let pair = rate_constraints(&gains, &alloc);
            max_gap = max_gap.max((pair.j1 - pair.j2).abs());
        }
    }
    Ok(Check {
        name: "rate_crossing",
        metrics: vec![Metric {
            name: "max_rate_gap_off_direct",
            value: max_gap,
            limit: 1e-9,
        }],
    })
}

fn regime_probs(n: u64, seed: u64, full: bool) -> Result<Check, Failure> {
    let mut tuples: Vec<(f64, f64, f64, f64, f64)> = vec![
        (1.0, 2.0, 3.0, 1.0, 1.0),
        (1.0, 1.0, 1.0, 2.0, 1.0),
        (0.5, 2.0, 1.5, 1.0, 2.0),
    ];
    if full {
        tuples.extend([
            (3.0, 1.0, 0.5, 1.0, 1.0),
            (1.0, 4.0, 0.25, 1.0, 3.0),
            (2.0, 2.0, 2.0, 3.0, 1.0),
        ]);
    }
    let mut metrics = Vec::new();
    let names = ["max_z_tuple_1", "max_z_tuple_2", "max_z_tuple_3",
        "max_z_tuple_4", "max_z_tuple_5", "max_z_tuple_6"];
    for (idx, &(l_rs, l_ds, l_dr, ps, pr)) in tuples.iter().enumerate() {
        let budget = PowerBudget::new(ps, pr)?;
        let stats = FadingStats::from_rates(l_rs, l_ds, l_dr, &budget)?;
        let closed = regime_probabilities(&stats);
        let cfg = McConfig::with_seed(n, derive_seed(seed, idx as u64))?;
        let est = estimate_regime_probs(&stats, &budget, &cfg);
        let worst = z_score(&est.p0, closed.p0)
            .max(z_score(&est.p1, closed.p1))
            .max(z_score(&est.p2, closed.p2));
        metrics.push(Metric {
            name: names[idx],
            value: worst,
            limit: 3.0,
        });
    }
    Ok(Check {
        name: "regime_probabilities",
        metrics,
    })
}

fn outage_components(n: u64, seed: u64, inject: bool) -> Result<Check, Failure> {
    let geom = Geometry::new([0.0, 0.0], [10.0, 0.0], [20.0, 0.0], 3.6)?;
    let target = 5.0;
    let fault = if inject { 1.10 } else { 1.0 };
    let mut metrics = Vec::new();
    let names = ["max_z_at_5db", "max_z_at_15db", "max_z_at_25db"];
    for (idx, snr_db) in [5.0, 15.0, 25.0].into_iter().enumerate() {
        let power = snr_to_power(snr_db, 20.0, 3.6)?;
        let budget = PowerBudget::equal(power)?;
        let stats = pathloss_stats(&geom, &budget)?;
        let (_, alloc) = long_term_allocation(&stats, &budget);
        let closed = outage_closed_form(
            &stats,
            alloc.alpha_s,
            budget.ps - alloc.alpha_s,
            &budget,
            target,
        )?;
        let cfg = McConfig::with_seed(n, derive_seed(seed, idx as u64))?;
        let est = estimate_outage(
            &stats,
            &budget,
            target,
            &OutagePolicy::FixedSplit {
                alpha_s: alloc.alpha_s,
            },
            &cfg,
        )?;
        let worst = z_score(&est.p_dt, closed.p_dt * fault)
            .max(z_score(&est.p_relay, closed.p_relay * fault))
            .max(z_score(&est.p_dest, closed.p_dest * fault))
            .max(z_score(&est.total, closed.total * fault));
        metrics.push(Metric {
            name: names[idx],
            value: worst,
            limit: 3.0,
        });
    }
    Ok(Check {
        name: "outage_components",
        metrics,
    })
}

fn savings_perfect(n: u64, seed: u64) -> Result<Check, Failure> {
    let budget = PowerBudget::new(1.0, 1.0)?;
    let ones = FadingStats::from_rates(1.0, 1.0, 1.0, &budget)?;
    let mixed = FadingStats::from_rates(0.7, 1.3, 0.9, &budget)?;
    let mut metrics = Vec::new();
    for (name, stats, k) in [
        ("z_symmetric_rates", &ones, 0u64),
        ("z_mixed_rates", &mixed, 1),
    ] {
        let closed = expected_savings_perfect(stats, &budget);
        let cfg = McConfig::with_seed(n, derive_seed(seed, k))?;
        let est = estimate_savings(stats, &budget, CsiModel::Perfect, true, &cfg)?;
        metrics.push(Metric {
            name,
            value: z_score(&est, closed),
            limit: 3.0,
        });
    }
    let quad = expected_savings_perfect_quadrature(&ones, &budget, 1e-8)?;
    metrics.push(Metric {
        name: "quadrature_gap",
        value: (quad - expected_savings_perfect(&ones, &budget)).abs(),
        limit: 1e-6,
    });
    Ok(Check {
        name: "savings_perfect",
        metrics,
    })
}

fn savings_practical(n: u64, seed: u64) -> Result<Check, Failure> {
    let budget = PowerBudget::new(1.0, 1.0)?;
    let r1 = FadingStats::from_rates(1.0, 2.0, 1.0, &budget)?;
    let closed = expected_savings_practical(&r1, &budget);
    let cfg = McConfig::with_seed(n, derive_seed(seed, 0))?;
    let est = estimate_savings(&r1, &budget, CsiModel::Practical, false, &cfg)?;
    let r2 = FadingStats::from_rates(0.1, 2.0, 10.0, &budget)?;
    let outside = estimate_savings(&r2, &budget, CsiModel::Practical, false, &cfg)?;
    Ok(Check {
        name: "savings_practical",
        metrics: vec![
            Metric {
                name: "z_averaged_independent_regime",
                value: z_score(&est, closed),
                limit: 3.0,
            },
            Metric {
                name: "outside_regime_abs",
                value: outside.mean.abs().max(expected_savings_practical(&r2, &budget)),
                limit: 0.0,
            },
        ],
    })
}

fn diversity_orders() -> Result<Check, Failure> {
    let budget = PowerBudget::new(1.0, 1.0)?;
    let stats = FadingStats::from_rates(1.0, 2f64.powf(3.6), 1.5, &budget)?;
    let grid: Vec<f64> = (0..=4).map(|i| 30.0 + 5.0 * i as f64).collect();
    let composite = diversity_slope(
        &stats,
        3.0,
        &grid,
        &SlopeSource::ClosedForm { alpha_frac: 0.25 },
    )?;
    let direct = diversity_slope(&stats, 3.0, &grid, &SlopeSource::DirectTransmission)?;
    Ok(Check {
        name: "diversity_slope",
        metrics: vec![
            Metric {
                name: "composite_slope_gap_from_minus_2",
                value: (composite + 2.0).abs(),
                limit: 0.2,
            },
            Metric {
                name: "direct_slope_gap_from_minus_1",
                value: (direct + 1.0).abs(),
                limit: 0.2,
            },
        ],
    })
}

fn asymptotic_consistency() -> Result<Check, Failure> {
    let snr_db = 40.0;
    let power = snr_to_power(snr_db, 20.0, 3.6)?;
    let budget = PowerBudget::equal(power)?;
    let geom = Geometry::new([0.0, 0.0], [10.0, 0.0], [20.0, 0.0], 3.6)?;
    let stats = pathloss_stats(&geom, &budget)?;
    let mut metrics = Vec::new();
    for (name, a) in [
        ("rel_err_split_0", 0.0),
        ("rel_err_split_25", 0.25),
        ("rel_err_split_50", 0.5),
    ] {
        let b = 1.0 - a;
        let closed =
            outage_closed_form(&stats, a * power, b * power, &budget, 5.0)?;
        let asym = outage_asymptotic(&stats, a, b, power, 5.0)?;
        metrics.push(Metric {
            name,
            value: (asym.total - closed.total).abs() / closed.total,
            limit: 0.10,
        });
    }
    Ok(Check {
        name: "asymptotic_consistency",
        metrics,
    })
}

/// Run the suite, print one pass/fail line per check, write the CSV
/// report, and fail the process if any check failed.
pub fn run_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let n = args.trials.unwrap_or(match args.level {
        Level::Quick => 100_000,
        Level::Full => 1_000_000,
    });
    if n == 0 {
        return Err(Failure::Validation("trials must be at least 1".into()));
    }
    let channels = match args.level {
        Level::Quick => 200,
        Level::Full => 1000,
    };
    let seed = args.common.seed;
    let full = args.level == Level::Full;

    let started = std::time::Instant::now();
    let checks = vec![
        allocation_optimality(channels, derive_seed(seed, 101))?,
        rate_crossing(derive_seed(seed, 102))?,
        regime_probs(n, derive_seed(seed, 103), full)?,
        outage_components(n, derive_seed(seed, 104), args.inject_fault)?,
        savings_perfect(n, derive_seed(seed, 105))?,
        savings_practical(n, derive_seed(seed, 106))?,
        diversity_orders()?,
        asymptotic_consistency()?,
    ];

    let mut doc = CsvDoc::new("verify");
    doc.param(
        "level",
        match args.level {
            Level::Quick => "quick",
            Level::Full => "full",
        },
    );
    doc.param("trials_per_estimate", n);
    doc.param("seed", seed);
    if args.inject_fault {
        doc.param("inject_fault", true);
    }
    doc.columns(&["check", "metric", "value", "limit", "status"]);
    let mut all_passed = true;
    for check in &checks {
        let worst = check.worst();
        println!(
            "{} {} {}={:.3e} (limit {:.1e})",
            if check.passed() { "PASS" } else { "FAIL" },
            check.name,
            worst.name,
            worst.value,
            worst.limit
        );
        for m in &check.metrics {
            doc.row([
                check.name.to_string(),
                m.name.to_string(),
                format!("{:.6e}", m.value),
                format!("{:.6e}", m.limit),
                if m.ok() { "pass" } else { "fail" }.to_string(),
            ]);
        }
        all_passed &= check.passed();
    }
    println!(
        "{}: {} checks in {:.1} s",
        if all_passed { "ok" } else { "FAILED" },
        checks.len(),
        started.elapsed().as_secs_f64()
    );
    doc.write_to(&args.common.out).map_err(Failure::Runtime)?;
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
