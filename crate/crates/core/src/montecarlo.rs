//! Seeded parallel Monte Carlo estimators: the empirical oracle for every
//! closed form in the crate, plus the diversity-slope fit and the
//! relay-use ellipse calibration.
//!
//! Reproducibility contract: an estimate is a pure function of
//! (seed, trials). Trial i's fading draw depends only on (seed, i), and
//! sums are reduced over a fixed tree of [`REDUCTION_BLOCK`]-sized blocks
//! folded in index order with compensated arithmetic, so neither thread
//! count nor dispatch chunking can perturb a single bit. Indicator
//! estimators aggregate integer counts, which commute exactly.

use rayon::prelude::*;

use crate::analysis::{outage_closed_form, outage_formulated_mc_events, OutageEvent};
use crate::channel::{fade_at, FadingStats, Geometry, PowerBudget};
use crate::csi::{
    allocation_under_csi, average_regime, average_snrs, practical_beta_r_unclamped,
    relay_use_rule, CsiModel, EllipseSpec,
};
use crate::error::{CoreError, Result};
use crate::numerics::{fit_slope, NeumaierSum};
use crate::ratecore::{
    classify_regime, direct_rate, rate_constraints, PowerAllocation, Regime,
};

const LN_2: f64 = std::f64::consts::LN_2;

/// Fixed accumulation block: per-block partial sums are computed
/// sequentially and folded in block order, independent of scheduling.
pub const REDUCTION_BLOCK: u64 = 4096;

/// Trial count, base seed, and the dispatch granularity for workers.
/// `chunk` trades scheduling overhead against load balance; it never
/// affects results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub chunk: u64,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64, chunk: u64) -> Result<Self> {
        if trials == 0 || chunk == 0 {
            return Err(CoreError::InvalidParameter(format!(
                "trials and chunk must be at least 1, got {trials} and {chunk}"
            )));
        }
        Ok(Self {
            trials,
            seed,
            chunk,
        })
    }

    pub fn with_seed(trials: u64, seed: u64) -> Result<Self> {
        Self::new(trials, seed, 65_536)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl Estimate {
    /// Binomial estimate from an exact event count.
    fn from_indicator(count: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = count as f64 / n;
        Self {
            mean: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            trials,
        }
    }

    /// Moment estimate from compensated Σx and Σx²; stderr is 0 for a
    /// single trial (no variance information).
    fn from_moments(sum: f64, sum_sq: f64, trials: u64) -> Self {
        let n = trials as f64;
        let mean = sum / n;
        let stderr = if trials > 1 {
            let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            trials,
        }
    }
}

/// Stateless seed derivation for independent per-point streams
/// (splitmix64 finalizer over base ⊕ scrambled index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn block_ranges(trials: u64) -> impl Iterator<Item = (u64, u64)> {
    let blocks = trials.div_ceil(REDUCTION_BLOCK);
    (0..blocks).map(move |b| {
        let lo = b * REDUCTION_BLOCK;
        (lo, trials.min(lo + REDUCTION_BLOCK))
    })
}

fn min_blocks_per_task(cfg: &McConfig) -> usize {
    (cfg.chunk / REDUCTION_BLOCK).max(1) as usize
}

/// Fixed-tree compensated reduction of `eval` over all trials, K lanes.
fn reduce_sums<const K: usize>(cfg: &McConfig, eval: impl Fn(u64) -> [f64; K] + Sync) -> [f64; K] {
    let partials: Vec<[f64; K]> = block_ranges(cfg.trials)
        .collect::<Vec<_>>()
        .into_par_iter()
        .with_min_len(min_blocks_per_task(cfg))
        .map(|(lo, hi)| {
            let mut acc = [NeumaierSum::new(); K];
            for i in lo..hi {
                let v = eval(i);
                for (a, x) in acc.iter_mut().zip(v) {
                    a.add(x);
                }
            }
            acc.map(|a| a.total())
        })
        .collect();
    let mut acc = [NeumaierSum::new(); K];
    for block in partials {
        for (a, x) in acc.iter_mut().zip(block) {
            a.add(x);
        }
    }
    acc.map(|a| a.total())
}

/// Exact integer event counting over all trials, K lanes.
fn reduce_counts<const K: usize>(
    cfg: &McConfig,
    eval: impl Fn(u64) -> [u64; K] + Sync,
) -> [u64; K] {
    block_ranges(cfg.trials)
        .collect::<Vec<_>>()
        .into_par_iter()
        .with_min_len(min_blocks_per_task(cfg))
        .map(|(lo, hi)| {
            let mut acc = [0u64; K];
            for i in lo..hi {
                let v = eval(i);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            acc
        })
        .reduce(
            || [0u64; K],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Empirical regime frequencies.
#[derive(Debug, Clone, Copy)]
pub struct RegimeEstimates {
    pub p0: Estimate,
    pub p1: Estimate,
    pub p2: Estimate,
}

/// Frequencies of the instantaneous regime over sampled fades. The last
/// mean is completed to 1 − p0 − p1 so the reported triple is an exact
/// partition of unity (the raw frequency differs by at most one rounding).
pub fn estimate_regime_probs(
    stats: &FadingStats,
    budget: &PowerBudget,
    cfg: &McConfig,
) -> RegimeEstimates {
    let counts = reduce_counts::<3>(cfg, |i| {
        let fade = fade_at(stats, cfg.seed, i);
        match classify_regime(&fade, budget) {
            Regime::R0 => [1, 0, 0],
            Regime::R1 => [0, 1, 0],
            Regime::R2 => [0, 0, 1],
        }
    });
    let p0 = Estimate::from_indicator(counts[0], cfg.trials);
    let p1 = Estimate::from_indicator(counts[1], cfg.trials);
    let mut p2 = Estimate::from_indicator(counts[2], cfg.trials);
    p2.mean = 1.0 - p0.mean - p1.mean;
    RegimeEstimates { p0, p1, p2 }
}

/// Relay power discipline for the statistics-driven outage policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayPower {
    /// Relay always spends Pr (β_r = Pr in the independent regime).
    Full,
    /// Relay spends only what the CSI model's allocation asks for.
    Partial,
}

/// What the transmitters do on every fade of an outage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutagePolicy {
    /// Fixed source split across all fades, relay at full power: the
    /// sampling counterpart of the closed-form outage. α_s = 0 degenerates
    /// to independent coding at β_r = Pr.
    FixedSplit { alpha_s: f64 },
    /// Transmit parameters induced by a CSI model each fade. Events are
    /// still attributed by the realized regime: decode outcomes depend on
    /// the fade, not on what the model assumed. [`RelayPower::Full`] tops
    /// the repeat power up so the relay spends exactly Pr.
    Csi {
        model: CsiModel,
        relay_power: RelayPower,
    },
}

/// Outage estimate with its per-event breakdown.
#[derive(Debug, Clone, Copy)]
pub struct OutageEstimates {
    pub total: Estimate,
    pub p_dt: Estimate,
    pub p_relay: Estimate,
    pub p_dest: Estimate,
}

/// Empirical outage probability at `target_rate` under a policy.
pub fn estimate_outage(
    stats: &FadingStats,
    budget: &PowerBudget,
    target_rate: f64,
    policy: &OutagePolicy,
    cfg: &McConfig,
) -> Result<OutageEstimates> {
    if !(target_rate.is_finite() && target_rate >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "target rate must be nonnegative, got {target_rate}"
        )));
    }
    let classify = |i: u64| -> OutageEvent {
        let fade = fade_at(stats, cfg.seed, i);
        match policy {
            OutagePolicy::FixedSplit { alpha_s } => {
                let alloc = fixed_split_allocation(*alpha_s, budget);
                outage_formulated_mc_events(&fade, budget, &alloc, target_rate)
            }
            OutagePolicy::Csi { model, relay_power } => {
                let (_, mut alloc) = allocation_under_csi(*model, &fade, stats, budget)
                    .expect("allocation cannot fail on validated inputs");
                if *relay_power == RelayPower::Full {
                    alloc.beta_r = (budget.pr - alloc.k_s * alloc.alpha_s).max(0.0);
                }
                outage_formulated_mc_events(&fade, budget, &alloc, target_rate)
            }
        }
    };
    if let OutagePolicy::FixedSplit { alpha_s } = policy {
        if !(*alpha_s >= 0.0 && *alpha_s < budget.ps) {
            return Err(CoreError::InvalidParameter(format!(
                "fixed split alpha_s must lie in [0, Ps), got {alpha_s}"
            )));
        }
    }
    let counts = reduce_counts::<3>(cfg, |i| match classify(i) {
        OutageEvent::Direct => [1, 0, 0],
        OutageEvent::Relay => [0, 1, 0],
        OutageEvent::Destination => [0, 0, 1],
        OutageEvent::None => [0, 0, 0],
    });
    Ok(OutageEstimates {
        total: Estimate::from_indicator(counts.iter().sum(), cfg.trials),
        p_dt: Estimate::from_indicator(counts[0], cfg.trials),
        p_relay: Estimate::from_indicator(counts[1], cfg.trials),
        p_dest: Estimate::from_indicator(counts[2], cfg.trials),
    })
}

fn fixed_split_allocation(alpha_s: f64, budget: &PowerBudget) -> PowerAllocation {
    if alpha_s > 0.0 {
        PowerAllocation {
            alpha_s,
            beta_s: budget.ps - alpha_s,
            k_s: budget.pr / alpha_s,
            beta_r: 0.0,
        }
    } else {
        PowerAllocation {
            alpha_s: 0.0,
            beta_s: budget.ps,
            k_s: 0.0,
            beta_r: budget.pr,
        }
    }
}

/// Mean achieved rate under a CSI model.
///
/// Perfect adapts per fade and so never falls below direct transmission.
/// Practical/LongTerm commit to the averaged regime; when `gate` carries
/// the node geometry, the relay-use rule can veto relaying outright
/// (rate = J_o on every fade). `None` skips the veto, which the ellipse
/// calibration needs to observe raw composite-vs-direct gains.
pub fn estimate_rate(
    stats: &FadingStats,
    budget: &PowerBudget,
    model: CsiModel,
    gate: Option<&Geometry>,
    cfg: &McConfig,
) -> Result<Estimate> {
    let gated_off = model != CsiModel::Perfect
        && gate.map(|g| !relay_use_rule(g)).unwrap_or(false);
    let rate_of = |i: u64| -> f64 {
        let fade = fade_at(stats, cfg.seed, i);
        if gated_off {
            return direct_rate(&fade, budget);
        }
        let (regime, alloc) = allocation_under_csi(model, &fade, stats, budget)
            .expect("allocation cannot fail on validated inputs");
        if regime == Regime::R0 {
            direct_rate(&fade, budget)
        } else {
            rate_constraints(&fade, &alloc).min()
        }
    };
    let sums = reduce_sums::<2>(cfg, |i| {
        let r = rate_of(i);
        [r, r * r]
    });
    Ok(Estimate::from_moments(sums[0], sums[1], cfg.trials))
}

/// Mean direct-transmission rate over the same fades as [`estimate_rate`]
/// at an identical seed (shared draws make differences low-variance).
pub fn estimate_direct_rate(
    stats: &FadingStats,
    budget: &PowerBudget,
    cfg: &McConfig,
) -> Result<Estimate> {
    let sums = reduce_sums::<2>(cfg, |i| {
        let fade = fade_at(stats, cfg.seed, i);
        let r = direct_rate(&fade, budget);
        [r, r * r]
    });
    Ok(Estimate::from_moments(sums[0], sums[1], cfg.trials))
}

/// Mean relay power saved versus always spending Pr.
///
/// Perfect saves Pr − β_r on instantaneous-R1 fades and nothing
/// elsewhere. Practical saves only when the averaged regime is R1, and
/// `clamp` selects whether its β_r is first clamped to [0, Pr]
/// (transmittable) or left raw (the quantity whose mean the closed form
/// integrates).
pub fn estimate_savings(
    stats: &FadingStats,
    budget: &PowerBudget,
    model: CsiModel,
    clamp: bool,
    cfg: &McConfig,
) -> Result<Estimate> {
    let avg = average_snrs(stats, budget);
    let saving_of: Box<dyn Fn(u64) -> f64 + Sync + '_> = match model {
        CsiModel::Perfect => Box::new(|i| {
            let fade = fade_at(stats, cfg.seed, i);
            if classify_regime(&fade, budget) != Regime::R1 {
                return 0.0;
            }
            let beta_r = budget.ps * (fade.g_rs_sq() - fade.g_ds_sq()) / fade.g_dr_sq();
            (budget.pr - beta_r).clamp(0.0, budget.pr)
        }),
        CsiModel::Practical => {
            if average_regime(&avg) != Regime::R1 {
                // Savings are defined only in the averaged independent
                // regime; everywhere else the policy never withholds power.
                return Ok(Estimate {
                    mean: 0.0,
                    stderr: 0.0,
                    trials: cfg.trials,
                });
            }
            Box::new(move |i| {
                let fade = fade_at(stats, cfg.seed, i);
                let raw = practical_beta_r_unclamped(&fade, &avg, budget);
                let beta_r = if clamp { raw.clamp(0.0, budget.pr) } else { raw };
                budget.pr - beta_r
            })
        }
        CsiModel::LongTerm => {
            return Err(CoreError::InvalidParameter(
                "power savings are defined for the perfect and practical models".into(),
            ))
        }
    };
    let sums = reduce_sums::<2>(cfg, |i| {
        let s = saving_of(i);
        [s, s * s]
    });
    Ok(Estimate::from_moments(sums[0], sums[1], cfg.trials))
}

/// Where a diversity-slope fit takes its outage numbers from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeSource {
    /// Closed-form outage with the source split α_s = frac·Ps.
    ClosedForm { alpha_frac: f64 },
    /// Direct transmission only: Pr[g_ds²·P < 2^R − 1].
    DirectTransmission,
    /// Sampled outage under a policy.
    MonteCarlo {
        policy: OutagePolicy,
        cfg: McConfig,
    },
}

/// Least-squares slope of log10(outage) against snr_db/10, i.e. against
/// log10 of the transmit power. The power at each grid point is set so
/// the average received direct-link SNR equals the grid value:
/// P = λ_ds·10^(snr_db/10), Ps = Pr = P.
///
/// The grid must span at least a decade and sit in the high-SNR region
/// (every outage below 10⁻²), where the decay is clean enough for the
/// order to mean anything.
pub fn diversity_slope(
    stats: &FadingStats,
    target_rate: f64,
    snr_grid_db: &[f64],
    source: &SlopeSource,
) -> Result<f64> {
    if snr_grid_db.len() < 2 {
        return Err(CoreError::InvalidParameter(
            "slope fit needs at least two SNR points".into(),
        ));
    }
    let span = snr_grid_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - snr_grid_db.iter().cloned().fold(f64::INFINITY, f64::min);
    if span.is_nan() || span < 10.0 {
        return Err(CoreError::InvalidParameter(format!(
            "slope fit needs at least one decade of SNR, got {span} dB"
        )));
    }
    let threshold = (target_rate * LN_2).exp_m1();
    let mut xs = Vec::with_capacity(snr_grid_db.len());
    let mut ys = Vec::with_capacity(snr_grid_db.len());
    for &snr_db in snr_grid_db {
        let power = stats.lambda_ds * 10f64.powf(snr_db / 10.0);
        let budget = PowerBudget::equal(power)?;
        let st = FadingStats::from_rates(stats.lambda_rs, stats.lambda_ds, stats.lambda_dr, &budget)?;
        let outage = match source {
            SlopeSource::ClosedForm { alpha_frac } => {
                if !(*alpha_frac >= 0.0 && *alpha_frac < 1.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "alpha fraction must lie in [0, 1), got {alpha_frac}"
                    )));
                }
                let alpha_s = alpha_frac * power;
                outage_closed_form(&st, alpha_s, power - alpha_s, &budget, target_rate)?.total
            }
            SlopeSource::DirectTransmission => -(-st.lambda_ds * threshold / power).exp_m1(),
            SlopeSource::MonteCarlo { policy, cfg } => {
                let est = estimate_outage(&st, &budget, target_rate, policy, cfg)?;
                if est.total.mean == 0.0 {
                    return Err(CoreError::InsufficientTrials(format!(
                        "no outage events at {snr_db} dB in {} trials",
                        cfg.trials
                    )));
                }
                est.total.mean
            }
        };
        if outage.is_nan() || outage <= 0.0 {
            return Err(CoreError::InsufficientTrials(format!(
                "outage underflowed to {outage} at {snr_db} dB"
            )));
        }
        if outage >= 1e-2 {
            return Err(CoreError::InvalidParameter(format!(
                "outage {outage} at {snr_db} dB is outside the high-SNR region"
            )));
        }
        xs.push(snr_db / 10.0);
        ys.push(outage.log10());
    }
    fit_slope(&xs, &ys)
}

/// Result of calibrating the relay-use ellipse against a rate-gain map.
#[derive(Debug, Clone, Copy)]
pub struct EllipseFit {
    pub spec: EllipseSpec,
    /// Grid points entering the threshold fit.
    pub grid_points: usize,
    /// Points the fitted boundary classifies against their simulated sign.
    pub misclassified: usize,
}

/// Fit the relay-use ellipse for a (d_ds, γ, SNR) configuration.
///
/// Simulates the practical-CSI rate gain over direct transmission on a
/// half-plane grid (0.5 m step, upper half by symmetry, only x ≤ d_ds/2
/// where the closer-to-destination shortcut does not already decide) and
/// finds the focal-sum threshold minimizing disagreement with the sign of
/// the simulated gain. Foci are pinned at (2, ±8) in the fit frame, so
/// the semi-axes satisfy a² = b² + 64.
pub fn fit_relay_use_ellipse(
    d_ds: f64,
    gamma: f64,
    snr_db: f64,
    trials_per_point: u64,
    seed: u64,
) -> Result<EllipseFit> {
    let power = crate::channel::snr_to_power(snr_db, d_ds, gamma)?;
    let budget = PowerBudget::equal(power)?;
    let cx = 2.0;
    let (fy, step) = (8.0, 0.5);

    // Candidate relay sites: x in [-0.6 d_ds, 0.5 d_ds], y in [0, 0.8 d_ds].
    let mut samples: Vec<(f64, bool)> = Vec::new();
    let nx = (1.1 * d_ds / step).round() as i64;
    let ny = (0.8 * d_ds / step).round() as i64;
    let mut index = 0u64;
    let mut points = Vec::new();
    for iy in 0..=ny {
        for ix in 0..=nx {
            let x = -0.6 * d_ds + ix as f64 * step;
            let y = iy as f64 * step;
            index += 1;
            let near_source = x.hypot(y) < step / 2.0;
            let near_dest = (x - d_ds).hypot(y) < step / 2.0;
            if x > d_ds / 2.0 || near_source || near_dest {
                continue;
            }
            points.push((x, y, derive_seed(seed, index)));
        }
    }
    let gains: Vec<(f64, bool)> = points
        .par_iter()
        .map(|&(x, y, point_seed)| {
            let geom = Geometry::new([0.0, 0.0], [x, y], [d_ds, 0.0], gamma)
                .expect("grid skips degenerate placements");
            let stats = crate::channel::pathloss_stats(&geom, &budget)
                .expect("positive distances");
            let cfg = McConfig::with_seed(trials_per_point, point_seed)
                .expect("positive trial count");
            let composite = estimate_rate(&stats, &budget, CsiModel::Practical, None, &cfg)
                .expect("validated inputs");
            let direct = estimate_direct_rate(&stats, &budget, &cfg).expect("validated inputs");
            let focal_sum = (x - cx).hypot(y - fy) + (x - cx).hypot(y + fy);
            (focal_sum, composite.mean > direct.mean)
        })
        .collect();
    samples.extend(gains);
    if samples.len() < 8 {
        return Err(CoreError::InvalidParameter(format!(
            "fit grid for d_ds = {d_ds} m leaves only {} usable points",
            samples.len()
        )));
    }

    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite focal sums"));
    let inside_total: usize = samples.iter().filter(|s| s.1).count();
    // Threshold between consecutive focal sums; cost = gain points outside
    // + non-gain points inside. Scan keeps the first minimum.
    let mut inside_below = 0usize;
    let mut best_cost = inside_total; // threshold below everything
    let mut best_threshold = 2.0 * fy + 1e-6;
    for i in 0..samples.len() {
        if samples[i].1 {
            inside_below += 1;
        }
        let outside_kept = (i + 1) - inside_below;
        let cost = outside_kept + (inside_total - inside_below);
        let threshold = if i + 1 < samples.len() {
            0.5 * (samples[i].0 + samples[i + 1].0)
        } else {
            samples[i].0 + step
        };
        if cost < best_cost && threshold > 2.0 * fy {
            best_cost = cost;
            best_threshold = threshold;
        }
    }
    let semi_major = best_threshold / 2.0;
    if semi_major * semi_major <= fy * fy {
        return Err(CoreError::InternalContradiction(format!(
            "fitted semi-major {semi_major} collapses below the focal distance {fy}"
        )));
    }
    Ok(EllipseFit {
        spec: EllipseSpec {
            d_ds,
            gamma,
            semi_major,
            semi_minor: (semi_major * semi_major - fy * fy).sqrt(),
            center_x: cx,
        },
        grid_points: samples.len(),
        misclassified: best_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::regime_probabilities;

    fn budget(ps: f64, pr: f64) -> PowerBudget {
        PowerBudget::new(ps, pr).unwrap()
    }

    fn stats(l_rs: f64, l_ds: f64, l_dr: f64, b: &PowerBudget) -> FadingStats {
        FadingStats::from_rates(l_rs, l_ds, l_dr, b).unwrap()
    }

    fn cfg(trials: u64, seed: u64) -> McConfig {
        McConfig::with_seed(trials, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 1, 1).is_err());
        assert!(McConfig::new(1, 1, 0).is_err());
        assert!(McConfig::new(1, 1, 1).is_ok());
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(42, 0));
        let mut seen: Vec<u64> = (0..64).map(|i| derive_seed(7, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 64);
    }

    #[test]
    fn estimates_identical_across_chunk_sizes_and_pools() {
        let b = budget(2.0, 1.5);
        let st = stats(0.8, 1.9, 0.6, &b);
        let reference = estimate_rate(
            &st,
            &b,
            CsiModel::Perfect,
            None,
            &McConfig::new(20_000, 9, 1).unwrap(),
        )
        .unwrap();
        for chunk in [1, 100, 4096, 9999, 1 << 20] {
            let est = estimate_rate(
                &st,
                &b,
                CsiModel::Perfect,
                None,
                &McConfig::new(20_000, 9, chunk).unwrap(),
            )
            .unwrap();
            assert_eq!(est.mean.to_bits(), reference.mean.to_bits());
            assert_eq!(est.stderr.to_bits(), reference.stderr.to_bits());
        }
        for threads in [1, 2, 7] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let est = pool.install(|| {
                estimate_rate(
                    &st,
                    &b,
                    CsiModel::Perfect,
                    None,
                    &McConfig::new(20_000, 9, 4096).unwrap(),
                )
                .unwrap()
            });
            assert_eq!(est.mean.to_bits(), reference.mean.to_bits());
            assert_eq!(est.stderr.to_bits(), reference.stderr.to_bits());
        }
    }

    #[test]
    fn regime_frequencies_match_closed_form() {
        let b = budget(1.0, 1.0);
        let st = stats(1.0, 2.0, 3.0, &b);
        let expect = regime_probabilities(&st);
        let est = estimate_regime_probs(&st, &b, &cfg(100_000, 17));
        for (e, p) in [
            (est.p0, expect.p0),
            (est.p1, expect.p1),
            (est.p2, expect.p2),
        ] {
            assert!(
                (e.mean - p).abs() <= 3.0 * e.stderr,
                "estimate {} vs {p} (se {})",
                e.mean,
                e.stderr
            );
        }
        assert_eq!(est.p0.mean + est.p1.mean + est.p2.mean, 1.0);
    }

    #[test]
    fn symmetric_regime_split() {
        let b = budget(1.0, 1.0);
        let st = stats(1.4, 1.4, 1.0, &b);
        let est = estimate_regime_probs(&st, &b, &cfg(100_000, 3));
        assert!((est.p0.mean - 0.5).abs() <= 3.0 * est.p0.stderr);
    }

    #[test]
    fn zero_target_rate_never_in_outage() {
        let b = budget(1.0, 1.0);
        let st = stats(1.0, 2.0, 1.0, &b);
        let est = estimate_outage(
            &st,
            &b,
            0.0,
            &OutagePolicy::FixedSplit { alpha_s: 0.25 },
            &cfg(10_000, 5),
        )
        .unwrap();
        assert_eq!(est.total.mean, 0.0);
    }

    #[test]
    fn dead_relay_links_leave_only_direct_outage() {
        let p = 10.0;
        let b = budget(p, p);
        let st = FadingStats::from_rates(f64::INFINITY, 2.0, f64::INFINITY, &b).unwrap();
        let est = estimate_outage(
            &st,
            &b,
            2.0,
            &OutagePolicy::FixedSplit { alpha_s: 0.25 * p },
            &cfg(100_000, 11),
        )
        .unwrap();
        assert_eq!(est.p_relay.mean, 0.0);
        assert_eq!(est.p_dest.mean, 0.0);
        let t = (2.0f64 * LN_2).exp_m1();
        let expect = -(-st.lambda_ds * t / p).exp_m1();
        assert!(
            (est.p_dt.mean - expect).abs() <= 3.0 * est.p_dt.stderr,
            "direct outage {} vs {expect}",
            est.p_dt.mean
        );
    }

    #[test]
    fn fixed_split_outage_matches_closed_form() {
        let p = 6.0;
        let b = budget(p, p);
        let st = stats(0.7, 1.8, 1.1, &b);
        let closed = outage_closed_form(&st, 0.25 * p, 0.75 * p, &b, 2.0).unwrap();
        let est = estimate_outage(
            &st,
            &b,
            2.0,
            &OutagePolicy::FixedSplit { alpha_s: 0.25 * p },
            &cfg(200_000, 23),
        )
        .unwrap();
        for (e, c) in [
            (est.p_dt, closed.p_dt),
            (est.p_relay, closed.p_relay),
            (est.p_dest, closed.p_dest),
            (est.total, closed.total),
        ] {
            assert!(
                (e.mean - c).abs() <= 3.0 * e.stderr,
                "estimate {} vs closed {c} (se {})",
                e.mean,
                e.stderr
            );
        }
    }

    #[test]
    fn full_power_policy_reduces_to_fixed_split() {
        let p = 6.0;
        let b = budget(p, p);
        let st = stats(0.7, 1.8, 1.1, &b);
        let c = cfg(50_000, 61);
        let (_, alloc) = crate::csi::long_term_allocation(&st, &b);
        let split = estimate_outage(
            &st,
            &b,
            2.0,
            &OutagePolicy::FixedSplit {
                alpha_s: alloc.alpha_s,
            },
            &c,
        )
        .unwrap();
        let full = estimate_outage(
            &st,
            &b,
            2.0,
            &OutagePolicy::Csi {
                model: CsiModel::LongTerm,
                relay_power: RelayPower::Full,
            },
            &c,
        )
        .unwrap();
        assert_eq!(full.total.mean.to_bits(), split.total.mean.to_bits());
        assert_eq!(full.p_dest.mean.to_bits(), split.p_dest.mean.to_bits());
        // Withholding repeat power cannot help.
        let partial = estimate_outage(
            &st,
            &b,
            2.0,
            &OutagePolicy::Csi {
                model: CsiModel::LongTerm,
                relay_power: RelayPower::Partial,
            },
            &c,
        )
        .unwrap();
        assert!(partial.total.mean >= full.total.mean - 3.0 * full.total.stderr);
    }

    #[test]
    fn perfect_rate_dominates_direct_on_shared_fades() {
        let b = budget(1.0, 1.0);
        let st = stats(0.4, 1.5, 0.7, &b);
        let c = cfg(20_000, 31);
        let composite = estimate_rate(&st, &b, CsiModel::Perfect, None, &c).unwrap();
        let direct = estimate_direct_rate(&st, &b, &c).unwrap();
        assert!(composite.mean >= direct.mean);
    }

    #[test]
    fn useless_relay_reduces_to_direct_transmission() {
        let b = budget(1.0, 1.0);
        let st = stats(2.0, 1.0, 1e12, &b);
        let c = cfg(20_000, 13);
        let composite = estimate_rate(&st, &b, CsiModel::Perfect, None, &c).unwrap();
        let direct = estimate_direct_rate(&st, &b, &c).unwrap();
        assert!((composite.mean - direct.mean).abs() < 1e-6);
    }

    #[test]
    fn geometry_gate_vetoes_relaying_bitwise() {
        let geom = Geometry::new([0.0, 0.0], [-15.0, 0.0], [20.0, 0.0], 3.6).unwrap();
        let p = crate::channel::snr_to_power(5.0, 20.0, 3.6).unwrap();
        let b = PowerBudget::equal(p).unwrap();
        let st = crate::channel::pathloss_stats(&geom, &b).unwrap();
        let c = cfg(10_000, 19);
        let gated = estimate_rate(&st, &b, CsiModel::Practical, Some(&geom), &c).unwrap();
        let direct = estimate_direct_rate(&st, &b, &c).unwrap();
        assert_eq!(gated.mean.to_bits(), direct.mean.to_bits());
        assert_eq!(gated.stderr.to_bits(), direct.stderr.to_bits());
    }

    #[test]
    fn midpoint_practical_gain_band() {
        let geom = Geometry::new([0.0, 0.0], [10.0, 0.0], [20.0, 0.0], 3.6).unwrap();
        let p = crate::channel::snr_to_power(5.0, 20.0, 3.6).unwrap();
        let b = PowerBudget::equal(p).unwrap();
        let st = crate::channel::pathloss_stats(&geom, &b).unwrap();
        let c = cfg(10_000, 29);
        let practical = estimate_rate(&st, &b, CsiModel::Practical, Some(&geom), &c).unwrap();
        let direct = estimate_direct_rate(&st, &b, &c).unwrap();
        let ratio = practical.mean / direct.mean;
        assert!((1.5..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn savings_estimates_match_closed_forms() {
        let b = budget(1.0, 1.0);
        let st = stats(1.0, 1.0, 1.0, &b);
        let est = estimate_savings(&st, &b, CsiModel::Perfect, true, &cfg(100_000, 37)).unwrap();
        let expect = (1.0 - LN_2) / 2.0;
        assert!(
            (est.mean - expect).abs() <= 3.0 * est.stderr,
            "perfect savings {} vs {expect}",
            est.mean
        );

        let st = stats(1.0, 2.0, 1.0, &b);
        let est =
            estimate_savings(&st, &b, CsiModel::Practical, false, &cfg(100_000, 41)).unwrap();
        assert!(
            (est.mean - 0.5).abs() <= 3.0 * est.stderr,
            "practical savings {}",
            est.mean
        );

        let st = stats(0.1, 2.0, 10.0, &b);
        let est =
            estimate_savings(&st, &b, CsiModel::Practical, false, &cfg(1_000, 43)).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));

        assert!(estimate_savings(&st, &b, CsiModel::LongTerm, true, &cfg(10, 1)).is_err());
    }

    #[test]
    fn stderr_halves_when_trials_quadruple() {
        let b = budget(1.0, 1.0);
        let st = stats(0.9, 1.1, 0.8, &b);
        let small = estimate_rate(&st, &b, CsiModel::Perfect, None, &cfg(25_000, 53)).unwrap();
        let large = estimate_rate(&st, &b, CsiModel::Perfect, None, &cfg(100_000, 53)).unwrap();
        let ratio = small.stderr / large.stderr;
        assert!((1.6..=2.4).contains(&ratio), "stderr ratio {ratio}");
    }

    #[test]
    fn slope_fit_recovers_diversity_orders() {
        let b = budget(1.0, 1.0);
        let st = stats(1.0, 2f64.powf(3.6), 1.5, &b);
        let grid: Vec<f64> = (0..=4).map(|i| 30.0 + 5.0 * i as f64).collect();
        let slope = diversity_slope(
            &st,
            3.0,
            &grid,
            &SlopeSource::ClosedForm { alpha_frac: 0.25 },
        )
        .unwrap();
        assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
        let dt = diversity_slope(&st, 3.0, &grid, &SlopeSource::DirectTransmission).unwrap();
        assert!((dt + 1.0).abs() < 0.2, "slope {dt}");

        // Scaling every rate moves the curve, not the slope.
        let st2 = stats(2.0, 2.0 * 2f64.powf(3.6), 3.0, &b);
        let slope2 = diversity_slope(
            &st2,
            3.0,
            &grid,
            &SlopeSource::ClosedForm { alpha_frac: 0.25 },
        )
        .unwrap();
        assert!((slope - slope2).abs() < 0.05, "{slope} vs {slope2}");
    }

    #[test]
    fn slope_fit_validates_grid_and_regime() {
        let b = budget(1.0, 1.0);
        let st = stats(1.0, 2f64.powf(3.6), 1.5, &b);
        let short: Vec<f64> = vec![30.0, 35.0];
        assert!(matches!(
            diversity_slope(&st, 3.0, &short, &SlopeSource::DirectTransmission),
            Err(CoreError::InvalidParameter(_))
        ));
        let low: Vec<f64> = vec![0.0, 5.0, 10.0];
        assert!(diversity_slope(&st, 3.0, &low, &SlopeSource::DirectTransmission).is_err());
        assert!(matches!(
            diversity_slope(&st, 3.0, &[30.0], &SlopeSource::DirectTransmission),
            Err(CoreError::InvalidParameter(_))
        ));
    }
}
