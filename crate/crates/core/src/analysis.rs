//! Closed-form performance analysis under Rayleigh fading: regime
//! probabilities, outage probability of the composite scheme with a fixed
//! source power split, its high-SNR behavior, and the expected relay power
//! savings under perfect and practical channel knowledge.
//!
//! Outage decomposes over disjoint events (R = target rate):
//!
//! - direct outage:      R0 and J_o < R,
//! - relay outage:       (R1 ∪ R2) and J1 < R,
//! - destination outage: relay decoded but the destination cannot,
//!   J2 < R ≤ J1; with the full-relay-power split used by the closed form
//!   this can only happen in R2.
//!
//! The closed form fixes (α_s, β_s) with α_s + β_s = Ps across fades: in
//! R2 the relay puts everything on the coherent part (k_s = Pr/α_s,
//! β_r = 0); α_s = 0 degenerates to independent coding at β_r = Pr.

use crate::channel::{FadingStats, LinkGains, PowerBudget};
use crate::error::{CoreError, Result};
use crate::numerics::adaptive_simpson;
use crate::ratecore::{classify_regime, direct_rate, rate_constraints, PowerAllocation, Regime};

const LN_2: f64 = std::f64::consts::LN_2;

/// Probability of each link-state regime under Rayleigh fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeProbabilities {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Outage probability split over the disjoint failure events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageBreakdown {
    pub p_dt: f64,
    pub p_relay: f64,
    pub p_dest: f64,
    pub total: f64,
}

impl OutageBreakdown {
    fn from_components(p_dt: f64, p_relay: f64, p_dest: f64) -> Self {
        // Negative values can only be quadrature/cancellation dust.
        let p_dt = p_dt.max(0.0);
        let p_relay = p_relay.max(0.0);
        let p_dest = p_dest.max(0.0);
        let total = p_dt + p_relay + p_dest;
        debug_assert!(total <= 1.0 + 1e-9, "outage components sum to {total}");
        Self {
            p_dt,
            p_relay,
            p_dest,
            total,
        }
    }
}

/// p0 = λ_rs/(λ_ds+λ_rs); p1, p2 split the rest by λ_rs vs λ̃_dr.
pub fn regime_probabilities(stats: &FadingStats) -> RegimeProbabilities {
    let l_rs = stats.lambda_rs;
    let l_ds = stats.lambda_ds;
    let l_dr = stats.lambda_dr_tilde;
    let pair = l_rs + l_ds;
    RegimeProbabilities {
        p0: l_rs / pair,
        p1: l_rs * l_ds / (pair * (l_rs + l_dr)),
        p2: l_ds * l_dr / (pair * (l_rs + l_dr)),
    }
}

/// Density of the sum of two independent exponentials with rates λ_ds and
/// λ̃_dr (the direct plus scaled relay-destination squared gains). Near the
/// equal-rate degeneracy the gamma limit λ²·w·e^{−λw} takes over.
pub fn hypoexp_pdf(w: f64, lambda_ds: f64, lambda_dr_tilde: f64) -> f64 {
    if w < 0.0 {
        return 0.0;
    }
    let gap = (lambda_dr_tilde - lambda_ds).abs();
    if gap < 1e-9 * lambda_ds.max(lambda_dr_tilde) {
        let l = 0.5 * (lambda_ds + lambda_dr_tilde);
        l * l * w * (-l * w).exp()
    } else {
        lambda_ds * lambda_dr_tilde / (lambda_dr_tilde - lambda_ds)
            * ((-lambda_ds * w).exp() - (-lambda_dr_tilde * w).exp())
    }
}

/// Threshold constants of the outage closed form for a fixed source split.
///
/// β1 is the direct-transmission gain threshold, η1 the relay-decoding
/// threshold, and ζ1(g_ds) the residual relay-destination gain the
/// destination needs once the direct link contributes g_ds. c1, c2 weight
/// the regime-conditioning terms.
#[derive(Debug, Clone, Copy)]
pub struct OutageConstants {
    pub beta1: f64,
    pub eta1: f64,
    pub c1: f64,
    pub c2: f64,
    alpha_s: f64,
    ps: f64,
    threshold: f64,
}

impl OutageConstants {
    pub fn new(
        stats: &FadingStats,
        alpha_s: f64,
        beta_s: f64,
        budget: &PowerBudget,
        target_rate: f64,
    ) -> Result<Self> {
        if !(target_rate.is_finite() && target_rate > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "target rate must be positive, got {target_rate}"
            )));
        }
        if alpha_s < 0.0 || beta_s <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "source split must have alpha_s >= 0 and beta_s > 0, got ({alpha_s}, {beta_s})"
            )));
        }
        if ((alpha_s + beta_s) - budget.ps).abs() > 1e-9 * budget.ps {
            return Err(CoreError::InvalidParameter(format!(
                "source split {} + {} must spend the budget {}",
                alpha_s, beta_s, budget.ps
            )));
        }
        // 2^R − 1 via expm1 so near-zero targets do not lose precision.
        let threshold = (target_rate * LN_2).exp_m1();
        let pair = stats.lambda_rs + stats.lambda_ds;
        Ok(Self {
            beta1: (threshold / budget.ps).sqrt(),
            eta1: (threshold / beta_s).sqrt(),
            c1: stats.lambda_ds / pair,
            c2: stats.lambda_rs / pair,
            alpha_s,
            ps: budget.ps,
            threshold,
        })
    }

    /// Relay-destination gain needed at direct-link gain g_ds; real and
    /// nonnegative on [0, β1], and below η1 strictly inside the interval.
    pub fn zeta1(&self, g_ds: f64) -> f64 {
        let radicand = (g_ds * g_ds * (self.alpha_s - self.ps) + self.threshold).max(0.0);
        ((-g_ds * self.alpha_s.sqrt() + radicand.sqrt()) / self.ps.sqrt()).max(0.0)
    }
}

/// Outage probability, fixed source split (α_s, β_s), relay at full power.
///
/// The destination term integrates over the direct-link gain with the
/// complementary relay-destination tail folded in:
/// e^{−λ_rs η1²}·∫₀^{β1} 2 λ_ds g e^{−λ_ds g²}(1 − e^{−λ̃_dr ζ1(g)²}) dg.
/// The integrand is nonnegative, so adaptive bisection meets the absolute
/// tolerance of 1e-10 without cancellation.
pub fn outage_closed_form(
    stats: &FadingStats,
    alpha_s: f64,
    beta_s: f64,
    budget: &PowerBudget,
    target_rate: f64,
) -> Result<OutageBreakdown> {
    let k = OutageConstants::new(stats, alpha_s, beta_s, budget, target_rate)?;
    let l_rs = stats.lambda_rs;
    let l_ds = stats.lambda_ds;
    let l_dr = stats.lambda_dr_tilde;
    let b1_sq = k.beta1 * k.beta1;
    let e1_sq = k.eta1 * k.eta1;

    let p_dt = -(-l_ds * b1_sq).exp_m1() - k.c1 * (-(-(l_rs + l_ds) * b1_sq).exp_m1());
    let p_relay = -(-l_rs * e1_sq).exp_m1() - k.c2 * (-(-(l_rs + l_ds) * e1_sq).exp_m1());

    let integrand = |g: f64| {
        let z = k.zeta1(g);
        debug_assert!(
            g == 0.0 || z <= k.eta1 * (1.0 + 1e-12),
            "destination threshold {z} above relay threshold {} at g={g}",
            k.eta1
        );
        2.0 * l_ds * g * (-l_ds * g * g).exp() * (-(-l_dr * z * z).exp_m1())
    };
    let quad = adaptive_simpson(integrand, 0.0, k.beta1, 1e-10, 1_000_000)?;
    let p_dest = (-l_rs * e1_sq).exp() * quad.value;

    Ok(OutageBreakdown::from_components(p_dt, p_relay, p_dest))
}

/// Per-realization outage event under a given operating regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageEvent {
    /// No outage: the scheme in force meets the target.
    None,
    /// Direct transmission below target (relay not in use).
    Direct,
    /// Relay failed to decode the source message.
    Relay,
    /// Relay decoded but the destination cannot.
    Destination,
}

impl OutageEvent {
    pub fn is_outage(&self) -> bool {
        !matches!(self, OutageEvent::None)
    }
}

/// Attribute one realization's outage to its failure event, given the
/// regime the scheme operates in and its rate constraints. With the
/// closed form's full-relay-power split a destination failure cannot
/// occur in R1 (J1 ≤ J2 there), so the event partition coincides with the
/// analytical decomposition; power-starved allocations (partial relay
/// power chosen from statistics) can fail at the destination in R1 too,
/// and the event is attributed the same way.
pub fn outage_event(regime: Regime, j_o: f64, j1: f64, j2: f64, target_rate: f64) -> OutageEvent {
    match regime {
        Regime::R0 => {
            if j_o < target_rate {
                OutageEvent::Direct
            } else {
                OutageEvent::None
            }
        }
        Regime::R1 | Regime::R2 => {
            if j1 < target_rate {
                OutageEvent::Relay
            } else if j2 < target_rate {
                OutageEvent::Destination
            } else {
                OutageEvent::None
            }
        }
    }
}

/// Event classification for one fading realization under the
/// instantaneous regime and a caller-supplied allocation; the Monte Carlo
/// counterpart of [`outage_closed_form`].
pub fn outage_formulated_mc_events(
    gains: &LinkGains,
    budget: &PowerBudget,
    alloc: &PowerAllocation,
    target_rate: f64,
) -> OutageEvent {
    let regime = classify_regime(gains, budget);
    let pair = rate_constraints(gains, alloc);
    outage_event(
        regime,
        direct_rate(gains, budget),
        pair.j1,
        pair.j2,
        target_rate,
    )
}

/// Stable evaluation of the destination bracket
/// B(a) = (1 − √(a/(1−a))·asin(√(1−a)))/(1−a); B(0) = 1, B(a→1) = 1/3.
fn dest_bracket(a: f64) -> f64 {
    let eps = 1.0 - a;
    if eps < 1e-3 {
        // 0/0 at a = 1; series in 1−a.
        1.0 / 3.0 + 2.0 * eps / 15.0 + 8.0 * eps * eps / 105.0
    } else {
        (1.0 - (a / eps).sqrt() * eps.sqrt().asin()) / eps
    }
}

/// High-SNR outage: every component decays as P⁻², i.e. diversity order 2.
///
/// With the split α_s = a·P, β_s = b·P and equal budgets Ps = Pr = P:
/// P_dt → λ_ds·λ_rs·t²/(2P²), P_relay → λ_ds·λ_rs·t²/(2b²P²), and
/// P_dest → λ_ds·λ_dr·t²/(2P²)·B(a), t = 2^R − 1. B is the a → f64 limit
/// of the destination integral (1 at a = 0, 1/3 at a = 1). The b → 0 edge
/// diverges and is rejected rather than patched.
pub fn outage_asymptotic(
    stats: &FadingStats,
    a: f64,
    b: f64,
    power: f64,
    target_rate: f64,
) -> Result<OutageBreakdown> {
    if !(0.0..=1.0).contains(&a) {
        return Err(CoreError::InvalidParameter(format!(
            "coherent fraction a must lie in [0, 1], got {a}"
        )));
    }
    if b <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "independent fraction b must be positive, got {b}"
        )));
    }
    if (a + b - 1.0).abs() > 1e-9 {
        return Err(CoreError::InvalidParameter(format!(
            "fractions must satisfy a + b = 1, got {a} + {b}"
        )));
    }
    if !(power.is_finite() && power > 0.0) || !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(CoreError::InvalidParameter(
            "power and target rate must be positive".into(),
        ));
    }
    // Equal budgets are baked into the derivation; the scaled and plain
    // relay-destination rates must agree.
    if (stats.lambda_dr_tilde - stats.lambda_dr).abs() > 1e-9 * stats.lambda_dr {
        return Err(CoreError::InvalidParameter(
            "asymptotic form assumes equal source and relay power".into(),
        ));
    }
    let t = (target_rate * LN_2).exp_m1();
    let scale = t * t / (2.0 * power * power);
    let p_dt = stats.lambda_ds * stats.lambda_rs * scale;
    let p_relay = p_dt / (b * b);
    let p_dest = stats.lambda_ds * stats.lambda_dr * scale * dest_bracket(a);
    Ok(OutageBreakdown::from_components(p_dt, p_relay, p_dest))
}

/// Expected relay power saved by the independent mode under perfect CSI:
/// λ_ds·λ_dr·[Ps·(ln λ_dr − ln((Pr/Ps)λ_rs + λ_dr)) + Pr·λ_rs/λ_dr]
/// / (λ_rs·(λ_rs + λ_ds)), evaluated through ln(1+x) for stability.
pub fn expected_savings_perfect(stats: &FadingStats, budget: &PowerBudget) -> f64 {
    let l_rs = stats.lambda_rs;
    let l_ds = stats.lambda_ds;
    let l_dr = stats.lambda_dr;
    if l_rs.is_infinite() {
        // Dead source-relay link: the relay is never needed.
        return 0.0;
    }
    let ratio = (budget.pr / budget.ps) * l_rs / l_dr;
    let bracket = budget.pr - budget.ps * (l_dr / l_rs) * ratio.ln_1p();
    let saved = l_ds / (l_rs + l_ds) * bracket;
    debug_assert!(
        (-1e-12..=budget.pr * (1.0 + 1e-12)).contains(&saved),
        "savings {saved} outside [0, Pr]"
    );
    saved.max(0.0)
}

/// Expected relay power saved under practical CSI. Nonzero only when the
/// averaged regime is R1 (γ̄_o < γ̄_s ≤ γ̄_d), where the mean of the
/// unclamped β_r gives Pr − Ps·λ_dr·(λ_ds − λ_rs)/(λ_rs·λ_ds).
pub fn expected_savings_practical(stats: &FadingStats, budget: &PowerBudget) -> f64 {
    let avg_s = budget.ps / stats.lambda_rs;
    let avg_o = budget.ps / stats.lambda_ds;
    let avg_d = avg_o + budget.pr / stats.lambda_dr;
    if !(avg_o < avg_s && avg_s <= avg_d) {
        return 0.0;
    }
    let saved = budget.pr
        - budget.ps * stats.lambda_dr * (stats.lambda_ds - stats.lambda_rs)
            / (stats.lambda_rs * stats.lambda_ds);
    debug_assert!(
        (-1e-12..=budget.pr * (1.0 + 1e-12)).contains(&saved),
        "savings {saved} outside [0, Pr]"
    );
    saved.max(0.0)
}

/// Independent numerical oracle for [`expected_savings_perfect`]: the
/// savings Pr − (g_rs² − g_ds²)·Ps/g_dr² integrated over the R1 slab
/// y < z ≤ y + (Pr/Ps)·x of the joint exponential density in
/// (z, y, x) = (g_rs², g_ds², g_dr²), by nested adaptive bisection over
/// rectangles truncated where the density falls below e⁻⁶⁰.
pub fn expected_savings_perfect_quadrature(
    stats: &FadingStats,
    budget: &PowerBudget,
    abs_tol: f64,
) -> Result<f64> {
    if !(abs_tol.is_finite() && abs_tol > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "tolerance must be positive, got {abs_tol}"
        )));
    }
    let l_rs = stats.lambda_rs;
    let l_ds = stats.lambda_ds;
    let l_dr = stats.lambda_dr;
    let (ps, pr) = (budget.ps, budget.pr);
    let x_max = 60.0 / l_dr;
    let y_max = 60.0 / l_ds;
    // Inner errors enter the next level weighted by a unit-mass density,
    // so absolute tolerances simply add across levels. The innermost one
    // is kept far below the middle one so quadrature jitter cannot stall
    // the middle level's refinement.
    let (tol_x, tol_y, tol_z) = (abs_tol / 2.0, abs_tol / 4.0, abs_tol * 1e-4);

    let mut failure: Option<CoreError> = None;
    let mut outer = |x: f64| -> f64 {
        if x <= 0.0 || failure.is_some() {
            return 0.0;
        }
        let mut mid_failure: Option<CoreError> = None;
        let mut mid = |y: f64| -> f64 {
            if mid_failure.is_some() {
                return 0.0;
            }
            let z_hi = y + pr / ps * x;
            let inner = |z: f64| l_rs * (-l_rs * z).exp() * (pr - (z - y) * ps / x);
            match adaptive_simpson(inner, y, z_hi, tol_z, 200_000) {
                Ok(q) => l_ds * (-l_ds * y).exp() * q.value,
                Err(e) => {
                    mid_failure = Some(e);
                    0.0
                }
            }
        };
        let result = adaptive_simpson(&mut mid, 0.0, y_max, tol_y, 500_000);
        match (result, mid_failure) {
            (Ok(q), None) => l_dr * (-l_dr * x).exp() * q.value,
            (_, Some(e)) | (Err(e), None) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let q = adaptive_simpson(&mut outer, 0.0, x_max, tol_x, 1_000_000)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.value)
}
