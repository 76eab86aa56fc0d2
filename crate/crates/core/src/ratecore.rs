//! Rate constraints, link-state regimes, and the regime-dependent optimal
//! power allocation, plus a brute-force oracle maximizing the same
//! objective by grid search and local refinement.
//!
//! The transmission scheme superimposes a coherent (block Markov) component
//! and an independent component. Decoding imposes two constraints:
//!
//! - J1 = log2(1 + g_rs²·β_s)  (relay decodes)
//! - J2 = log2(1 + g_ds²·(α_s+β_s) + g_dr²·(α_s·k_s + β_r) +
//!   2·g_ds·g_dr·√(k_s)·α_s)  (destination decodes)
//!
//! The achievable rate is min(J1, J2), maximized per link-state regime:
//!
//! - R0 (g_rs² ≤ g_ds²): direct transmission, the relay cannot help;
//! - R1 (g_ds² < g_rs² ≤ g_ds² + (Pr/Ps)·g_dr²): independent coding with
//!   partial relay power β_r = Ps·(g_rs²−g_ds²)/g_dr²;
//! - R2 (otherwise): block Markov coding with the source splitting ξ of its
//!   power onto the coherent part, ξ the root of J1 = J2.

use crate::channel::{LinkGains, PowerBudget};
use crate::error::{CoreError, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Below this coherent source power the allocation degenerates to
/// independent coding (k_s = Pr/α_s would overflow).
const MIN_ALPHA: f64 = 1e-12;

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Transmit power split: α_s and β_s are source powers on the coherent and
/// independent signals; k_s scales the relay's coherent replica; β_r is
/// relay power on its independent signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    pub alpha_s: f64,
    pub beta_s: f64,
    pub k_s: f64,
    pub beta_r: f64,
}

impl PowerAllocation {
    /// Direct transmission: all source power on the fresh message, relay idle.
    pub fn direct(budget: &PowerBudget) -> Self {
        Self {
            alpha_s: 0.0,
            beta_s: budget.ps,
            k_s: 0.0,
            beta_r: 0.0,
        }
    }

    /// Source power used.
    pub fn source_power(&self) -> f64 {
        self.alpha_s + self.beta_s
    }

    /// Relay power used.
    pub fn relay_power(&self) -> f64 {
        self.k_s * self.alpha_s + self.beta_r
    }

    /// Feasibility against a budget, with a relative slack for roundoff.
    pub fn check_feasible(&self, budget: &PowerBudget) -> Result<()> {
        let fields = [
            ("alpha_s", self.alpha_s),
            ("beta_s", self.beta_s),
            ("k_s", self.k_s),
            ("beta_r", self.beta_r),
        ];
        for (name, v) in fields {
            if v.is_nan() || v < 0.0 {
                return Err(CoreError::InfeasibleAllocation(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        let slack = 1e-9;
        if self.source_power() > budget.ps * (1.0 + slack) {
            return Err(CoreError::InfeasibleAllocation(format!(
                "source power {} exceeds budget {}",
                self.source_power(),
                budget.ps
            )));
        }
        if self.relay_power() > budget.pr * (1.0 + slack) {
            return Err(CoreError::InfeasibleAllocation(format!(
                "relay power {} exceeds budget {}",
                self.relay_power(),
                budget.pr
            )));
        }
        Ok(())
    }
}

/// Link-state regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Direct transmission is optimal.
    R0,
    /// Independent coding is optimal; relay may save power.
    R1,
    /// Block Markov coding is optimal; relay uses full power.
    R2,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::R0 => "R0",
            Regime::R1 => "R1",
            Regime::R2 => "R2",
        })
    }
}

/// The two decoding constraints in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub j1: f64,
    pub j2: f64,
}

impl RatePair {
    pub fn min(&self) -> f64 {
        self.j1.min(self.j2)
    }
}

/// Evaluate J1 and J2 for an arbitrary allocation.
pub fn rate_constraints(gains: &LinkGains, alloc: &PowerAllocation) -> RatePair {
    let j1 = log2_1p(gains.g_rs_sq() * alloc.beta_s);
    let coherent = 2.0 * gains.g_ds * gains.g_dr * alloc.k_s.sqrt() * alloc.alpha_s;
    let j2 = log2_1p(
        gains.g_ds_sq() * (alloc.alpha_s + alloc.beta_s)
            + gains.g_dr_sq() * (alloc.alpha_s * alloc.k_s + alloc.beta_r)
            + coherent,
    );
    RatePair { j1, j2 }
}

/// J_o = log2(1 + g_ds²·Ps), the rate without the relay.
pub fn direct_rate(gains: &LinkGains, budget: &PowerBudget) -> f64 {
    log2_1p(gains.g_ds_sq() * budget.ps)
}

/// Regime thresholds. Boundaries follow the closed/open pattern of the
/// defining intervals: g_rs² = g_ds² is R0, g_rs² = g_ds² + (Pr/Ps)·g_dr²
/// is R1. Tie-breaking is documented because float equality at the
/// boundaries, while measure-zero, must be deterministic.
pub fn classify_regime(gains: &LinkGains, budget: &PowerBudget) -> Regime {
    let g_rs2 = gains.g_rs_sq();
    let g_ds2 = gains.g_ds_sq();
    if g_rs2 <= g_ds2 {
        Regime::R0
    } else if g_rs2 <= g_ds2 + (budget.pr / budget.ps) * gains.g_dr_sq() {
        Regime::R1
    } else {
        Regime::R2
    }
}

/// Closed-form optimal allocation and its rate.
///
/// The source always transmits at full power (α_s + β_s = Ps). In R1 the
/// relay spends only β_r = Ps·(g_rs²−g_ds²)/g_dr², which the regime bounds
/// keep inside [0, Pr]. In R2 the optimum is the crossing J1 = J2; writing
/// p = g_ds·g_dr·√Pr and s = g_rs²·(Ps·g_rs² − Ps·g_ds² − Pr·g_dr²) > 0,
/// the crossing is ξ = [s / (g_rs²·(p + √(p² + s)))]², the conjugate form
/// of the quadratic root, immune to cancellation when g_rs² dominates. Two
/// Newton steps on f(ξ) = g_rs²(Ps−ξ) − g_ds²Ps − g_dr²Pr − 2p√ξ polish
/// the root to machine precision.
pub fn optimal_allocation(
    gains: &LinkGains,
    budget: &PowerBudget,
) -> Result<(Regime, PowerAllocation, f64)> {
    let regime = classify_regime(gains, budget);
    let (ps, pr) = (budget.ps, budget.pr);
    let g_rs2 = gains.g_rs_sq();
    let g_ds2 = gains.g_ds_sq();
    let g_dr2 = gains.g_dr_sq();

    match regime {
        Regime::R0 => {
            let alloc = PowerAllocation::direct(budget);
            Ok((regime, alloc, direct_rate(gains, budget)))
        }
        Regime::R1 => {
            // g_dr = 0 would make the R1 interval empty; classify_regime
            // cannot emit R1 then.
            debug_assert!(g_dr2 > 0.0, "R1 with a dead relay-destination link");
            let beta_r = (ps * (g_rs2 - g_ds2) / g_dr2).min(pr);
            let alloc = PowerAllocation {
                alpha_s: 0.0,
                beta_s: ps,
                k_s: 0.0,
                beta_r,
            };
            Ok((regime, alloc, log2_1p(g_rs2 * ps)))
        }
        Regime::R2 => {
            let p = gains.g_ds * gains.g_dr * pr.sqrt();
            let s = g_rs2 * (ps * g_rs2 - ps * g_ds2 - pr * g_dr2);
            let disc = p * p + s;
            if disc < 0.0 {
                // Provably nonnegative in R2 (s > 0 by the regime
                // condition); reaching this means the classifier and the
                // root disagree beyond roundoff.
                return Err(CoreError::InternalContradiction(format!(
                    "negative discriminant {disc} in block-Markov allocation"
                )));
            }
            let mut xi = if s <= 0.0 {
                // Roundoff put the channel on the R1/R2 boundary: the
                // crossing sits at α_s = 0.
                0.0
            } else {
                let num = s / (p + disc.sqrt());
                (num / g_rs2).powi(2)
            };
            // Newton polish; f is strictly decreasing in ξ on (0, Ps).
            for _ in 0..2 {
                if xi <= 0.0 {
                    break;
                }
                let f = g_rs2 * (ps - xi) - g_ds2 * ps - g_dr2 * pr - 2.0 * p * xi.sqrt();
                let df = -g_rs2 - p / xi.sqrt();
                let next = xi - f / df;
                if next > 0.0 && next < ps {
                    xi = next;
                }
            }
            if xi < MIN_ALPHA {
                // Boundary degeneracy: report independent coding at full
                // relay power instead of k_s = Pr/ξ → ∞.
                let alloc = PowerAllocation {
                    alpha_s: 0.0,
                    beta_s: ps,
                    k_s: 0.0,
                    beta_r: pr,
                };
                let rate = rate_constraints(gains, &alloc).min();
                return Ok((regime, alloc, rate));
            }
            let xi = xi.min(ps * (1.0 - 1e-15));
            let alloc = PowerAllocation {
                alpha_s: xi,
                beta_s: ps - xi,
                k_s: pr / xi,
                beta_r: 0.0,
            };
            let rate = rate_constraints(gains, &alloc).min();
            Ok((regime, alloc, rate))
        }
    }
}

/// Grid resolution for the brute-force maximizer.
#[derive(Debug, Clone, Copy)]
pub struct OracleGrid {
    /// Grid steps over α_s ∈ [0, Ps].
    pub alpha_steps: usize,
    /// Grid steps over β_r ∈ [0, Pr].
    pub beta_r_steps: usize,
    /// Follow the grid with local refinement of the J1 = J2 crossing.
    pub refine: bool,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            alpha_steps: 64,
            beta_r_steps: 64,
            refine: true,
        }
    }
}

/// Brute-force maximizer of min(J1, J2) over feasible allocations.
///
/// Searches α_s ∈ [0, Ps] and β_r ∈ [0, Pr] with k_s·α_s = Pr − β_r (the
/// relay never benefits from leaving power unused against this objective;
/// leftover power could only be burned, not help) and β_s = Ps − α_s, plus
/// the direct-transmission candidate. With `refine`, the grid winner is
/// sharpened: for α_s = 0 a bisection drives J2 to the J1 plateau over
/// β_r; for α_s > 0 a golden-section search on α_s locates the J1 = J2
/// crossing (J1 decreases and J2 increases in α_s) to interval width 1e-10.
pub fn oracle_allocation(
    gains: &LinkGains,
    budget: &PowerBudget,
    grid: &OracleGrid,
) -> Result<(PowerAllocation, f64)> {
    if grid.alpha_steps == 0 || grid.beta_r_steps == 0 {
        return Err(CoreError::InvalidParameter(
            "oracle grid must have at least one step per axis".into(),
        ));
    }
    let (ps, pr) = (budget.ps, budget.pr);
    let eval = |alpha_s: f64, beta_r: f64| -> (PowerAllocation, f64) {
        let k_s = if alpha_s > MIN_ALPHA {
            (pr - beta_r) / alpha_s
        } else {
            0.0
        };
        let alloc = PowerAllocation {
            alpha_s: if alpha_s > MIN_ALPHA { alpha_s } else { 0.0 },
            beta_s: ps - alpha_s,
            k_s,
            beta_r,
        };
        let rate = rate_constraints(gains, &alloc).min();
        (alloc, rate)
    };

    let mut best = (PowerAllocation::direct(budget), direct_rate(gains, budget));
    for i in 0..=grid.alpha_steps {
        let alpha = ps * i as f64 / grid.alpha_steps as f64;
        for j in 0..=grid.beta_r_steps {
            let beta_r = pr * j as f64 / grid.beta_r_steps as f64;
            let cand = eval(alpha, beta_r);
            if cand.1 > best.1 {
                best = cand;
            }
        }
    }

    if grid.refine {
        // Independent-coding route: α_s = 0, J1 fixed, J2 increasing in β_r.
        let j1 = log2_1p(gains.g_rs_sq() * ps);
        let h = |beta_r: f64| rate_constraints(gains, &eval(0.0, beta_r).0).j2 - j1;
        let cand = if h(pr) <= 0.0 {
            eval(0.0, pr)
        } else if h(0.0) >= 0.0 {
            eval(0.0, 0.0)
        } else {
            let (mut lo, mut hi) = (0.0f64, pr);
            while hi - lo > 1e-12 * pr.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if h(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            eval(0.0, 0.5 * (lo + hi))
        };
        if cand.1 > best.1 {
            best = cand;
        }

        // Coherent route: β_r = 0, k_s = Pr/α_s; min(J1, J2) is unimodal
        // in α_s, maximized at the crossing.
        let phi = |alpha: f64| eval(alpha, 0.0).1;
        let inv_gr = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0f64, ps);
        let mut c = b - inv_gr * (b - a);
        let mut d = a + inv_gr * (b - a);
        let (mut fc, mut fd) = (phi(c), phi(d));
        while b - a > 1e-10 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_gr * (b - a);
                fc = phi(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_gr * (b - a);
                fd = phi(d);
            }
        }
        let cand = eval(0.5 * (a + b), 0.0);
        if cand.1 > best.1 {
            best = cand;
        }
    }

    Ok(best)
}

/// Rate achieved by a given allocation: min(J1, J2) when the relay takes
/// part, the direct rate otherwise.
pub fn achieved_rate(
    gains: &LinkGains,
    alloc: &PowerAllocation,
    budget: &PowerBudget,
    relay_used: bool,
) -> Result<f64> {
    alloc.check_feasible(budget)?;
    if relay_used {
        Ok(rate_constraints(gains, alloc).min())
    } else {
        Ok(direct_rate(gains, budget))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(g_rs: f64, g_ds: f64, g_dr: f64) -> LinkGains {
        LinkGains::new(g_rs, g_ds, g_dr).unwrap()
    }

    fn budget(ps: f64, pr: f64) -> PowerBudget {
        PowerBudget::new(ps, pr).unwrap()
    }

    #[test]
    fn zero_allocation_zero_rates() {
        let r = rate_constraints(
            &gains(2.0, 1.0, 2.0),
            &PowerAllocation {
                alpha_s: 0.0,
                beta_s: 0.0,
                k_s: 0.0,
                beta_r: 0.0,
            },
        );
        assert_eq!((r.j1, r.j2), (0.0, 0.0));
    }

    #[test]
    fn independent_coding_rate_pair() {
        let r = rate_constraints(
            &gains(2.0, 1.0, 2.0),
            &PowerAllocation {
                alpha_s: 0.0,
                beta_s: 1.0,
                k_s: 0.0,
                beta_r: 0.75,
            },
        );
        assert!((r.j1 - 5f64.log2()).abs() < 1e-12);
        assert!((r.j2 - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn direct_rate_examples() {
        assert_eq!(direct_rate(&gains(1.0, 0.0, 1.0), &budget(1.0, 1.0)), 0.0);
        assert!((direct_rate(&gains(1.0, 1.0, 1.0), &budget(1.0, 1.0)) - 1.0).abs() < 1e-12);
        assert!((direct_rate(&gains(1.0, 0.5, 1.0), &budget(12.0, 1.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regime_thresholds_and_boundaries() {
        let b = budget(1.0, 1.0);
        assert_eq!(classify_regime(&gains(1.0, 2f64.sqrt(), 1.0), &b), Regime::R0);
        assert_eq!(classify_regime(&gains(4.0, 3.0, 4.0), &b), Regime::R1);
        assert_eq!(classify_regime(&gains(6.0, 3.0, 4.0), &b), Regime::R2);
        // Closed endpoints, built from exact squares (3,4,5).
        assert_eq!(classify_regime(&gains(1.0, 1.0, 1.0), &b), Regime::R0);
        assert_eq!(classify_regime(&gains(5.0, 3.0, 4.0), &b), Regime::R1);
    }

    #[test]
    fn midpoint_relay_is_independent_coding() {
        for gamma in [2.0, 3.6, 5.0] {
            let d: f64 = 10.0;
            let g_rs = d.powf(-gamma / 2.0);
            let g_ds = (2.0 * d).powf(-gamma / 2.0);
            let g_dr = d.powf(-gamma / 2.0);
            let reg = classify_regime(&gains(g_rs, g_ds, g_dr), &budget(3.0, 3.0));
            assert_eq!(reg, Regime::R1);
        }
    }

    #[test]
    fn upper_regime_boundary_uses_full_relay_power() {
        let b = budget(2.0, 2.0);
        let (reg, alloc, _) = optimal_allocation(&gains(5.0, 3.0, 4.0), &b).unwrap();
        assert_eq!(reg, Regime::R1);
        assert!((alloc.beta_r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn independent_coding_allocation() {
        let b = budget(1.0, 1.0);
        let (reg, alloc, rate) = optimal_allocation(&gains(2.0, 1.0, 2.0), &b).unwrap();
        assert_eq!(reg, Regime::R1);
        assert!((alloc.beta_r - 0.75).abs() < 1e-12);
        assert!((rate - 5f64.log2()).abs() < 1e-12);
        let pair = rate_constraints(&gains(2.0, 1.0, 2.0), &alloc);
        assert!((pair.j1 - pair.j2).abs() < 1e-12);
    }

    #[test]
    fn block_markov_allocation() {
        let b = budget(1.0, 1.0);
        let g = gains(2.0, 0.5, 1.0);
        let (reg, alloc, rate) = optimal_allocation(&g, &b).unwrap();
        assert_eq!(reg, Regime::R2);
        let xi_exact = ((-0.5 + 11.25f64.sqrt()) / 4.0).powi(2);
        assert!((alloc.alpha_s - xi_exact).abs() < 1e-10, "{}", alloc.alpha_s);
        assert!((alloc.alpha_s - 0.50912).abs() < 1e-5);
        assert!((alloc.k_s - 1.9642).abs() < 1e-4);
        assert!((rate - 1.5673).abs() < 1e-4);
        let pair = rate_constraints(&g, &alloc);
        assert!((pair.j1 - pair.j2).abs() < 1e-12);
    }

    #[test]
    fn full_source_power_in_every_regime() {
        let b = budget(1.7, 0.9);
        for g in [
            gains(0.3, 1.0, 1.0),
            gains(1.2, 1.0, 2.0),
            gains(4.0, 0.5, 0.7),
        ] {
            let (_, alloc, _) = optimal_allocation(&g, &b).unwrap();
            assert_eq!(alloc.source_power(), b.ps);
            alloc.check_feasible(&b).unwrap();
        }
    }

    #[test]
    fn rate_continuous_across_regime_boundaries() {
        let b = budget(1.3, 0.8);
        let g_ds = 0.9;
        let g_dr = 1.1;
        // R0/R1 boundary at g_rs² = g_ds², R1/R2 at g_ds² + (Pr/Ps)·g_dr².
        for boundary in [
            g_ds * g_ds,
            g_ds * g_ds + b.pr / b.ps * g_dr * g_dr,
        ] {
            let lo = gains((boundary * (1.0 - 1e-6)).sqrt(), g_ds, g_dr);
            let hi = gains((boundary * (1.0 + 1e-6)).sqrt(), g_ds, g_dr);
            let r_lo = optimal_allocation(&lo, &b).unwrap().2;
            let r_hi = optimal_allocation(&hi, &b).unwrap().2;
            assert!((r_hi - r_lo).abs() < 1e-4, "jump {} at {boundary}", r_hi - r_lo);
        }
    }

    #[test]
    fn rate_monotone_in_each_gain() {
        let b = budget(1.0, 1.0);
        let base = gains(1.4, 0.6, 0.9);
        let r0 = optimal_allocation(&base, &b).unwrap().2;
        for bumped in [
            gains(1.5, 0.6, 0.9),
            gains(1.4, 0.7, 0.9),
            gains(1.4, 0.6, 1.0),
        ] {
            let r1 = optimal_allocation(&bumped, &b).unwrap().2;
            assert!(r1 >= r0 - 1e-12);
        }
    }

    #[test]
    fn oracle_matches_direct_when_relay_useless() {
        let b = budget(1.0, 1.0);
        let g = gains(0.5, 1.0, 1.0);
        let (_, rate) = oracle_allocation(&g, &b, &OracleGrid::default()).unwrap();
        assert!((rate - direct_rate(&g, &b)).abs() < 1e-9);
    }

    #[test]
    fn oracle_refines_to_independent_coding_optimum() {
        let b = budget(1.0, 1.0);
        let (_, rate) =
            oracle_allocation(&gains(2.0, 1.0, 2.0), &b, &OracleGrid::default()).unwrap();
        assert!((rate - 5f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn oracle_never_beats_closed_form() {
        // Dense behavioral check lives in the integration suite; this is a
        // smoke test over a few channels of each regime.
        let b = budget(1.0, 2.0);
        for g in [
            gains(0.4, 1.0, 0.5),
            gains(1.3, 1.0, 1.5),
            gains(3.0, 0.4, 0.6),
        ] {
            let closed = optimal_allocation(&g, &b).unwrap().2;
            let (_, grid_best) = oracle_allocation(&g, &b, &OracleGrid::default()).unwrap();
            assert!(closed >= grid_best - 1e-6, "closed {closed} vs oracle {grid_best}");
        }
    }

    #[test]
    fn achieved_rate_respects_relay_flag() {
        let b = budget(1.0, 1.0);
        let g = gains(2.0, 1.0, 2.0);
        let (_, alloc, rate) = optimal_allocation(&g, &b).unwrap();
        assert_eq!(achieved_rate(&g, &alloc, &b, true).unwrap(), rate);
        assert_eq!(
            achieved_rate(&g, &alloc, &b, false).unwrap(),
            direct_rate(&g, &b)
        );
    }

    #[test]
    fn achieved_rate_rejects_infeasible() {
        let b = budget(1.0, 1.0);
        let g = gains(2.0, 1.0, 2.0);
        let alloc = PowerAllocation {
            alpha_s: 0.8,
            beta_s: 0.4,
            k_s: 0.0,
            beta_r: 0.0,
        };
        assert!(matches!(
            achieved_rate(&g, &alloc, &b, true),
            Err(CoreError::InfeasibleAllocation(_))
        ));
    }

    #[test]
    fn halved_relay_power_is_suboptimal_in_r1() {
        let b = budget(1.0, 1.0);
        let g = gains(2.0, 1.0, 2.0);
        let (_, alloc, rate) = optimal_allocation(&g, &b).unwrap();
        let crippled = PowerAllocation {
            beta_r: alloc.beta_r / 2.0,
            ..alloc
        };
        let r = achieved_rate(&g, &crippled, &b, true).unwrap();
        assert!(r < rate - 1e-6);
    }
}
