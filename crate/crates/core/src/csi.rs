//! Channel-knowledge models and the allocations they induce.
//!
//! Three levels of channel knowledge are modeled. Perfect: every node
//! tracks every instantaneous gain, so regime and allocation adapt per
//! fade. LongTerm: nodes know only average SNRs; regime and allocation are
//! fixed by the statistics. Practical: receive CSI is instantaneous but
//! transmit/non-local CSI is long-term; the regime still comes from the
//! averages (source and relay must agree on it), and the only instantaneous
//! quantity used is the relay's receive SNR γ_s inside β_r.
//!
//! In SNR form the regimes read R0: γ_s ≤ γ_o, R1: γ_o < γ_s ≤ γ_d,
//! R2: γ_s > γ_d, with γ_s = g_rs²Ps, γ_o = g_ds²Ps, γ_d = γ_o + g_dr²Pr.
//! Averaged variants substitute the fading means.
//!
//! Also hosts the geometric relay-use rule: in the canonical frame with the
//! source at (0,0) and destination at (20,0), the relay participates when
//! it is closer to the destination than to the source or inside a fitted
//! ellipse with foci (2,±8). Ellipse axes come from a lookup table fitted
//! offline against simulated rate-gain maps.

use std::sync::OnceLock;

use crate::channel::{FadingStats, Geometry, LinkGains, PowerBudget};
use crate::error::{CoreError, Result};
use crate::ratecore::{optimal_allocation, PowerAllocation, Regime};

/// How much channel knowledge the nodes have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiModel {
    Perfect,
    Practical,
    LongTerm,
}

impl std::fmt::Display for CsiModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CsiModel::Perfect => "perfect",
            CsiModel::Practical => "practical",
            CsiModel::LongTerm => "long_term",
        })
    }
}

/// Mean received SNRs under the exponential gain model.
///
/// Invariant: avg_gamma_d ≥ avg_gamma_o > 0 whenever the direct link is
/// live (finite λ_ds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageSnrs {
    pub avg_gamma_s: f64,
    pub avg_gamma_o: f64,
    pub avg_gamma_d: f64,
}

/// Component means of the received SNRs: Ps/λ_rs, Ps/λ_ds, Ps/λ_ds + Pr/λ_dr.
pub fn average_snrs(stats: &FadingStats, budget: &PowerBudget) -> AverageSnrs {
    let avg_gamma_o = budget.ps / stats.lambda_ds;
    AverageSnrs {
        avg_gamma_s: budget.ps / stats.lambda_rs,
        avg_gamma_o,
        avg_gamma_d: avg_gamma_o + budget.pr / stats.lambda_dr,
    }
}

/// Regime thresholds in SNR form; same closed/open endpoints as the
/// gain-form classifier.
pub fn classify_regime_snr(gamma_s: f64, gamma_o: f64, gamma_d: f64) -> Regime {
    if gamma_s <= gamma_o {
        Regime::R0
    } else if gamma_s <= gamma_d {
        Regime::R1
    } else {
        Regime::R2
    }
}

/// Regime induced by the channel statistics alone.
pub fn average_regime(avg: &AverageSnrs) -> Regime {
    classify_regime_snr(avg.avg_gamma_s, avg.avg_gamma_o, avg.avg_gamma_d)
}

/// Relay power under practical CSI in R1, before clamping:
/// β_r = (γ_s − γ̄_o)/(γ̄_d − γ̄_o)·Pr with instantaneous γ_s. Negative
/// values (fade below the average direct SNR) and values above Pr are
/// meaningful to the power-savings accounting, so no clamp here.
pub fn practical_beta_r_unclamped(
    gains: &LinkGains,
    avg: &AverageSnrs,
    budget: &PowerBudget,
) -> f64 {
    let gamma_s = gains.g_rs_sq() * budget.ps;
    (gamma_s - avg.avg_gamma_o) / (avg.avg_gamma_d - avg.avg_gamma_o) * budget.pr
}

/// α_s at the J1 = J2 crossing in SNR form, via the conjugate of the
/// printed root (no cancellation for γ_s ≫ γ_d). Zero when the SNR triple
/// sits at or below the R1/R2 boundary.
fn snr_form_alpha(gamma_s: f64, gamma_o: f64, gamma_d: f64, ps: f64) -> f64 {
    let b = gamma_s * (gamma_s - gamma_d);
    if b <= 0.0 {
        return 0.0;
    }
    let a = (gamma_o * (gamma_d - gamma_o)).max(0.0);
    let num = b / ((a + b).sqrt() + a.sqrt());
    (num / gamma_s).powi(2) * ps
}

/// Allocation per average regime with a given β_r candidate for R1.
fn allocation_from_averages(
    avg: &AverageSnrs,
    budget: &PowerBudget,
    beta_r_r1: f64,
) -> (Regime, PowerAllocation) {
    let regime = average_regime(avg);
    let alloc = match regime {
        Regime::R0 => PowerAllocation::direct(budget),
        Regime::R1 => PowerAllocation {
            alpha_s: 0.0,
            beta_s: budget.ps,
            k_s: 0.0,
            beta_r: beta_r_r1.clamp(0.0, budget.pr),
        },
        Regime::R2 => {
            let alpha_s =
                snr_form_alpha(avg.avg_gamma_s, avg.avg_gamma_o, avg.avg_gamma_d, budget.ps);
            if alpha_s < 1e-12 {
                PowerAllocation {
                    alpha_s: 0.0,
                    beta_s: budget.ps,
                    k_s: 0.0,
                    beta_r: budget.pr,
                }
            } else {
                PowerAllocation {
                    alpha_s,
                    beta_s: budget.ps - alpha_s,
                    k_s: budget.pr / alpha_s,
                    beta_r: 0.0,
                }
            }
        }
    };
    (regime, alloc)
}

/// Regime choice and power allocation under a CSI model.
///
/// Perfect adapts both to the realization. Practical and LongTerm fix the
/// regime from the averages; their allocations coincide except for β_r in
/// the averaged R1, where Practical substitutes the instantaneous γ_s.
/// The averaged-R1 β_r is clamped to [0, Pr] so the result is always a
/// transmittable allocation; see [`practical_beta_r_unclamped`] for the
/// raw value.
pub fn allocation_under_csi(
    model: CsiModel,
    gains: &LinkGains,
    stats: &FadingStats,
    budget: &PowerBudget,
) -> Result<(Regime, PowerAllocation)> {
    match model {
        CsiModel::Perfect => {
            let (regime, alloc, _) = optimal_allocation(gains, budget)?;
            Ok((regime, alloc))
        }
        CsiModel::LongTerm => Ok(long_term_allocation(stats, budget)),
        CsiModel::Practical => {
            let avg = average_snrs(stats, budget);
            let beta_r = practical_beta_r_unclamped(gains, &avg, budget);
            Ok(allocation_from_averages(&avg, budget, beta_r))
        }
    }
}

/// Allocation from fading statistics alone: the same for every fade, so
/// callers that sweep operating points need no gain realization.
pub fn long_term_allocation(stats: &FadingStats, budget: &PowerBudget) -> (Regime, PowerAllocation) {
    let avg = average_snrs(stats, budget);
    let beta_r = (avg.avg_gamma_s - avg.avg_gamma_o) / (avg.avg_gamma_d - avg.avg_gamma_o)
        * budget.pr;
    allocation_from_averages(&avg, budget, beta_r)
}

/// One fitted relay-use ellipse, keyed by the physical source-destination
/// distance and pathloss exponent it was fitted under. Axes are in the
/// canonical frame (source at origin, destination at (d_ds, 0)); the
/// center sits on the x axis and the major axis is vertical, foci at
/// (center_x, ±8).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseSpec {
    pub d_ds: f64,
    pub gamma: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub center_x: f64,
}

impl EllipseSpec {
    /// Membership test in the canonical frame (boundary counts as inside).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let nx = (x - self.center_x) / self.semi_minor;
        let ny = y / self.semi_major;
        nx * nx + ny * ny <= 1.0
    }
}

const ELLIPSE_TABLE_TEXT: &str = include_str!("../data/ellipse_table.txt");

/// Parse the plain-text fit table: whitespace-separated rows of
/// (d_ds, gamma, semi_major, semi_minor, center_x), `#` comments allowed.
pub fn parse_ellipse_table(text: &str) -> Result<Vec<EllipseSpec>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                CoreError::InvalidParameter(format!(
                    "ellipse table line {}: {e}",
                    lineno + 1
                ))
            })?;
        if fields.len() != 5 {
            return Err(CoreError::InvalidParameter(format!(
                "ellipse table line {}: expected 5 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        if fields[2] <= 0.0 || fields[3] <= 0.0 || fields[0] <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "ellipse table line {}: nonpositive dimension",
                lineno + 1
            )));
        }
        rows.push(EllipseSpec {
            d_ds: fields[0],
            gamma: fields[1],
            semi_major: fields[2],
            semi_minor: fields[3],
            center_x: fields[4],
        });
    }
    if rows.is_empty() {
        return Err(CoreError::InvalidParameter(
            "ellipse table has no data rows".into(),
        ));
    }
    Ok(rows)
}

fn builtin_table() -> &'static [EllipseSpec] {
    static TABLE: OnceLock<Vec<EllipseSpec>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_ellipse_table(ELLIPSE_TABLE_TEXT).expect("embedded ellipse table is well-formed")
    })
}

/// Nearest fit in a table by (d_ds, gamma), gamma first. Falls back to the
/// closest exponent available, so a query off the fitted grid still gets a
/// deterministic answer.
pub fn ellipse_for_in(table: &[EllipseSpec], d_ds: f64, gamma: f64) -> EllipseSpec {
    *table
        .iter()
        .min_by(|p, q| {
            let key = |s: &EllipseSpec| ((s.gamma - gamma).abs(), (s.d_ds - d_ds).abs());
            key(p).partial_cmp(&key(q)).expect("finite table keys")
        })
        .expect("table validated non-empty")
}

/// Nearest fit in the built-in table.
pub fn ellipse_for(d_ds: f64, gamma: f64) -> EllipseSpec {
    ellipse_for_in(builtin_table(), d_ds, gamma)
}

/// Geometric relay-use decision: participate when the relay is strictly
/// closer to the destination than to the source, or when it lies inside
/// the fitted ellipse. Arbitrary node placements are handled by the
/// similarity map onto the canonical frame (distance ratios survive the
/// map; the ellipse is fitted at the table row's own scale).
pub fn relay_use_rule(geometry: &Geometry) -> bool {
    relay_use_rule_with(geometry, &ellipse_for(geometry.d_ds(), geometry.gamma_ds))
}

/// Same rule against an explicit fit (used when a freshly fitted ellipse
/// has not been folded into the built-in table).
pub fn relay_use_rule_with(geometry: &Geometry, spec: &EllipseSpec) -> bool {
    if geometry.d_dr() < geometry.d_rs() {
        return true;
    }
    let d_ds = geometry.d_ds();
    let scale = spec.d_ds / d_ds;
    let ux = (geometry.dest[0] - geometry.source[0]) / d_ds;
    let uy = (geometry.dest[1] - geometry.source[1]) / d_ds;
    let rx = geometry.relay[0] - geometry.source[0];
    let ry = geometry.relay[1] - geometry.source[1];
    let x = (rx * ux + ry * uy) * scale;
    let y = (-rx * uy + ry * ux) * scale;
    spec.contains(x, y)
}
