//! Spatial sweeps: regime map (pathloss only), rate-gain map, and
//! relay-power-savings map. One CSV row per grid point, rows in grid
//! order regardless of which worker finished first.

use clap::Args;
use rayon::prelude::*;

use dfrelay_core::channel::{pathloss_stats, snr_to_power, Geometry, LinkGains, PowerBudget};
use dfrelay_core::csi::{
    average_regime, average_snrs, ellipse_for, relay_use_rule_with, CsiModel, EllipseSpec,
};
use dfrelay_core::analysis::{expected_savings_perfect, expected_savings_practical};
use dfrelay_core::montecarlo::{
    derive_seed, estimate_direct_rate, estimate_rate, estimate_savings, fit_relay_use_ellipse,
    McConfig,
};
use dfrelay_core::ratecore::classify_regime;

use crate::args::{parse_choice, CommonArgs, CsiChoice, GridArgs};
use crate::config::{parse_value, Overridable};
use crate::csvout::CsvDoc;
use crate::Failure;

#[derive(Debug, Args)]
pub struct RegimeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,

    /// Relay-to-source power ratio Pr/Ps.
    #[arg(long, default_value_t = 1.0)]
    pub pr_over_ps: f64,
}

impl Overridable for RegimeArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        if key == "pr-over-ps" {
            self.pr_over_ps = parse_value(key, value)?;
            return Ok(true);
        }
        Ok(self.common.set(key, value)? || self.grid.set(key, value)?)
    }
}

/// Operating-regime tag per relay position under pathloss-only gains
/// (no small-scale fading), so the map is deterministic.
pub fn run_regime(args: &RegimeArgs) -> Result<(), Failure> {
    args.grid.validate().map_err(Failure::Validation)?;
    if !(args.pr_over_ps.is_finite() && args.pr_over_ps > 0.0) {
        return Err(Failure::Validation(format!(
            "pr-over-ps must be positive, got {}",
            args.pr_over_ps
        )));
    }
    let budget = PowerBudget::new(1.0, args.pr_over_ps)?;
    let gamma = args.grid.gamma;
    let g_ds = args.grid.d_ds.powf(-gamma / 2.0);

    let mut doc = CsvDoc::new("regime-map");
    args.grid.describe(&mut doc);
    doc.param("pr_over_ps", args.pr_over_ps);
    doc.param("seed", args.common.seed);
    doc.param("fading", "none (pathloss only)");
    doc.columns(&["x_m", "y_m", "regime"]);
    for (x, y) in args.grid.points() {
        // d = 0 gives an infinite gain, which classifies as expected
        // (a colocated relay decodes everything).
        let g_rs = x.hypot(y).powf(-gamma / 2.0);
        let g_dr = (x - args.grid.d_ds).hypot(y).powf(-gamma / 2.0);
        let gains = LinkGains::new(g_rs, g_ds, g_dr)?;
        doc.row([
            x.to_string(),
            y.to_string(),
            classify_regime(&gains, &budget).to_string(),
        ]);
    }
    doc.write_to(&args.common.out).map_err(Failure::Runtime)
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,

    /// Rate source under comparison.
    #[arg(long, value_enum, default_value_t = CsiChoice::Practical)]
    pub model: CsiChoice,

    /// Baseline the gain is measured against.
    #[arg(long, value_enum, default_value_t = CsiChoice::Direct)]
    pub baseline: CsiChoice,

    /// Fading draws per grid point.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,

    /// Disable the geometric relay-use rule for the reduced-CSI models.
    #[arg(long)]
    pub no_gate: bool,

    /// Refit the relay-use ellipse by simulation instead of using the
    /// stored table.
    #[arg(long)]
    pub refit_ellipse: bool,

    /// Fading draws per grid point during the ellipse refit.
    #[arg(long, default_value_t = 2_000)]
    pub refit_trials: u64,
}

impl Overridable for RateArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "model" => self.model = parse_choice(key, value)?,
            "baseline" => self.baseline = parse_choice(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "no-gate" => self.no_gate = parse_value(key, value)?,
            "refit-ellipse" => self.refit_ellipse = parse_value(key, value)?,
            "refit-trials" => self.refit_trials = parse_value(key, value)?,
            _ => return Ok(self.common.set(key, value)? || self.grid.set(key, value)?),
        }
        Ok(true)
    }
}

fn is_gated(choice: CsiChoice) -> bool {
    matches!(choice, CsiChoice::Practical | CsiChoice::LongTerm)
}

/// Mean rate under `choice` at one relay position, honoring the
/// relay-use veto for the reduced-CSI models.
fn rate_for(
    choice: CsiChoice,
    gate: Option<&EllipseSpec>,
    geom: &Geometry,
    budget: &PowerBudget,
    cfg: &McConfig,
) -> Result<dfrelay_core::Estimate, Failure> {
    let stats = pathloss_stats(geom, budget)?;
    let direct_only = match choice.as_model() {
        None => true,
        Some(CsiModel::Perfect) => false,
        Some(_) => match gate {
            Some(spec) => !relay_use_rule_with(geom, spec),
            None => false,
        },
    };
    let est = if direct_only {
        estimate_direct_rate(&stats, budget, cfg)?
    } else {
        estimate_rate(&stats, budget, choice.as_model().expect("checked"), None, cfg)?
    };
    Ok(est)
}

/// Percentage rate gain of one CSI model over a baseline, per relay
/// position, both estimated on the same fading draws.
pub fn run_rate(args: &RateArgs) -> Result<(), Failure> {
    args.grid.validate().map_err(Failure::Validation)?;
    if args.trials == 0 || (args.refit_ellipse && args.refit_trials == 0) {
        return Err(Failure::Validation("trials must be at least 1".into()));
    }
    let power = snr_to_power(args.grid.snr_db, args.grid.d_ds, args.grid.gamma)?;
    let budget = PowerBudget::equal(power)?;

    let needs_gate = !args.no_gate && (is_gated(args.model) || is_gated(args.baseline));
    let mut doc = CsvDoc::new("rate-map");
    args.grid.describe(&mut doc);
    doc.param("model", args.model.label());
    doc.param("baseline", args.baseline.label());
    doc.param("trials_per_point", args.trials);
    doc.param("seed", args.common.seed);
    doc.param("power_per_node", power);
    let gate = if needs_gate {
        let spec = if args.refit_ellipse {
            let fit = fit_relay_use_ellipse(
                args.grid.d_ds,
                args.grid.gamma,
                args.grid.snr_db,
                args.refit_trials,
                derive_seed(args.common.seed, 1),
            )?;
            doc.param("ellipse_source", "refit");
            doc.param("ellipse_refit_trials", args.refit_trials);
            doc.param("ellipse_refit_misclassified", fit.misclassified);
            fit.spec
        } else {
            doc.param("ellipse_source", "table");
            ellipse_for(args.grid.d_ds, args.grid.gamma)
        };
        doc.param("ellipse_semi_major_m", spec.semi_major);
        doc.param("ellipse_semi_minor_m", spec.semi_minor);
        doc.param("ellipse_center_x_m", spec.center_x);
        Some(spec)
    } else {
        doc.param("ellipse_source", "unused");
        None
    };
    doc.param("omitted", "grid points coinciding with source or destination");
    doc.columns(&[
        "x_m",
        "y_m",
        "model_rate",
        "model_stderr",
        "baseline_rate",
        "baseline_stderr",
        "gain_pct",
    ]);

    let points: Vec<(usize, f64, f64)> = args
        .grid
        .points()
        .into_iter()
        .enumerate()
        .filter(|&(_, (x, y))| {
            x.hypot(y) > 1e-9 && (x - args.grid.d_ds).hypot(y) > 1e-9
        })
        .map(|(i, (x, y))| (i, x, y))
        .collect();
    let rows: Vec<Result<String, Failure>> = points
        .par_iter()
        .map(|&(i, x, y)| {
            let geom = Geometry::new([0.0, 0.0], [x, y], [args.grid.d_ds, 0.0], args.grid.gamma)?;
            let cfg = McConfig::with_seed(args.trials, derive_seed(args.common.seed, 2 + i as u64))?;
            let model = rate_for(args.model, gate.as_ref(), &geom, &budget, &cfg)?;
            let base = rate_for(args.baseline, gate.as_ref(), &geom, &budget, &cfg)?;
            let gain_pct = 100.0 * (model.mean - base.mean) / base.mean;
            Ok(format!(
                "{x},{y},{},{},{},{},{}",
                model.mean, model.stderr, base.mean, base.stderr, gain_pct
            ))
        })
        .collect();
    for row in rows {
        doc.row([row?]);
    }
    doc.write_to(&args.common.out).map_err(Failure::Runtime)
}

#[derive(Debug, Args)]
pub struct SavingsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,

    /// CSI model the savings are evaluated under (perfect or practical).
    #[arg(long, value_enum, default_value_t = CsiChoice::Practical)]
    pub model: CsiChoice,

    /// Fading draws per grid point.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,

    /// Clamp the practical repeat power into [0, Pr] before counting
    /// savings (the closed form integrates the unclamped value).
    #[arg(long)]
    pub clamp: bool,
}

impl Overridable for SavingsArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "model" => self.model = parse_choice(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "clamp" => self.clamp = parse_value(key, value)?,
            _ => return Ok(self.common.set(key, value)? || self.grid.set(key, value)?),
        }
        Ok(true)
    }
}

/// Expected relay power saved versus always spending Pr, per relay
/// position, as a fraction of Pr: closed form next to its estimate.
pub fn run_savings(args: &SavingsArgs) -> Result<(), Failure> {
    args.grid.validate().map_err(Failure::Validation)?;
    let model = match args.model {
        CsiChoice::Perfect => CsiModel::Perfect,
        CsiChoice::Practical => CsiModel::Practical,
        other => {
            return Err(Failure::Validation(format!(
                "savings are defined for perfect and practical CSI, not {}",
                other.label()
            )))
        }
    };
    if args.trials == 0 {
        return Err(Failure::Validation("trials must be at least 1".into()));
    }
    let power = snr_to_power(args.grid.snr_db, args.grid.d_ds, args.grid.gamma)?;
    let budget = PowerBudget::equal(power)?;

    let mut doc = CsvDoc::new("savings-map");
    args.grid.describe(&mut doc);
    doc.param("model", args.model.label());
    doc.param("trials_per_point", args.trials);
    doc.param("seed", args.common.seed);
    doc.param("power_per_node", power);
    doc.param("clamp", args.clamp);
    doc.param("omitted", "grid points coinciding with source or destination");
    doc.columns(&[
        "x_m",
        "y_m",
        "avg_regime",
        "closed_savings_frac",
        "mc_savings_frac",
        "mc_stderr_frac",
    ]);

    let points: Vec<(usize, f64, f64)> = args
        .grid
        .points()
        .into_iter()
        .enumerate()
        .filter(|&(_, (x, y))| {
            x.hypot(y) > 1e-9 && (x - args.grid.d_ds).hypot(y) > 1e-9
        })
        .map(|(i, (x, y))| (i, x, y))
        .collect();
    let rows: Vec<Result<String, Failure>> = points
        .par_iter()
        .map(|&(i, x, y)| {
            let geom = Geometry::new([0.0, 0.0], [x, y], [args.grid.d_ds, 0.0], args.grid.gamma)?;
            let stats = pathloss_stats(&geom, &budget)?;
            let closed = match model {
                CsiModel::Perfect => expected_savings_perfect(&stats, &budget),
                _ => expected_savings_practical(&stats, &budget),
            };
            let cfg = McConfig::with_seed(args.trials, derive_seed(args.common.seed, 2 + i as u64))?;
            let est = estimate_savings(&stats, &budget, model, args.clamp, &cfg)?;
            let regime = average_regime(&average_snrs(&stats, &budget));
            Ok(format!(
                "{x},{y},{regime},{},{},{}",
                closed / budget.pr,
                est.mean / budget.pr,
                est.stderr / budget.pr
            ))
        })
        .collect();
    for row in rows {
        doc.row([row?]);
    }
    doc.write_to(&args.common.out).map_err(Failure::Runtime)
}
