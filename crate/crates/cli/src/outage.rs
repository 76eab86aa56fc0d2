//! Outage probability versus SNR for a fixed relay placement: the
//! closed-form breakdown next to sampled estimates under full and
//! partial relay power, plus a finite-difference decay slope.

use clap::Args;

use dfrelay_core::analysis::outage_closed_form;
use dfrelay_core::channel::{pathloss_stats, snr_to_power, Geometry, PowerBudget};
use dfrelay_core::csi::{long_term_allocation, CsiModel};
use dfrelay_core::montecarlo::{
    derive_seed, estimate_outage, McConfig, OutagePolicy, RelayPower,
};

use crate::args::CommonArgs;
use crate::config::{parse_value, Overridable};
use crate::csvout::CsvDoc;
use crate::Failure;

#[derive(Debug, Args)]
pub struct OutageArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Pathloss exponent.
    #[arg(long, default_value_t = 3.6)]
    pub gamma: f64,

    /// Source-destination distance in meters.
    #[arg(long, default_value_t = 20.0)]
    pub d_ds: f64,

    /// Relay position in meters (source at origin, destination on +x).
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub relay_x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub relay_y: f64,

    /// Target rate in bits/s/Hz.
    #[arg(long, default_value_t = 5.0)]
    pub target_rate: f64,

    /// Average direct-link SNR sweep in dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub snr_min: f64,
    #[arg(long, default_value_t = 25.0, allow_hyphen_values = true)]
    pub snr_max: f64,
    #[arg(long, default_value_t = 5.0)]
    pub snr_step: f64,

    /// Fading draws per SNR point and policy.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

impl Overridable for OutageArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "gamma" => self.gamma = parse_value(key, value)?,
            "d-ds" => self.d_ds = parse_value(key, value)?,
            "relay-x" => self.relay_x = parse_value(key, value)?,
            "relay-y" => self.relay_y = parse_value(key, value)?,
            "target-rate" => self.target_rate = parse_value(key, value)?,
            "snr-min" => self.snr_min = parse_value(key, value)?,
            "snr-max" => self.snr_max = parse_value(key, value)?,
            "snr-step" => self.snr_step = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            _ => return self.common.set(key, value),
        }
        Ok(true)
    }
}

/// Outage curve for the composite scheme: closed-form components, the
/// long-term-CSI estimate at full and at partial relay power, and the
/// decay slope of the closed-form total between consecutive points.
pub fn run_outage(args: &OutageArgs) -> Result<(), Failure> {
    if !(args.snr_step.is_finite() && args.snr_step > 0.0) {
        return Err(Failure::Validation(format!(
            "snr-step must be positive, got {}",
            args.snr_step
        )));
    }
    if args.snr_max < args.snr_min {
        return Err(Failure::Validation("snr range must be nonempty".into()));
    }
    if args.trials == 0 {
        return Err(Failure::Validation("trials must be at least 1".into()));
    }
    let geom = Geometry::new(
        [0.0, 0.0],
        [args.relay_x, args.relay_y],
        [args.d_ds, 0.0],
        args.gamma,
    )?;

    let mut doc = CsvDoc::new("outage-curve");
    doc.param("gamma", args.gamma);
    doc.param("d_ds_m", args.d_ds);
    doc.param(
        "relay_m",
        format_args!("({}, {})", args.relay_x, args.relay_y),
    );
    doc.param("target_rate_bps_hz", args.target_rate);
    doc.param(
        "snr_range_db",
        format_args!("{}..{} step {}", args.snr_min, args.snr_max, args.snr_step),
    );
    doc.param("trials_per_point", args.trials);
    doc.param("seed", args.common.seed);
    doc.columns(&[
        "snr_db",
        "power_per_node",
        "alpha_s",
        "closed_p_dt",
        "closed_p_relay",
        "closed_p_dest",
        "closed_total",
        "mc_full_total",
        "mc_full_stderr",
        "mc_partial_total",
        "mc_partial_stderr",
        "closed_slope",
    ]);

    let n_points = ((args.snr_max - args.snr_min) / args.snr_step + 1e-9).floor() as usize;
    let mut prev_total: Option<f64> = None;
    for i in 0..=n_points {
        let snr_db = args.snr_min + i as f64 * args.snr_step;
        let power = snr_to_power(snr_db, args.d_ds, args.gamma)?;
        let budget = PowerBudget::equal(power)?;
        let stats = pathloss_stats(&geom, &budget)?;
        let (_, alloc) = long_term_allocation(&stats, &budget);
        let closed = outage_closed_form(
            &stats,
            alloc.alpha_s,
            budget.ps - alloc.alpha_s,
            &budget,
            args.target_rate,
        )?;
        let cfg = McConfig::with_seed(args.trials, derive_seed(args.common.seed, 2 + i as u64))?;
        let policy = |relay_power| OutagePolicy::Csi {
            model: CsiModel::LongTerm,
            relay_power,
        };
        let full = estimate_outage(&stats, &budget, args.target_rate, &policy(RelayPower::Full), &cfg)?;
        let partial =
            estimate_outage(&stats, &budget, args.target_rate, &policy(RelayPower::Partial), &cfg)?;
        let slope = match prev_total {
            Some(p) if p > 0.0 && closed.total > 0.0 => {
                ((closed.total.log10() - p.log10()) / (args.snr_step / 10.0)).to_string()
            }
            _ => String::new(),
        };
        prev_total = Some(closed.total);
        doc.row([format!(
            "{snr_db},{power},{},{},{},{},{},{},{},{},{},{slope}",
            alloc.alpha_s,
            closed.p_dt,
            closed.p_relay,
            closed.p_dest,
            closed.total,
            full.total.mean,
            full.total.stderr,
            partial.total.mean,
            partial.total.stderr
        )]);
    }
    doc.write_to(&args.common.out).map_err(Failure::Runtime)
}
