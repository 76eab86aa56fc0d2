//! Flag groups shared across subcommands, plus their config-file
//! override hooks. Defaults mirror the reference setup: γ = 3.6,
//! d_ds = 20 m, 5 dB average direct-link SNR, half-meter grid.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dfrelay_core::csi::CsiModel;

use crate::config::{parse_value, Overridable};

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Base RNG seed; every sampled quantity is a pure function of it.
    #[arg(long, env = "DFRELAY_SEED", default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (default: all available cores).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output CSV path; '-' writes to standard output.
    #[arg(long, default_value = "-")]
    pub out: String,

    /// key=value file whose entries override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Overridable for CommonArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => self.workers = Some(parse_value(key, value)?),
            "out" => self.out = value.to_string(),
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Pathloss exponent.
    #[arg(long, default_value_t = 3.6)]
    pub gamma: f64,

    /// Source-destination distance in meters; source sits at the origin,
    /// destination at (d_ds, 0).
    #[arg(long, default_value_t = 20.0)]
    pub d_ds: f64,

    /// Average received direct-link SNR in dB, fixing the power budget.
    #[arg(long, default_value_t = 5.0)]
    pub snr_db: f64,

    /// Relay x range in meters.
    #[arg(long, default_value_t = -12.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 32.0, allow_hyphen_values = true)]
    pub x_max: f64,

    /// Relay y range in meters (maps are symmetric about the axis).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y_min: f64,
    #[arg(long, default_value_t = 16.0, allow_hyphen_values = true)]
    pub y_max: f64,

    /// Grid resolution in meters.
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
}

impl GridArgs {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.d_ds.is_finite() && self.d_ds > 0.0) {
            return Err(format!("d-ds must be positive, got {}", self.d_ds));
        }
        if !self.snr_db.is_finite() {
            return Err(format!("snr-db must be finite, got {}", self.snr_db));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(format!("step must be positive, got {}", self.step));
        }
        if self.x_max < self.x_min || self.y_max < self.y_min {
            return Err("grid ranges must be nonempty".into());
        }
        if self.points().len() > 2_000_000 {
            return Err("grid exceeds 2e6 points; coarsen the step".into());
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
        let n = ((max - min) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| min + i as f64 * step).collect()
    }

    /// Grid points in row-major order (y outer, x inner), the order rows
    /// appear in the CSV.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let xs = Self::axis(self.x_min, self.x_max, self.step);
        Self::axis(self.y_min, self.y_max, self.step)
            .into_iter()
            .flat_map(|y| xs.iter().map(move |&x| (x, y)))
            .collect()
    }

    pub fn describe(&self, doc: &mut crate::csvout::CsvDoc) {
        doc.param("gamma", self.gamma);
        doc.param("d_ds_m", self.d_ds);
        doc.param("snr_db", self.snr_db);
        doc.param("x_range_m", format_args!("{}..{}", self.x_min, self.x_max));
        doc.param("y_range_m", format_args!("{}..{}", self.y_min, self.y_max));
        doc.param("step_m", self.step);
    }
}

impl Overridable for GridArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "gamma" => self.gamma = parse_value(key, value)?,
            "d-ds" => self.d_ds = parse_value(key, value)?,
            "snr-db" => self.snr_db = parse_value(key, value)?,
            "x-min" => self.x_min = parse_value(key, value)?,
            "x-max" => self.x_max = parse_value(key, value)?,
            "y-min" => self.y_min = parse_value(key, value)?,
            "y-max" => self.y_max = parse_value(key, value)?,
            "step" => self.step = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Rate source selectable on the command line: the three CSI models plus
/// plain direct transmission as a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CsiChoice {
    Perfect,
    Practical,
    LongTerm,
    Direct,
}

impl CsiChoice {
    pub fn as_model(self) -> Option<CsiModel> {
        match self {
            Self::Perfect => Some(CsiModel::Perfect),
            Self::Practical => Some(CsiModel::Practical),
            Self::LongTerm => Some(CsiModel::LongTerm),
            Self::Direct => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Perfect => "perfect",
            Self::Practical => "practical",
            Self::LongTerm => "long-term",
            Self::Direct => "direct",
        }
    }
}

pub fn parse_choice(key: &str, value: &str) -> Result<CsiChoice, String> {
    ValueEnum::from_str(value, true)
        .map_err(|_| format!("config key '{key}': unknown model '{value}'"))
}
