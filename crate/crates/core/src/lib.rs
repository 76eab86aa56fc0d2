//! Decode-forward relaying over Rayleigh-faded links: power allocation,
//! outage and savings closed forms, and the seeded Monte Carlo estimators
//! that cross-check them.
//!
//! The model is a three-node network (source, relay, destination) where
//! the source splits its power budget between a fresh message and a
//! repeat of the previous one, and the relay forwards what it decoded.
//! Everything downstream of the channel layer works in terms of the three
//! link gains (g_rs, g_ds, g_dr) and the budget (Ps, Pr); geometry enters
//! only through pathloss d^(-γ) and the relay-placement rule.
//!
//! Layering, bottom up:
//! - [`channel`]: geometry, budgets, Rayleigh fading statistics, sampling.
//! - [`ratecore`]: instantaneous rate constraints, operating regimes, and
//!   the optimal power split per fade.
//! - [`csi`]: allocations under reduced channel knowledge and the
//!   geometric relay-use rule.
//! - [`analysis`]: closed-form regime probabilities, outage, high-SNR
//!   asymptotics, and expected relay-power savings.
//! - [`montecarlo`]: reproducible parallel estimators for all of the
//!   above, diversity-slope fits, and the ellipse calibration.

pub mod analysis;
pub mod channel;
pub mod csi;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod ratecore;

pub use channel::{FadingStats, Geometry, LinkGains, PowerBudget, SnrTriple};
pub use csi::{CsiModel, EllipseSpec};
pub use error::{CoreError, Result};
pub use montecarlo::{Estimate, McConfig, OutagePolicy, RelayPower};
pub use ratecore::{PowerAllocation, Regime};
