//! Harvesting, battery dynamics, safe-line operability and per-MDC
//! supply/demand forecasting.

mod forecast;
mod predictor;

use serde::{Deserialize, Serialize};

pub use forecast::{classify_mdcs, estimate_demand, estimate_supply, per_task_energy, EnergyForecast, MdcClassification};
pub use predictor::{MovingAverage, OraclePredictor, Predictor, Window};

use crate::domain::{MdcId, Server};
use crate::error::{Error, Result};

/// Slack allowed when checking that consumption was gated on availability.
const OVERDRAW_TOLERANCE: f64 = 1e-9;

/// Battery-backed harvesting device powering one MDC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhDevice {
    pub mdc: MdcId,
    /// Storage capacity, J.
    pub capacity: f64,
    /// Current charge, J.
    pub battery: f64,
    /// Charge below which the MDC shuts down, J.
    pub safe_line: f64,
    /// Charge at which a shut-down MDC resumes, J.
    pub resume_line: f64,
}

impl EhDevice {
    pub fn new(mdc: MdcId, capacity: f64, battery: f64, safety_fraction: f64) -> Self {
        let safe_line = safety_fraction * capacity;
        Self {
            mdc,
            capacity,
            battery: battery.clamp(0.0, capacity),
            safe_line,
            resume_line: safe_line,
        }
    }

    pub fn with_resume_line(mut self, resume_line: f64) -> Self {
        self.resume_line = resume_line;
        self
    }

    /// Energy that can be drawn before the safe line is crossed.
    pub fn headroom(&self) -> f64 {
        (self.battery - self.safe_line).max(0.0)
    }
}

/// Result of one battery update.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryStep {
    pub device: EhDevice,
    /// Harvested energy discarded because the battery was full, J.
    pub overflow: f64,
}

/// Dynamic energy of a server busy for `busy_time` seconds at its current
/// frequency. Idle time draws nothing.
pub fn slot_energy(s: &Server, busy_time: f64) -> f64 {
    s.beta * s.f_cur.powi(3) * busy_time
}

/// Advances a battery by one slot, clamping at capacity. Excess harvest is
/// reported as overflow. Consumption must already be gated on what the
/// battery can supply; overdrawing is an accounting error.
pub fn battery_step(dev: &EhDevice, harvested: f64, consumed: f64) -> Result<BatteryStep> {
    debug_assert!(harvested >= 0.0 && consumed >= 0.0);
    let available = dev.battery + harvested;
    if consumed > available + OVERDRAW_TOLERANCE {
        return Err(Error::Overdraw {
            mdc: dev.mdc,
            consumed,
            available,
        });
    }
    let level = (available - consumed).max(0.0);
    let overflow = (level - dev.capacity).max(0.0);
    let mut device = dev.clone();
    device.battery = level.min(dev.capacity);
    Ok(BatteryStep { device, overflow })
}

/// Safe-line hysteresis: an operational MDC trips when it falls below the
/// safe line, a tripped one resumes once it reaches the resume line.
pub fn is_operational(dev: &EhDevice, was_operational: bool) -> bool {
    if was_operational {
        dev.battery >= dev.safe_line
    } else {
        dev.battery >= dev.resume_line
    }
}
