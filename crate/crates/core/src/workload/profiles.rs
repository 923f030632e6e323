//! Time-varying task arrival and energy harvesting profiles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant series: the value at `t` is the value of the last point
/// whose time is `<= t`. Zero before the first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    points: Vec<(f64, f64)>,
}

impl Table {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite() || v < 0.0) {
            return Err(Error::Parse("table values must be finite and non-negative".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse("duplicate timestamp in table".into()));
        }
        Ok(Self { points })
    }

    /// Parses `time,value` rows. A non-numeric first row is taken as a header;
    /// blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", n + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => points.push((t, v)),
                _ if points.is_empty() => continue,
                _ => return Err(Error::Parse(format!("line {}: not a number", n + 1))),
            }
        }
        Self::new(points)
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut out = format!("{header}\n");
        for &(t, v) in &self.points {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self.points.partition_point(|&(pt, _)| pt <= t) {
            0 => 0.0,
            i => self.points[i - 1].1,
        }
    }

    /// Exact integral of the step function over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut cursor = t0;
        let mut value = self.value_at(t0);
        for &(pt, pv) in self.points.iter().filter(|&&(pt, _)| pt > t0 && pt < t1) {
            total += value * (pt - cursor);
            cursor = pt;
            value = pv;
        }
        total + value * (t1 - cursor)
    }
}

/// Shape of the harvest power curve, in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HarvestShape {
    Constant {
        watts: f64,
    },
    /// A half-sine bump during the day and zero at night. `phase` shifts the
    /// cycle by a fraction of `period`; day covers the first `day_fraction`
    /// of each cycle.
    Diurnal {
        peak_watts: f64,
        period: f64,
        day_fraction: f64,
        phase: f64,
    },
    Tabulated {
        table: Table,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestProfile {
    #[serde(flatten)]
    pub shape: HarvestShape,
    /// Charging multiplier applied pointwise.
    #[serde(default = "one")]
    pub cm: f64,
}

fn one() -> f64 {
    1.0
}

/// Position inside a periodic cycle, in `[0, 1)`.
fn cycle_position(t: f64, period: f64, phase: f64) -> f64 {
    (t / period + phase).rem_euclid(1.0)
}

impl HarvestProfile {
    pub fn new(shape: HarvestShape, cm: f64) -> Self {
        Self { shape, cm }
    }

    pub fn constant(watts: f64) -> Self {
        Self::new(HarvestShape::Constant { watts }, 1.0)
    }

    pub fn with_cm(mut self, cm: f64) -> Self {
        self.cm = cm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match &self.shape {
            HarvestShape::Constant { watts } => *watts >= 0.0,
            HarvestShape::Diurnal {
                peak_watts,
                period,
                day_fraction,
                ..
            } => *peak_watts >= 0.0 && *period > 0.0 && *day_fraction > 0.0 && *day_fraction <= 1.0,
            HarvestShape::Tabulated { .. } => true,
        };
        if ok && self.cm >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config("invalid harvest profile".into()))
        }
    }

    /// Harvest power at absolute time `t` (seconds), including `cm`.
    pub fn power_at(&self, t: f64) -> f64 {
        let base = match &self.shape {
            HarvestShape::Constant { watts } => *watts,
            HarvestShape::Diurnal {
                peak_watts,
                period,
                day_fraction,
                phase,
            } => {
                let tau = cycle_position(t, *period, *phase);
                if tau < *day_fraction {
                    peak_watts * (PI * tau / day_fraction).sin()
                } else {
                    0.0
                }
            }
            HarvestShape::Tabulated { table } => table.value_at(t),
        };
        base.max(0.0) * self.cm
    }
}

/// Harvest power for a simulation step; the step-start value is held for the
/// whole slot.
pub fn harvest_power(profile: &HarvestProfile, step: u64, slot_seconds: f64) -> f64 {
    profile.power_at(step as f64 * slot_seconds)
}

/// Task trigger rate in tasks per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProfile {
    Constant {
        rate: f64,
    },
    /// Raised-cosine daily demand: `base_rate` at the trough, rising to
    /// `base_rate * peak_multiplier` half a period later.
    Diurnal {
        base_rate: f64,
        peak_multiplier: f64,
        period: f64,
        phase: f64,
    },
    Tabulated {
        table: Table,
    },
}

impl ArrivalProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ArrivalProfile::Constant { rate } => *rate >= 0.0,
            ArrivalProfile::Diurnal {
                base_rate,
                peak_multiplier,
                period,
                ..
            } => *base_rate >= 0.0 && *peak_multiplier >= 0.0 && *period > 0.0,
            ArrivalProfile::Tabulated { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid arrival profile".into()))
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        match self {
            ArrivalProfile::Constant { rate } => *rate,
            ArrivalProfile::Diurnal {
                base_rate,
                peak_multiplier,
                period,
                phase,
            } => {
                let tau = cycle_position(t, *period, *phase);
                base_rate * (1.0 + (peak_multiplier - 1.0) * 0.5 * (1.0 - (2.0 * PI * tau).cos()))
            }
            ArrivalProfile::Tabulated { table } => table.value_at(t),
        }
    }

    /// Expected number of triggers in `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        match self {
            ArrivalProfile::Constant { rate } => rate * (t1 - t0),
            ArrivalProfile::Diurnal {
                base_rate,
                peak_multiplier,
                period,
                phase,
            } => {
                let w = 2.0 * PI / period;
                let sin = |t: f64| (w * t + 2.0 * PI * phase).sin();
                let cos_part = (sin(t1) - sin(t0)) / w;
                base_rate * ((t1 - t0) + (peak_multiplier - 1.0) * 0.5 * ((t1 - t0) - cos_part))
            }
            ArrivalProfile::Tabulated { table } => table.integral(t0, t1),
        }
    }
}

/// Deterministic counting process: each slot adds the profile's integral over
/// the slot to an accumulator and releases its whole part.
#[derive(Debug, Clone, Default)]
pub struct ArrivalAccumulator {
    carried: f64,
}

impl ArrivalAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tasks to inject at the start of `step`.
    pub fn arrival_count(&mut self, profile: &ArrivalProfile, step: u64, slot_seconds: f64) -> u32 {
        let t0 = step as f64 * slot_seconds;
        self.carried += profile.integral(t0, t0 + slot_seconds);
        // absorb rounding so an exact integer total is not lost to 0.999..
        let whole = (self.carried + 1e-9).floor().max(0.0);
        self.carried -= whole;
        whole as u32
    }
}
