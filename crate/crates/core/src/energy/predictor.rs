use crate::domain::MdcId;
use crate::workload::{ArrivalProfile, HarvestProfile};

/// A forecasting horizon of whole simulation steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start_step: u64,
    pub steps: u64,
    pub slot_seconds: f64,
}

impl Window {
    pub fn seconds(&self) -> f64 {
        self.steps as f64 * self.slot_seconds
    }
}

/// Forecasts harvested energy and task arrivals for an upcoming window.
pub trait Predictor {
    /// Energy the MDC's device will harvest over the window, J.
    fn harvest(&self, mdc: MdcId, window: &Window) -> f64;
    /// Number of tasks expected to arrive over the window.
    fn arrivals(&self, window: &Window) -> f64;
}

/// Reads the ground-truth profiles, reproducing exactly what the engine will
/// harvest and inject.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor<'a> {
    /// One profile per MDC.
    pub harvest: &'a [HarvestProfile],
    pub arrival: &'a ArrivalProfile,
}

impl Predictor for OraclePredictor<'_> {
    fn harvest(&self, mdc: MdcId, w: &Window) -> f64 {
        let profile = &self.harvest[mdc.index()];
        (w.start_step..w.start_step + w.steps)
            .map(|k| profile.power_at(k as f64 * w.slot_seconds) * w.slot_seconds)
            .sum()
    }

    fn arrivals(&self, w: &Window) -> f64 {
        let t0 = w.start_step as f64 * w.slot_seconds;
        self.arrival.integral(t0, t0 + w.seconds())
    }
}

/// Mean of the last `windows` observed per-window totals. Predicts zero until
/// anything has been observed.
#[derive(Debug, Clone, Copy)]
pub struct MovingAverage<'a> {
    /// Per MDC, harvested energy of each past window, oldest first.
    pub harvest_history: &'a [Vec<f64>],
    /// Arrivals of each past window, oldest first.
    pub arrival_history: &'a [f64],
    pub windows: usize,
}

impl MovingAverage<'_> {
    fn mean_tail(xs: &[f64], n: usize) -> f64 {
        let tail = &xs[xs.len().saturating_sub(n.max(1))..];
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        }
    }
}

impl Predictor for MovingAverage<'_> {
    fn harvest(&self, mdc: MdcId, _w: &Window) -> f64 {
        self.harvest_history
            .get(mdc.index())
            .map(|h| Self::mean_tail(h, self.windows))
            .unwrap_or(0.0)
    }

    fn arrivals(&self, _w: &Window) -> f64 {
        Self::mean_tail(self.arrival_history, self.windows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_of_constant_history() {
        let h = vec![vec![100.0, 100.0, 100.0]];
        let a = vec![5.0, 7.0, 9.0, 11.0];
        let p = MovingAverage {
            harvest_history: &h,
            arrival_history: &a,
            windows: 3,
        };
        let w = Window {
            start_step: 0,
            steps: 100,
            slot_seconds: 1.0,
        };
        assert_eq!(p.harvest(MdcId(0), &w), 100.0);
        assert_eq!(p.arrivals(&w), 9.0);
        assert_eq!(p.harvest(MdcId(3), &w), 0.0);
    }

    #[test]
    fn oracle_sums_the_profile() {
        let prof = vec![HarvestProfile::constant(2.0)];
        let arr = ArrivalProfile::Constant { rate: 0.25 };
        let p = OraclePredictor {
            harvest: &prof,
            arrival: &arr,
        };
        let w = Window {
            start_step: 40,
            steps: 100,
            slot_seconds: 1.0,
        };
        assert!((p.harvest(MdcId(0), &w) - 200.0).abs() < 1e-9);
        assert!((p.arrivals(&w) - 25.0).abs() < 1e-9);
    }
}
