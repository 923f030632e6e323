use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::domain::AppGraph;
use crate::error::{Error, Result};
use crate::scheduler::{CpReference, DsmConfig};
use crate::workload::{bundled_app, load_dag, ArrivalProfile, DagDocument, HarvestProfile, HarvestShape, TopologySpec};

/// Scheduling variant: no adaptation, scaling only, migration only, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Policy {
    N,
    S,
    M,
    SM,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::N, Policy::S, Policy::M, Policy::SM];

    pub fn allows_scaling(self) -> bool {
        matches!(self, Policy::S | Policy::SM)
    }

    pub fn allows_migration(self) -> bool {
        matches!(self, Policy::M | Policy::SM)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::N => "N",
            Policy::S => "S",
            Policy::M => "M",
            Policy::SM => "SM",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "N" => Ok(Policy::N),
            "S" => Ok(Policy::S),
            "M" => Ok(Policy::M),
            "SM" => Ok(Policy::SM),
            _ => Err(Error::Config(format!("unknown policy {s:?}; expected N, S, M or SM"))),
        }
    }
}

/// Where the application DAG comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppSource {
    /// One of the ten bundled jobs, `1..=10`.
    Bundled { job: usize },
    Inline { document: DagDocument },
    /// A TOML application document on disk.
    File { path: PathBuf },
}

impl AppSource {
    pub fn load(&self) -> Result<AppGraph> {
        match self {
            AppSource::Bundled { job } => bundled_app(*job),
            AppSource::Inline { document } => document.to_app(),
            AppSource::File { path } => load_dag(&std::fs::read_to_string(path)?),
        }
    }

    /// Short label used in file names and report keys.
    pub fn label(&self) -> String {
        match self {
            AppSource::Bundled { job } => format!("job{job}"),
            AppSource::Inline { document } => document.name.clone(),
            AppSource::File { path } => path.file_stem().map_or_else(|| "app".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorKind {
    /// Reads the true profiles.
    Oracle,
    /// Mean of the last `windows` observed windows.
    MovingAverage { windows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// Fractional accumulator; no randomness.
    Deterministic,
    /// Poisson counts with the profile's mean, drawn from the run seed.
    Poisson,
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Number of steps.
    pub horizon: u64,
    /// Slot length, s.
    pub slot_seconds: f64,
    /// Steps between scheduling rounds.
    pub scheduling_period: u64,
    pub seed: u64,
    pub policy: Policy,
    pub topology: TopologySpec,
    pub application: AppSource,
    pub arrival: ArrivalProfile,
    pub arrival_mode: ArrivalMode,
    /// Harvest profile shared by every MDC; `cm` scales it.
    pub harvest: HarvestProfile,
    pub predictor: PredictorKind,
    pub dsm: DsmConfig,
    pub cp_reference: CpReference,
    /// Starting frequency as a fraction of each server's `f_max`.
    pub initial_freq_fraction: f64,
    /// Charge fraction at which a shut-down MDC resumes; defaults to the safe line.
    pub resume_fraction: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            slot_seconds: 1.0,
            scheduling_period: 100,
            seed: 0,
            policy: Policy::SM,
            topology: TopologySpec::default(),
            application: AppSource::Bundled { job: 1 },
            arrival: ArrivalProfile::Diurnal {
                base_rate: 0.02,
                peak_multiplier: 3.0,
                period: 10_000.0,
                phase: 0.0,
            },
            arrival_mode: ArrivalMode::Deterministic,
            harvest: HarvestProfile::new(
                HarvestShape::Diurnal {
                    peak_watts: 10.0,
                    period: 10_000.0,
                    day_fraction: 0.8,
                    phase: 0.4,
                },
                1.0,
            ),
            predictor: PredictorKind::Oracle,
            dsm: DsmConfig::default(),
            cp_reference: CpReference::default(),
            initial_freq_fraction: 1.0,
            resume_fraction: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.slot_seconds > 0.0 && self.slot_seconds.is_finite()) {
            return bad("slot_seconds must be positive".into());
        }
        if self.scheduling_period == 0 {
            return bad("scheduling_period must be positive".into());
        }
        if !(self.initial_freq_fraction > 0.0 && self.initial_freq_fraction <= 1.0) {
            return bad("initial_freq_fraction must lie in (0, 1]".into());
        }
        if self.dsm.alpha < 1.0 {
            return bad("alpha must be at least 1".into());
        }
        if self.dsm.cost.kappa < 0.0 {
            return bad("kappa must be non-negative".into());
        }
        if !(self.dsm.min_freq_fraction > 0.0 && self.dsm.min_freq_fraction <= 1.0) {
            return bad("min_freq_fraction must lie in (0, 1]".into());
        }
        if let Some(r) = self.resume_fraction {
            if !(self.topology.safety_fraction..=1.0).contains(&r) {
                return bad("resume_fraction must lie between the safety fraction and 1".into());
            }
        }
        if let PredictorKind::MovingAverage { windows: 0 } = self.predictor {
            return bad("moving-average predictor needs at least one window".into());
        }
        if let Some(m) = self.dsm.cost.user_mdc {
            if m.index() >= self.topology.n_mdcs {
                return bad(format!("user MDC {m} does not exist"));
            }
        }
        self.topology.validate()?;
        self.arrival.validate()?;
        self.harvest.validate()?;
        Ok(())
    }

    /// Stable identifier of the configuration cell and seed.
    pub fn key(&self) -> String {
        format!(
            "{}_n{}_s{}_cm{}_{}_seed{}",
            self.policy.name(),
            self.topology.n_mdcs,
            self.topology.servers_per_mdc,
            self.harvest.cm,
            self.application.label(),
            self.seed
        )
    }
}
