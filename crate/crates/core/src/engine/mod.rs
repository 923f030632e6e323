//! Discrete-time simulation loop.
//!
//! Each step runs, in order: the scheduling round (every
//! `scheduling_period` steps after step 0), task injection, harvesting,
//! execution with consumption gating, the battery update and operability
//! check, and finally delivery of every packet that arrives by the end of the
//! slot. A module receiving its last input in slot `k` can run from slot
//! `k + 1`; a task completes at the end of the slot in which its last sink
//! output reaches the user.

mod config;
mod trace;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub use config::{AppSource, ArrivalMode, Policy, PredictorKind, SimConfig};
pub use trace::{trace_from_csv, trace_header, trace_to_csv, AuditRecord, CsvRow, EnergyLedger, TraceRecord, WindowRecord};

use crate::domain::{colocation_factor, comm_delay_mdcs, AppGraph, MdcId, Network, Placement, ServerId, Tenancy};
use crate::energy::{battery_step, is_operational, slot_energy, EhDevice, MovingAverage, OraclePredictor, Predictor, Window};
use crate::error::{Error, Result};
use crate::scheduler::{critical_path, dsm_step, initial_assignment, CriticalPath, Decision, DsmConfig, Snapshot};
use crate::workload::{gen_topology, ArrivalAccumulator, HarvestProfile, Topology};

/// Per-MDC consumed and overflow energy, per-server busy fraction and
/// per-MDC operational flags of one slot.
pub type SlotOutcome = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>);

/// Remaining cycles below which a task counts as finished.
const CYCLE_EPSILON: f64 = 1e-6;
/// Relative slack when mapping an arrival time to its slot.
const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Task {
    trigger_step: u64,
    /// Inputs still missing, by module index.
    missing: Vec<u32>,
    /// Sink outputs not yet at the user.
    sinks_left: usize,
    done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dest {
    Module(usize),
    User,
}

#[derive(Debug, Clone, Copy)]
struct Transfer {
    arrival: f64,
    seq: u64,
    task: usize,
    dest: Dest,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub config: SimConfig,
    pub trace: Vec<TraceRecord>,
    pub windows: Vec<WindowRecord>,
    pub audits: Vec<AuditRecord>,
    pub ledger: Vec<EnergyLedger>,
    pub initial_placement: Placement,
    pub final_placement: Placement,
    /// Tasks injected over the horizon.
    pub injected: usize,
    pub network: Network,
}

/// Mutable simulation state.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    dsm: DsmConfig,
    app: AppGraph,
    cp: CriticalPath,
    net: Network,
    devices: Vec<EhDevice>,
    harvest: Vec<HarvestProfile>,
    placement: Placement,
    initial_placement: Placement,
    tenancy: Tenancy,
    user_mdc: MdcId,
    tasks: Vec<Task>,
    outstanding: usize,
    /// FIFO of `(task, remaining cycles)` per module.
    queues: Vec<VecDeque<(usize, f64)>>,
    transfers: Vec<Transfer>,
    seq: u64,
    accumulator: ArrivalAccumulator,
    rng: ChaCha8Rng,
    step: u64,
    pending_decisions: Vec<Decision>,
    trace: Vec<TraceRecord>,
    windows: Vec<WindowRecord>,
    audits: Vec<AuditRecord>,
    ledger: Vec<EnergyLedger>,
    harvest_history: Vec<Vec<f64>>,
    arrival_history: Vec<f64>,
    window_harvest: Vec<f64>,
    window_arrivals: f64,
}

impl Simulation {
    /// Generates the topology and loads the application named by `cfg`.
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let topo = gen_topology(&cfg.topology, cfg.seed)?;
        let app = cfg.application.load()?;
        Self::from_parts(cfg, app, topo)
    }

    /// Builds a simulation over an explicit application and topology.
    pub fn from_parts(cfg: SimConfig, app: AppGraph, topo: Topology) -> Result<Self> {
        cfg.validate()?;
        let Topology { mut network, mut devices } = topo;
        let n_mdcs = network.mdcs().len();
        if devices.len() != n_mdcs {
            return Err(Error::Config("one device per MDC required".into()));
        }
        if let Some(r) = cfg.resume_fraction {
            for d in &mut devices {
                d.resume_line = r * d.capacity;
            }
        }
        for s in 0..network.servers().len() {
            let f = network.servers()[s].f_max * cfg.initial_freq_fraction;
            network.set_frequency(ServerId(s as u32), f);
        }
        for d in &devices {
            let op = is_operational(d, true);
            network.set_operational(d.mdc, op);
        }
        let mut dsm = cfg.dsm.clone();
        dsm.allow_scaling &= cfg.policy.allows_scaling();
        dsm.allow_migration &= cfg.policy.allows_migration();
        let user_mdc = *dsm.cost.user_mdc.get_or_insert(MdcId(0));
        if user_mdc.index() >= n_mdcs {
            return Err(Error::Config(format!("user MDC {user_mdc} does not exist")));
        }

        let cp = critical_path(&app, &cfg.cp_reference);
        let placement = initial_assignment(&app, &network, &cp, &dsm.cost)?;
        let tenancy = Tenancy::from_placement(&placement, network.servers().len());
        let ledger = devices
            .iter()
            .map(|d| EnergyLedger {
                mdc: d.mdc,
                initial: d.battery,
                harvested: 0.0,
                consumed: 0.0,
                overflow: 0.0,
                fin: d.battery,
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        Ok(Self {
            harvest: vec![cfg.harvest.clone(); n_mdcs],
            queues: vec![VecDeque::new(); app.len()],
            initial_placement: placement.clone(),
            cfg,
            dsm,
            app,
            cp,
            net: network,
            devices,
            placement,
            tenancy,
            user_mdc,
            tasks: Vec::new(),
            outstanding: 0,
            transfers: Vec::new(),
            seq: 0,
            accumulator: ArrivalAccumulator::new(),
            rng,
            step: 0,
            pending_decisions: Vec::new(),
            trace: Vec::new(),
            windows: Vec::new(),
            audits: Vec::new(),
            ledger,
            harvest_history: vec![Vec::new(); n_mdcs],
            arrival_history: Vec::new(),
            window_harvest: vec![0.0; n_mdcs],
            window_arrivals: 0.0,
        })
    }

    pub fn app(&self) -> &AppGraph {
        &self.app
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn devices(&self) -> &[EhDevice] {
        &self.devices
    }

    pub fn critical_path(&self) -> &CriticalPath {
        &self.cp
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    /// Tasks injected but not yet completed.
    pub fn outstanding(&self) -> usize {
        self.outstanding
    }

    fn slot(&self) -> f64 {
        self.cfg.slot_seconds
    }

    /// Runs every remaining step and returns the results.
    pub fn run(mut self) -> Result<SimOutput> {
        while self.step < self.cfg.horizon {
            self.step_once()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> SimOutput {
        SimOutput {
            injected: self.tasks.len(),
            config: self.cfg,
            trace: self.trace,
            windows: self.windows,
            audits: self.audits,
            ledger: self.ledger,
            initial_placement: self.initial_placement,
            final_placement: self.placement,
            network: self.net,
        }
    }

    /// Applies decisions atomically. Returns the ones that took effect;
    /// migrations to a non-operational MDC are skipped.
    pub fn apply_decisions(&mut self, decisions: &[Decision]) -> Vec<Decision> {
        let mut applied = Vec::with_capacity(decisions.len());
        for d in decisions {
            match *d {
                Decision::Scale { server, freq } => {
                    self.net.set_frequency(server, freq);
                    applied.push(*d);
                }
                Decision::Migrate { module, target } => {
                    let Some(idx) = self.app.index_of(module) else {
                        log::warn!("migration of unknown module {module} skipped");
                        continue;
                    };
                    let mdc = self.net.server(target).mdc;
                    if !self.net.is_operational(mdc) {
                        log::warn!("migration of {module} to {target} skipped: MDC {mdc} is down");
                        continue;
                    }
                    let from = self.placement.host(idx);
                    if from == target {
                        continue;
                    }
                    self.tenancy.decrement(from);
                    self.tenancy.increment(target);
                    self.placement.set_host(idx, target);
                    applied.push(*d);
                }
            }
        }
        applied
    }

    fn predicted_tasks(&self, predictor: &dyn Predictor, window: &Window) -> f64 {
        predictor.arrivals(window) + self.outstanding as f64
    }

    /// Runs one scheduling round and queues its decisions for this step.
    fn schedule(&mut self) -> Result<()> {
        let k = self.step;
        let window = Window {
            start_step: k,
            steps: self.cfg.scheduling_period,
            slot_seconds: self.slot(),
        };
        let plan = {
            let oracle;
            let average;
            let predictor: &dyn Predictor = match self.cfg.predictor {
                PredictorKind::Oracle => {
                    oracle = OraclePredictor {
                        harvest: &self.harvest,
                        arrival: &self.cfg.arrival,
                    };
                    &oracle
                }
                PredictorKind::MovingAverage { windows } => {
                    average = MovingAverage {
                        harvest_history: &self.harvest_history,
                        arrival_history: &self.arrival_history,
                        windows,
                    };
                    &average
                }
            };
            let snap = Snapshot {
                app: &self.app,
                cp: &self.cp,
                net: &self.net,
                placement: &self.placement,
                supply: Snapshot::supply_from(&self.devices, &window, predictor),
                predicted_tasks: self.predicted_tasks(predictor, &window),
            };
            let predicted_tasks = snap.predicted_tasks;
            (dsm_step(&snap, &self.dsm)?, predicted_tasks)
        };
        let (plan, predicted_tasks) = plan;
        let applied = self.apply_decisions(&plan.decisions);
        let migrations = applied.iter().filter(|d| d.is_migration()).count();
        self.windows.push(WindowRecord {
            step: k,
            scenario: plan.scenario,
            surplus: plan.classification.surplus,
            deficit: plan.classification.deficit,
            neutral: plan.classification.neutral,
            supply: plan.forecast.supply,
            demand: plan.forecast.demand,
            predicted_tasks,
            scalings: applied.len() - migrations,
            migrations,
        });
        for audit in plan.audits {
            let taken = applied.iter().any(|d| {
                matches!(*d, Decision::Migrate { module, target } if module == audit.module && target == audit.to)
            });
            if taken {
                self.audits.push(AuditRecord { step: k, audit });
            }
        }
        self.pending_decisions = applied;
        Ok(())
    }

    fn roll_window(&mut self) {
        for (h, w) in self.harvest_history.iter_mut().zip(&mut self.window_harvest) {
            h.push(*w);
            *w = 0.0;
        }
        self.arrival_history.push(self.window_arrivals);
        self.window_arrivals = 0.0;
    }

    fn inject(&mut self) -> u32 {
        let k = self.step;
        let n = match self.cfg.arrival_mode {
            ArrivalMode::Deterministic => self.accumulator.arrival_count(&self.cfg.arrival, k, self.slot()),
            ArrivalMode::Poisson => {
                let t0 = k as f64 * self.slot();
                let mean = self.cfg.arrival.integral(t0, t0 + self.slot());
                if mean > 0.0 {
                    Poisson::new(mean).map(|p| p.sample(&mut self.rng) as u32).unwrap_or(0)
                } else {
                    0
                }
            }
        };
        for _ in 0..n {
            let id = self.tasks.len();
            let missing: Vec<u32> = self.app.modules().iter().map(|m| m.preds.len() as u32).collect();
            for (i, &miss) in missing.iter().enumerate() {
                if miss == 0 {
                    let cycles = self.app.modules()[i].wl * self.dsm.cost.units.cycles_per_workload;
                    self.queues[i].push_back((id, cycles));
                }
            }
            self.tasks.push(Task {
                trigger_step: k,
                missing,
                sinks_left: self.app.sink_count(),
                done: false,
            });
        }
        self.outstanding += n as usize;
        self.window_arrivals += n as f64;
        n
    }

    fn send(&mut self, task: usize, dest: Dest, arrival: f64) {
        self.transfers.push(Transfer {
            arrival,
            seq: self.seq,
            task,
            dest,
        });
        self.seq += 1;
    }

    /// Emits the output packets of module `idx` for `task`, finished at absolute time `t`.
    fn complete_module(&mut self, idx: usize, task: usize, t: f64) -> Result<()> {
        let v = &self.app.modules()[idx];
        let size = v.size;
        let from = self.net.server(self.placement.host(idx)).mdc;
        let succs: Vec<usize> = self.app.succ_indices(idx).collect();
        let units = self.dsm.cost.units;
        for j in succs {
            let to = self.net.server(self.placement.host(j)).mdc;
            let delay = comm_delay_mdcs(size, from, to, &self.net, &units)?;
            self.send(task, Dest::Module(j), t + delay);
        }
        if self.app.is_sink(idx) {
            let delay = comm_delay_mdcs(size, from, self.user_mdc, &self.net, &units)?;
            self.send(task, Dest::User, t + delay);
        }
        Ok(())
    }

    /// Processor sharing on server `s` for at most `limit` seconds: every
    /// module with queued work gets an equal share of the CPU, each slowed by
    /// the server's co-location factor. Returns busy seconds and the
    /// `(module, task, offset)` of every module-task finished.
    fn share(&mut self, s: ServerId, limit: f64, dry: bool) -> (f64, Vec<(usize, usize, f64)>) {
        let server = self.net.server(s);
        let k = colocation_factor(self.tenancy.count(s), self.dsm.cost.kappa);
        let speed = server.f_cur / k;
        let hosted: Vec<usize> = self.placement.modules_on(s).filter(|&i| !self.queues[i].is_empty()).collect();
        let mut work: Vec<VecDeque<(usize, f64)>> = hosted.iter().map(|&i| self.queues[i].clone()).collect();
        let mut done = Vec::new();
        let mut t = 0.0;
        loop {
            let active: Vec<usize> = (0..work.len()).filter(|&a| !work[a].is_empty()).collect();
            if active.is_empty() || t >= limit {
                break;
            }
            let rate = speed / active.len() as f64;
            let next = active.iter().map(|&a| work[a][0].1 / rate).fold(f64::INFINITY, f64::min);
            let dt = next.min(limit - t);
            t += dt;
            for &a in &active {
                let head = &mut work[a][0];
                head.1 -= rate * dt;
                if (dt >= next || head.1 <= CYCLE_EPSILON) && (head.1 <= CYCLE_EPSILON || head.1 / rate <= TIME_EPSILON * limit) {
                    let (task, _) = work[a].pop_front().expect("active queue");
                    done.push((hosted[a], task, t));
                }
            }
        }
        if !dry {
            for (a, q) in hosted.iter().zip(work) {
                self.queues[*a] = q;
            }
        }
        (t, done)
    }

    /// Advances execution on every operational MDC by one slot with
    /// consumption gated on the battery, then settles the batteries.
    pub fn advance_slot(&mut self, harvested: &[f64]) -> Result<SlotOutcome> {
        let slot = self.slot();
        let t0 = self.step as f64 * slot;
        let n_servers = self.net.servers().len();
        let mut busy = vec![0.0; n_servers];
        let mut consumed = vec![0.0; self.devices.len()];
        let mut overflow = vec![0.0; self.devices.len()];
        let was_op: Vec<bool> = self.net.mdcs().iter().map(|m| m.operational).collect();
        let mut tripped = vec![false; self.devices.len()];

        for m in 0..self.devices.len() {
            if !was_op[m] {
                continue;
            }
            let servers = self.net.mdcs()[m].servers.clone();
            let planned: Vec<f64> = servers.iter().map(|&s| self.share(s, slot, true).0).collect();
            let energy: f64 = servers
                .iter()
                .zip(&planned)
                .map(|(&s, &b)| slot_energy(self.net.server(s), b))
                .sum();
            let dev = &self.devices[m];
            let affordable = (dev.battery + harvested[m] - dev.safe_line).max(0.0);
            let phi = if energy > affordable {
                tripped[m] = true;
                affordable / energy
            } else {
                1.0
            };
            let mut finished = Vec::new();
            for (&s, &b) in servers.iter().zip(&planned) {
                let limit = if phi < 1.0 { b * phi } else { slot };
                let (used, done) = self.share(s, limit, false);
                busy[s.index()] = used;
                consumed[m] += slot_energy(self.net.server(s), used);
                finished.extend(done);
            }
            finished.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
            for (idx, task, offset) in finished {
                self.complete_module(idx, task, t0 + offset)?;
            }
        }

        for m in 0..self.devices.len() {
            let step = battery_step(&self.devices[m], harvested[m], consumed[m])?;
            self.devices[m] = step.device;
            overflow[m] = step.overflow;
            let op = !tripped[m] && is_operational(&self.devices[m], was_op[m]);
            self.net.set_operational(MdcId(m as u32), op);
            let l = &mut self.ledger[m];
            l.harvested += harvested[m];
            l.consumed += consumed[m];
            l.overflow += overflow[m];
            l.fin = self.devices[m].battery;
        }
        let busy_frac = busy.iter().map(|b| b / slot).collect();
        Ok((consumed, overflow, busy_frac, was_op))
    }

    /// Delivers every packet arriving by the end of the current slot and
    /// returns the latencies of tasks completed by them.
    fn deliver(&mut self) -> Vec<f64> {
        let slot = self.slot();
        let end = (self.step + 1) as f64 * slot;
        let (mut due, rest): (Vec<Transfer>, Vec<Transfer>) =
            self.transfers.drain(..).partition(|t| t.arrival <= end + TIME_EPSILON * slot);
        self.transfers = rest;
        due.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.seq.cmp(&b.seq)));
        let mut latencies = Vec::new();
        for tr in due {
            match tr.dest {
                Dest::Module(j) => {
                    let task = &mut self.tasks[tr.task];
                    task.missing[j] -= 1;
                    if task.missing[j] == 0 {
                        let cycles = self.app.modules()[j].wl * self.dsm.cost.units.cycles_per_workload;
                        self.queues[j].push_back((tr.task, cycles));
                    }
                }
                Dest::User => {
                    let task = &mut self.tasks[tr.task];
                    task.sinks_left -= 1;
                    if task.sinks_left == 0 {
                        task.done = true;
                        self.outstanding -= 1;
                        latencies.push((self.step + 1 - task.trigger_step) as f64 * slot);
                    }
                }
            }
        }
        latencies
    }

    /// Executes one full step.
    pub fn step_once(&mut self) -> Result<()> {
        let k = self.step;
        let period = self.cfg.scheduling_period;
        self.pending_decisions.clear();
        if k > 0 && k.is_multiple_of(period) {
            self.roll_window();
            self.schedule()?;
        }
        let arrivals = self.inject();
        let slot = self.slot();
        let harvested: Vec<f64> = self.harvest.iter().map(|h| h.power_at(k as f64 * slot) * slot).collect();
        for (w, h) in self.window_harvest.iter_mut().zip(&harvested) {
            *w += h;
        }
        let freq: Vec<f64> = self.net.servers().iter().map(|s| s.f_cur).collect();
        let (consumed, overflow, busy, operational) = self.advance_slot(&harvested)?;
        let latencies = self.deliver();
        self.trace.push(TraceRecord {
            step: k,
            battery: self.devices.iter().map(|d| d.battery).collect(),
            operational,
            harvested,
            consumed,
            overflow,
            freq,
            busy,
            decisions: std::mem::take(&mut self.pending_decisions),
            arrivals,
            latencies,
        });
        self.step += 1;
        Ok(())
    }
}

/// Runs a configuration end to end.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimOutput> {
    Simulation::new(cfg.clone())?.run()
}
