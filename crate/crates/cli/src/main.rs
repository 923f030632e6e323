use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ehmec::engine::{run_simulation, AppSource, Policy};
use ehmec::grid::{run_grid, Experiment};
use ehmec::metrics::Summary;
use ehmec::report::{recompute_summary, write_grid, write_run};
use ehmec::workload::{bundled_app, gen_topology, serialize_dag, synthesize_app, AppTarget, REFERENCE_JOBS};

/// Energy-harvesting edge computing simulator.
#[derive(Parser)]
#[command(name = "ehmec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace and summary.
    Run {
        #[command(flatten)]
        over: Overrides,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every cell of the configuration's grid and write the report.
    Sweep {
        #[command(flatten)]
        over: Overrides,
        #[arg(short, long, default_value = "sweep")]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Seeds to run, replacing the grid's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Generate inputs.
    #[command(subcommand)]
    Gen(Gen),
    /// Recompute summaries from stored `.trace.csv` files or directories.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Write the table here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Gen {
    /// The default configuration file.
    Config {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// A topology drawn from the configuration's topology section.
    Topology {
        #[command(flatten)]
        over: Overrides,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// A synthetic application matching one reference job, or custom targets.
    App {
        /// Reference job 1..=10.
        #[arg(long, conflicts_with = "modules")]
        job: Option<usize>,
        #[arg(long, requires_all = ["edges", "max_degree", "avg_transfer", "avg_workload"])]
        modules: Option<usize>,
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long)]
        avg_transfer: Option<f64>,
        #[arg(long)]
        avg_workload: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "app")]
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// The ten bundled applications.
    Apps {
        #[arg(short, long, default_value = "apps")]
        out: PathBuf,
    },
    /// Per-step harvest power and arrival rate of the configuration.
    Profile {
        #[command(flatten)]
        over: Overrides,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

/// Configuration file plus flag overrides.
#[derive(Args)]
struct Overrides {
    /// TOML configuration; defaults apply without one.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<Policy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    cm: Option<f64>,
    #[arg(long)]
    n_mdcs: Option<usize>,
    #[arg(long)]
    servers_per_mdc: Option<usize>,
    /// Bundled job 1..=10.
    #[arg(long, conflicts_with = "app")]
    job: Option<usize>,
    /// Application document.
    #[arg(long)]
    app: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<Experiment> {
        let mut e = match &self.config {
            Some(p) => Experiment::from_toml(&read(p)?)?,
            None => Experiment::default(),
        };
        let s = &mut e.sim;
        if let Some(v) = self.policy {
            s.policy = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.horizon {
            s.horizon = v;
        }
        if let Some(v) = self.cm {
            s.harvest.cm = v;
        }
        if let Some(v) = self.n_mdcs {
            s.topology.n_mdcs = v;
        }
        if let Some(v) = self.servers_per_mdc {
            s.topology.servers_per_mdc = v;
        }
        if let Some(job) = self.job {
            s.application = AppSource::Bundled { job };
        }
        if let Some(path) = &self.app {
            s.application = AppSource::File { path: path.clone() };
        }
        s.validate()?;
        Ok(e)
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn summary_line(s: &Summary) -> String {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    format!(
        "{},{},{},{},{:.6},{},{},{}",
        s.key,
        opt(s.lt),
        s.th,
        s.injected,
        s.ru,
        opt(s.energy_efficiency),
        s.migrations,
        s.scalings
    )
}

const SUMMARY_HEADER: &str = "key,lt,th,injected,ru,energy_efficiency,migrations,scalings\n";

fn traces_in(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(".trace.csv"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!(ehmec::Error::Config("no .trace.csv files found".into()));
    }
    Ok(out)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { over, out } => {
            let e = over.resolve()?;
            let result = run_simulation(&e.sim)?;
            let files = write_run(&out, &result)?;
            let s = Summary::of(&result)?;
            println!("{SUMMARY_HEADER}{}", summary_line(&s));
            for f in files {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Sweep {
            over,
            out,
            workers,
            seeds,
        } => {
            let mut e = over.resolve()?;
            if let Some(w) = workers {
                e.grid.workers = w;
            }
            if let Some(s) = seeds {
                e.grid.seeds = s;
            }
            let report = run_grid(&e.sim, &e.grid)?;
            write_grid(&out, &e, &report)?;
            let failed = report.runs.iter().filter(|r| r.error.is_some()).count();
            println!("{} runs, {failed} failed, report in {}", report.runs.len(), out.display());
        }
        Command::Gen(g) => match g {
            Gen::Config { out } => emit(out.as_deref(), &Experiment::default().to_toml())?,
            Gen::Topology { over, out } => {
                let e = over.resolve()?;
                let t = gen_topology(&e.sim.topology, e.sim.seed)?;
                emit(out.as_deref(), &(serde_json::to_string_pretty(&t.dump())? + "\n"))?;
            }
            Gen::App {
                job,
                modules,
                edges,
                max_degree,
                avg_transfer,
                avg_workload,
                seed,
                name,
                out,
            } => {
                let app = match (job, modules) {
                    (Some(j), _) => bundled_app(j)?,
                    (None, Some(modules)) => {
                        let target = AppTarget {
                            modules,
                            edges: edges.unwrap_or_default(),
                            max_degree: max_degree.unwrap_or_default(),
                            avg_transfer: avg_transfer.unwrap_or_default(),
                            avg_workload: avg_workload.unwrap_or_default(),
                        };
                        synthesize_app(&name, &target, seed)?
                    }
                    (None, None) => bail!(ehmec::Error::Config("give --job or --modules with its targets".into())),
                };
                emit(out.as_deref(), &serialize_dag(&app))?;
            }
            Gen::Apps { out } => {
                fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
                for job in 1..=REFERENCE_JOBS.len() {
                    let p = out.join(format!("job{job}.toml"));
                    emit(Some(&p), &serialize_dag(&bundled_app(job)?))?;
                }
            }
            Gen::Profile { over, out } => {
                let e = over.resolve()?;
                let s = &e.sim;
                let mut body = String::from("step,harvest_w,arrival_rate\n");
                for k in 0..s.horizon {
                    let t = k as f64 * s.slot_seconds;
                    let _ = writeln!(body, "{k},{:.6},{:.6}", s.harvest.power_at(t), s.arrival.rate_at(t));
                }
                emit(out.as_deref(), &body)?;
            }
        },
        Command::Report { paths, out } => {
            let mut body = String::from(SUMMARY_HEADER);
            for p in traces_in(&paths)? {
                let s = recompute_summary(&p).with_context(|| format!("summarizing {}", p.display()))?;
                body += &summary_line(&s);
                body.push('\n');
            }
            emit(out.as_deref(), &body)?;
        }
    }
    Ok(())
}

/// 2 for configuration and input errors, 4 for I/O, 3 for anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    use ehmec::Error as E;
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::Config(_) | E::Parse(_) | E::InvalidApp(_) | E::Cycle(_) | E::InvalidNetwork(_) => 2,
                E::Io(_) => 4,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
