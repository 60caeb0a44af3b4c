use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use uav_wind::bench::experiment::city_for;
use uav_wind::bench::report::write_report;
use uav_wind::bench::{compare_schemes, run_experiment, ExperimentConfig};
use uav_wind::online::{fly_online, OnlineConfig};
use uav_wind::planner::io::{read_plan_csv, write_convergence_csv, write_plan};
use uav_wind::planner::{plan_offline, plan_windless};
use uav_wind::propulsion::{power_eval_csv, reduce_check};
use uav_wind::wind::sample_trace;
use uav_wind::Error;

#[derive(Parser)]
#[command(name = "uav-wind", version, about = "Wind-aware UAV trajectory and scheduling design")]
struct Cli {
    /// Experiment config (TOML); reference scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanKind {
    Offline,
    Windless,
}

#[derive(Subcommand)]
enum Cmd {
    /// Offline design; writes offline_plan.csv and convergence.csv.
    PlanOffline {
        #[arg(long, value_enum, default_value = "offline")]
        kind: PlanKind,
    },
    /// Flies a plan against one wind realization; writes flight_log.csv.
    RunOnline {
        #[arg(long)]
        plan: PathBuf,
        /// City seed (defaults to the wind seed).
        #[arg(long)]
        city_seed: Option<u64>,
        /// Fly open loop instead of adapting.
        #[arg(long)]
        open_loop: bool,
    },
    /// Monte Carlo scheme comparison; writes ee_summary.csv, runs.csv,
    /// comparison.csv and manifest.toml.
    Evaluate,
    /// Writes wind_samples.csv.
    SampleWind {
        #[arg(long, default_value_t = 1)]
        scenarios: usize,
        /// Slots per scenario (defaults to the scenario's N).
        #[arg(long)]
        slots: Option<usize>,
    },
    /// Power breakdown for states `vx,vy,vz,ax,ay,az,wx,wy`; writes power_eval.csv.
    PowerEval {
        #[arg(long)]
        input: PathBuf,
    },
    /// Checks the reduced power models against the full one.
    ReduceCheck {
        #[arg(long, default_value_t = 1000)]
        states: usize,
    },
    /// Writes a generated city to city.txt.
    ExportCity,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.experiment.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load(cli)?;
    let s = cfg.scenario();
    let seed = cfg.experiment.seed;
    match &cli.cmd {
        Cmd::PlanOffline { kind } => {
            let plan = match kind {
                PlanKind::Offline => plan_offline(&s, cli.seed.unwrap_or(cfg.experiment.plan_seed))?,
                PlanKind::Windless => plan_windless(&s)?,
            };
            write_plan(out_file(&cli.out, "offline_plan.csv")?, &s, &plan)?;
            write_convergence_csv(out_file(&cli.out, "convergence.csv")?, &plan.trace)?;
            println!(
                "objective {:.6e}  R_min {:.4}  outer iterations {}  converged {}",
                plan.objective,
                plan.r_min,
                plan.trace.len() - 1,
                plan.converged
            );
        }
        Cmd::RunOnline {
            plan,
            city_seed,
            open_loop,
        } => {
            let f = File::open(plan).map_err(|e| Error::Config(format!("cannot open {}: {e}", plan.display())))?;
            let (traj, sched) = read_plan_csv(BufReader::new(f), s.k(), s.delta)?;
            let wind = sample_trace(&s.wind, traj.n(), 1, seed)?;
            let city = city_for(&cfg, &s, city_seed.unwrap_or(seed))?;
            let online = if *open_loop {
                OnlineConfig {
                    eps_q: 0.0,
                    eps_v: 0.0,
                    ..cfg.online.config()
                }
            } else {
                cfg.online.config()
            };
            let log = fly_online(&s, &traj, &sched, wind.scenario(0), &s.wind, &city, &online)?;
            log.write_csv(out_file(&cli.out, "flight_log.csv")?)?;
            println!(
                "energy {:.1} J  min user rate {:.4}  fallbacks {}",
                log.energy(),
                log.min_user_rate(s.k()),
                log.fallbacks()
            );
        }
        Cmd::Evaluate => {
            let rep = run_experiment(&cfg)?;
            let cmp = compare_schemes(&rep);
            let files = write_report(&cli.out, &rep, &cmp)?;
            println!("wrote {} files to {}", files.len(), cli.out.display());
            if !rep.complete() {
                let failed: usize = rep.summary.iter().map(|r| r.failed).sum();
                return Err(Error::SolverFailure(format!("{failed} runs failed; see runs.csv")));
            }
        }
        Cmd::SampleWind { scenarios, slots } => {
            let trace = sample_trace(&s.wind, slots.unwrap_or(s.n_slots()), *scenarios, seed)?;
            trace.write_csv(out_file(&cli.out, "wind_samples.csv")?)?;
        }
        Cmd::PowerEval { input } => {
            let f = File::open(input).map_err(|e| Error::Config(format!("cannot open {}: {e}", input.display())))?;
            let rows = power_eval_csv(BufReader::new(f), out_file(&cli.out, "power_eval.csv")?, &s.aero)?;
            println!("{rows} states evaluated");
        }
        Cmd::ReduceCheck { states } => {
            let r = reduce_check(*states, seed, &s.aero);
            println!("states {}", r.states);
            println!("windless 3d    {:.3e}", r.windless);
            println!("level flight   {:.3e}", r.zeng);
            println!("thrust ratio   {:.3e}", r.kappa);
            println!("climb split    {:.3e}", r.three_d);
            println!("max relative error {:.3e}", r.max());
        }
        Cmd::ExportCity => {
            let city = city_for(&cfg, &s, seed)?;
            city.write_text(out_file(&cli.out, "city.txt")?)?;
            println!("{} buildings", city.buildings.len());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_solver_failure() => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
