use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use netindep::config::{build_topology, ExperimentConfig, TopologySpec};
use netindep::error::Result;
use netindep::experiments::{self, MedianScalingParams, RidgeExperiment, RidgeInstance};
use netindep::output::OutputDir;
use netindep_core::mixing::{self, MixingMatrix};

#[derive(Debug, Parser)]
#[command(
    name = "netindep",
    version,
    about = "Distributed stochastic optimization experiments"
)]
struct Cli {
    /// Worker threads for replications (results never depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InstanceArg {
    Random,
    Grid,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print lambda for the standard topology families as CSV.
    Spectrum {
        /// Network sizes.
        #[arg(long, value_delimiter = ',', default_value = "5,10,49,50")]
        n: Vec<usize>,
        /// Seed for the random families.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the topology of a run configuration instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stopping time of the distributed subgradient method on rings.
    MedianScaling {
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/median_scaling")]
        out: PathBuf,
    },
    /// DSGD versus SGD on online ridge regression.
    Ridge {
        #[arg(long, value_enum, default_value = "both")]
        instance: InstanceArg,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/ridge")]
        out: PathBuf,
    },
    /// Run a configuration file (or a previous run's manifest).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and its mixing matrix without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let pool = experiments::thread_pool(cli.threads)?;
    match cli.command {
        Command::Spectrum {
            n,
            seed,
            config,
            out,
        } => {
            let topologies = match config {
                Some(path) => vec![ExperimentConfig::load(&path)?.topology],
                None => experiments::spectrum_topologies(&n, seed),
            };
            let csv = experiments::spectrum_csv(&experiments::spectrum(&topologies)?);
            match out {
                Some(dir) => {
                    let path = OutputDir::create(dir)?.write("spectrum.csv", &csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
        Command::MedianScaling {
            n,
            epsilon,
            horizon,
            seed,
            out,
        } => {
            let params = MedianScalingParams {
                sizes: n,
                epsilon,
                horizon,
                seed,
            };
            let rows = experiments::median_scaling(&params, &pool)?;
            let path =
                experiments::write_median_scaling(&params, &rows, &mut OutputDir::create(out)?)?;
            print!("{}", experiments::median_scaling_csv(&rows));
            println!("wrote {}", path.display());
        }
        Command::Ridge {
            instance,
            reps,
            horizon,
            seed,
            out,
        } => {
            let instances = match instance {
                InstanceArg::Random => vec![RidgeInstance::RANDOM],
                InstanceArg::Grid => vec![RidgeInstance::GRID],
                InstanceArg::Both => vec![RidgeInstance::RANDOM, RidgeInstance::GRID],
            };
            let exp = RidgeExperiment {
                instances,
                reps,
                horizon,
                seed,
                ..Default::default()
            };
            let outcomes = experiments::ridge(&exp, &pool)?;
            let mut dir = OutputDir::create(out)?;
            experiments::write_ridge(&exp, &outcomes, &mut dir)?;
            print!("{}", experiments::ridge_summary_csv(&outcomes));
            println!("wrote {}", dir.root().display());
        }
        Command::Run {
            config,
            seed,
            reps,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = reps {
                cfg.replications = r;
            }
            if let Some(o) = out {
                cfg.output = Some(o);
            }
            let dir = cfg
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from("out/run"));
            let outcome = experiments::run_custom(&cfg, &pool)?;
            let mut dir = OutputDir::create(dir)?;
            experiments::write_run(&cfg, &outcome, &mut dir)?;
            println!(
                "{} replications, lambda = {}, wrote {}",
                outcome.traces.len(),
                outcome.lambda,
                dir.root().display()
            );
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let topo = build_topology(&cfg.topology)?;
            let w = MixingMatrix::<f64>::with_rule(&topo.graph, cfg.mixing.into())?;
            let report = mixing::validate(w.matrix(), Some(&topo.graph));
            let seed = match (&cfg.topology, topo.seed) {
                (TopologySpec::ErdosRenyi { .. }, Some(s)) => format!(" (seed {s})"),
                _ => String::new(),
            };
            println!(
                "topology {}{seed}: n = {}, edges = {}, connected",
                cfg.topology.name(),
                topo.graph.n(),
                topo.graph.edge_count()
            );
            println!("mixing {}: lambda = {}", w.rule(), w.lambda());
            println!("{report}");
        }
    }
    Ok(())
}
