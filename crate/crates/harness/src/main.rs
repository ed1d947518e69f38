use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gsc_core::environment::ScenarioConfig;
use gsc_core::traffic::{generate_trace, write_trace, ArrivalProcess, TrafficConfig};
use gsc_harness::report::{append_records, write_curve};
use gsc_harness::{
    evaluate_or_record, new_agent, run_sweep, train, AgentKind, EvalProtocol, ExperimentSpec, GreedyPolicy,
    RandomPolicy, TrainConfig,
};
use gsc_nn::agent::{DdpgAgent, Hyperparams};

#[derive(Parser)]
#[command(name = "gsc", about = "Train and evaluate service coordination agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoder {
    Gsc,
    Flat,
}

#[derive(Clone, Copy, ValueEnum)]
enum Process {
    Fixed,
    Poisson,
    Mmpp,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write its checkpoint directory.
    Train {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        episodes: usize,
        #[arg(long, default_value_t = 64)]
        eta: usize,
        #[arg(long, default_value_t = 200)]
        warmup: usize,
        #[arg(long, value_enum, default_value_t = Encoder::Gsc)]
        encoder: Encoder,
        #[arg(long)]
        out: PathBuf,
        /// Reward curve file (default: `<out>/curve.txt`).
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate a checkpoint, or the random baseline when none is given.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Experiment spec; its evaluation scenario and protocol are used.
        #[arg(long, conflicts_with = "scenario")]
        spec: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        windows: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every cell of an experiment spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference checks of every differentiable layer.
    Gradcheck,
    /// Write an arrival trace sampled from an analytic process.
    GenTrace {
        #[arg(long, value_enum)]
        process: Process,
        /// Mean inter-arrival time (fixed interval for `fixed`).
        #[arg(long, default_value_t = 10.0)]
        interval: f64,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        ingress: Vec<usize>,
        #[arg(long, default_value_t = 20000.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            scenario,
            seed,
            episodes,
            eta,
            warmup,
            encoder,
            out,
            curve,
        } => {
            let sc = ScenarioConfig::load(&scenario)?;
            let kind = match encoder {
                Encoder::Gsc => AgentKind::Gsc,
                Encoder::Flat => AgentKind::Flat,
            };
            let mut agent = new_agent(kind, &sc, Hyperparams::default(), seed);
            let cfg = TrainConfig {
                episodes,
                warmup,
                eta,
                seed,
            };
            let report = train(&mut agent, &sc, &cfg, |e, r| eprintln!("episode {e} mean reward {r:.4}"))?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            agent.save(&out)?;
            write_curve(curve.unwrap_or_else(|| out.join("curve.txt")), &report.curve)?;
            println!(
                "env_steps {} episodes_after_warmup {} gradient_steps {} target_updates {}",
                report.env_steps, report.episodes_after_warmup, report.gradient_steps, report.target_updates
            );
        }
        Command::Eval {
            checkpoint,
            spec,
            scenario,
            repetitions,
            windows,
            seed,
            out,
        } => {
            let (sc, mut protocol) = match (spec, scenario) {
                (Some(spec), _) => {
                    let (spec, base) = ExperimentSpec::load(&spec)?;
                    let path = spec.eval_scenario.as_ref().unwrap_or(&spec.train_scenario);
                    (ScenarioConfig::load(base.join(path))?, spec.eval)
                }
                (None, Some(path)) => (ScenarioConfig::load(path)?, EvalProtocol::default()),
                (None, None) => bail!("either --spec or --scenario is required"),
            };
            protocol.repetitions = repetitions.unwrap_or(protocol.repetitions);
            protocol.windows = windows.unwrap_or(protocol.windows);
            protocol.seed = seed.unwrap_or(protocol.seed);
            let record = match checkpoint {
                Some(dir) => {
                    let agent = DdpgAgent::load(&dir)?;
                    let name = match agent.encoder_kind() {
                        gsc_nn::agent::EncoderKind::Graph => AgentKind::Gsc.name(),
                        gsc_nn::agent::EncoderKind::Flat { .. } => AgentKind::Flat.name(),
                    };
                    evaluate_or_record(&mut GreedyPolicy::new(name, &agent), &sc, &protocol)?
                }
                None => evaluate_or_record(&mut RandomPolicy::for_scenario(&sc), &sc, &protocol)?,
            };
            println!("{}", serde_json::to_string(&record)?);
            append_records(&out, &[record])?;
        }
        Command::Sweep { spec, out } => {
            let (spec, base) = ExperimentSpec::load(&spec)?;
            let records = run_sweep(&spec, &base, |line| eprintln!("{line}"))?;
            for r in &records {
                println!("{}", serde_json::to_string(r)?);
            }
            append_records(&out, &records)?;
        }
        Command::Gradcheck => {
            let mut failed = false;
            for (name, report) in gsc_nn::gradcheck::suite() {
                let ok = report.passes(1e-4);
                failed |= !ok;
                println!(
                    "{} {name}: {} coordinates, max relative error {:.3e}, {} kinks skipped",
                    if ok { "PASS" } else { "FAIL" },
                    report.checked,
                    report.max_rel_error,
                    report.kinks
                );
            }
            if failed {
                bail!("gradient check failed");
            }
        }
        Command::GenTrace {
            process,
            interval,
            ingress,
            horizon,
            seed,
            out,
        } => {
            let process = match process {
                Process::Fixed => ArrivalProcess::Fixed { interval },
                Process::Poisson => ArrivalProcess::Poisson { mean_interval: interval },
                Process::Mmpp => ArrivalProcess::mmpp_default(),
            };
            let records = generate_trace(&TrafficConfig::new(process), &ingress, horizon, seed)?;
            write_trace(&out, &records)?;
            println!("{} arrivals written to {}", records.len(), out.display());
        }
    }
    Ok(())
}
