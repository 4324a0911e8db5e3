use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgsched::harness::config::ExperimentConfig;
use cgsched::harness::experiment::{build_network, build_scenario, run_experiment, write_outputs};
use cgsched::{validate_plan, Error, Network, Scheme, Strategy, TrafficPlan};

#[derive(Parser)]
#[command(name = "cgsched", version, about = "Conflict-graph based time-triggered traffic planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write topology.json for the configured topology.
    GenTopology(Common),
    /// Write topology.json and scenario.json for the configured scenario.
    GenScenario(Common),
    /// Run an experiment and write metrics.csv, plan.json and topology.json.
    Run(Common),
    /// Check a plan file against a topology file.
    Validate { topology: PathBuf, plan: PathBuf },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    cps: Option<u64>,
    #[arg(long)]
    alpha: Option<u64>,
}

impl Common {
    fn load(&self) -> cgsched::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.strategy {
            cfg.expansion.strategy = s;
        }
        if let Some(s) = self.scheme {
            cfg.expansion.scheme = s;
        }
        if let Some(c) = self.cps {
            cfg.expansion.cps = c;
            if self.alpha.is_none() {
                cfg.expansion.alpha = cfg.expansion.alpha.min(c);
            }
        }
        if let Some(a) = self.alpha {
            cfg.expansion.alpha = a;
        }
        cfg.validate()?;
        let out = self.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, out))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> cgsched::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> cgsched::Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(cmd: Command) -> cgsched::Result<()> {
    match cmd {
        Command::GenTopology(c) => {
            let (cfg, out) = c.load()?;
            write_json(&out.join("topology.json"), &build_network(&cfg)?)
        }
        Command::GenScenario(c) => {
            let (cfg, out) = c.load()?;
            let net = build_network(&cfg)?;
            write_json(&out.join("topology.json"), &net)?;
            write_json(&out.join("scenario.json"), &build_scenario(&cfg, &net)?)
        }
        Command::Run(c) => {
            let (cfg, out) = c.load()?;
            let result = run_experiment(&cfg)?;
            write_outputs(&result, &out)?;
            let rejected: usize = result.metrics.iter().map(|m| m.rejected).sum();
            eprintln!(
                "{} iterations, {} streams admitted, {} rejected; outputs in {}",
                result.metrics.len(),
                result.plan.streams.len(),
                rejected,
                out.display()
            );
            Ok(())
        }
        Command::Validate { topology, plan } => {
            let net: Network = read_json(&topology)?;
            let plan: TrafficPlan = read_json(&plan)?;
            validate_plan(&net, &plan)
                .map_err(|v| Error::PlanValidation(v.iter().map(ToString::to_string).collect()))?;
            eprintln!("plan valid: {} streams", plan.streams.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::PlanValidation(v) = &e {
                for line in v {
                    eprintln!("  {line}");
                }
            }
            ExitCode::from(match e {
                Error::Config(_) | Error::Unconnectable(_) => 2,
                Error::PlanValidation(_) => 3,
                _ => 1,
            })
        }
    }
}
