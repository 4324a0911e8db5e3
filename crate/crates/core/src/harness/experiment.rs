//! Experiment driver: topology, scenario, iterations, validation and output
//! files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, TopologySpec};
use crate::harness::scenario::{derive, gen_scenario, resolve_deletions, Scenario};
use crate::harness::topology::{gen_grid, gen_random, gen_ring, gen_waxman};
use crate::model::{Network, StreamBatch, StreamId};
use crate::plan::{validate_plan, TrafficPlan};
use crate::planner::{IterationMetrics, Planner};

pub const METRICS_HEADER: [&str; 10] = [
    "iteration",
    "strategy",
    "scheme",
    "cps",
    "rejected",
    "expansion_ms",
    "solving_ms",
    "total_ms",
    "vertices",
    "edges",
];

// Salts for the sub-seeds derived from the experiment seed.
const TOPOLOGY_SALT: u64 = 1;
const SCENARIO_SALT: u64 = 2;
const DELETION_SALT: u64 = 3;
const EXPANSION_SALT: u64 = 4;

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub metrics: Vec<IterationMetrics>,
    pub plan: TrafficPlan,
    pub network: Network,
    /// Admitted streams after each iteration.
    pub admitted_history: Vec<BTreeSet<StreamId>>,
    /// Streams deleted at the start of each iteration.
    pub deleted_history: Vec<Vec<StreamId>>,
    pub rejected_history: Vec<Vec<StreamId>>,
}

pub fn build_network(cfg: &ExperimentConfig) -> Result<Network> {
    let seed = derive(cfg.seed, TOPOLOGY_SALT);
    let net = match &cfg.topology {
        &TopologySpec::Random { n, p } => gen_random(n, p, seed, &cfg.links)?,
        &TopologySpec::Waxman { n, a, b } => gen_waxman(n, a, b, seed, &cfg.links)?,
        &TopologySpec::Ring { n } => gen_ring(n, &cfg.links)?,
        &TopologySpec::Grid { rows, cols } => gen_grid(rows, cols, &cfg.links)?,
        TopologySpec::File { path } => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
    };
    net.validate().map_err(|v| {
        let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
        Error::Config(format!("invalid topology: {}", msgs.join("; ")))
    })?;
    Ok(net)
}

pub fn build_scenario(cfg: &ExperimentConfig, net: &Network) -> Result<Scenario> {
    match &cfg.scenario_file {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        None => gen_scenario(net, &cfg.scenario, derive(cfg.seed, SCENARIO_SALT)),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, |_| {})
}

/// Like [`run_experiment`], calling `hook` after every iteration and before
/// the plan is validated.
pub fn run_experiment_with(cfg: &ExperimentConfig, mut hook: impl FnMut(&mut Planner)) -> Result<ExperimentResult> {
    cfg.validate()?;
    let net = build_network(cfg)?;
    let scenario = build_scenario(cfg, &net)?;
    let mut params = cfg.expansion;
    params.seed = derive(cfg.seed, EXPANSION_SALT);
    let mut planner = Planner::new(net.clone(), params)?.with_candidate_routes(cfg.candidate_routes);

    let deletion_seed = derive(cfg.seed, DELETION_SALT);
    let mut metrics = Vec::with_capacity(scenario.steps.len());
    let mut admitted_history = Vec::with_capacity(scenario.steps.len());
    let mut deleted_history = Vec::with_capacity(scenario.steps.len());
    for step in &scenario.steps {
        let admitted: Vec<StreamId> = planner.state().admitted.keys().copied().collect();
        let delete = resolve_deletions(step, &admitted, deletion_seed);
        let batch = StreamBatch { iteration: step.iteration, add: step.add.clone(), delete };
        metrics.push(planner.iterate(&batch)?);
        hook(&mut planner);
        validate_plan(&net, &planner.plan())
            .map_err(|v| Error::PlanValidation(v.iter().map(ToString::to_string).collect()))?;
        admitted_history.push(planner.state().admitted.keys().copied().collect());
        deleted_history.push(batch.delete);
    }

    Ok(ExperimentResult {
        metrics,
        plan: planner.plan(),
        network: net,
        admitted_history,
        deleted_history,
        rejected_history: planner.state().rejected_history.clone(),
    })
}

pub fn metrics_csv(metrics: &[IterationMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.iteration.to_string(),
            m.strategy.clone(),
            m.scheme.clone(),
            m.cps.to_string(),
            m.rejected.to_string(),
            format!("{:.3}", m.expansion_ms),
            format!("{:.3}", m.solving_ms),
            format!("{:.3}", m.total_ms),
            m.vertices.to_string(),
            m.edges.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `metrics.csv`, `plan.json` and `topology.json` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(&result.metrics)?)?;
    fs::write(dir.join("plan.json"), serde_json::to_string_pretty(&result.plan)?)?;
    fs::write(dir.join("topology.json"), serde_json::to_string_pretty(&result.network)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{ExpansionParams, Scheme, Strategy};
    use crate::harness::scenario::ScenarioSpec;
    use crate::harness::topology::LinkParams;

    fn cfg(iterations: usize) -> ExperimentConfig {
        ExperimentConfig {
            topology: TopologySpec::Ring { n: 6 },
            links: LinkParams::default(),
            scenario: ScenarioSpec {
                initial_streams: 20,
                iterations,
                add_per_iteration: 4,
                delete_per_iteration: 3,
                sizes: vec![125, 500, 1500],
                periods: vec![250, 500, 1000],
            },
            scenario_file: None,
            expansion: ExpansionParams::new(10, Scheme::Randomized, Strategy::PageRank, 0),
            candidate_routes: 2,
            seed: 11,
            output_dir: None,
        }
    }

    #[test]
    fn one_row_per_step() {
        let r = run_experiment(&cfg(3)).unwrap();
        assert_eq!(r.metrics.len(), 4);
        let csv = metrics_csv(&r.metrics).unwrap();
        assert_eq!(csv.lines().next().unwrap(), METRICS_HEADER.join(","));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(run_experiment(&cfg(0)).unwrap().metrics.len(), 1);
    }

    #[test]
    fn injected_overlap_aborts() {
        let err = run_experiment_with(&cfg(1), |p| {
            let (&id, a) = p.state().admitted.iter().next().unwrap();
            let mut c = a.config;
            c.phase = a.stream.period - 1;
            p.force_config(id, c);
        });
        assert!(matches!(err, Err(Error::PlanValidation(_))), "{err:?}");
    }
}
