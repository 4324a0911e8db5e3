use std::collections::BTreeSet;

use cgsched::expansion::{ExpansionParams, Scheme, Strategy};
use cgsched::harness::config::{ExperimentConfig, TopologySpec};
use cgsched::harness::experiment::{metrics_csv, run_experiment, write_outputs, METRICS_HEADER};
use cgsched::harness::scenario::ScenarioSpec;
use cgsched::harness::topology::LinkParams;
use cgsched::model::StreamId;
use cgsched::plan::validate_plan;
use cgsched::{Network, TrafficPlan};

fn waxman_cfg(strategy: Strategy, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec::Waxman { n: 16, a: 0.4, b: 0.4 },
        links: LinkParams::default(),
        scenario: ScenarioSpec {
            initial_streams: 100,
            iterations: 10,
            add_per_iteration: 10,
            delete_per_iteration: 10,
            sizes: vec![125, 250, 500, 750, 1000, 1500],
            periods: vec![250, 500, 1000, 2000],
        },
        scenario_file: None,
        expansion: ExpansionParams::new(20, Scheme::Randomized, strategy, 0),
        candidate_routes: 2,
        seed,
        output_dir: None,
    }
}

#[test]
fn reduced_dynamic_experiment_has_eleven_rows() {
    let r = run_experiment(&waxman_cfg(Strategy::TrafficVolume, 3)).unwrap();
    assert_eq!(r.metrics.len(), 11);
    let csv = metrics_csv(&r.metrics).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert_eq!(csv.lines().next().unwrap(), METRICS_HEADER.join(","));
}

#[test]
fn metrics_accounting() {
    for strategy in Strategy::ALL {
        let cfg = waxman_cfg(strategy, 5);
        let r = run_experiment(&cfg).unwrap();
        let mut live = 0usize;
        for (i, m) in r.metrics.iter().enumerate() {
            let added = if i == 0 { cfg.scenario.initial_streams } else { cfg.scenario.add_per_iteration };
            live = live - r.deleted_history[i].len() + added;
            assert!(m.vertices as u64 <= cfg.expansion.cps * live as u64, "{strategy} row {i}");
            assert!(m.total_ms + 1e-9 >= m.expansion_ms + m.solving_ms);
            live -= m.rejected;
            assert_eq!(r.admitted_history[i].len(), live);
            assert_eq!(m.rejected, r.rejected_history[i].len());
        }
    }
}

#[test]
fn admitted_set_algebra() {
    let r = run_experiment(&waxman_cfg(Strategy::PageRank, 9)).unwrap();
    for i in 1..r.metrics.len() {
        let prev = &r.admitted_history[i - 1];
        let now = &r.admitted_history[i];
        let deleted: BTreeSet<StreamId> = r.deleted_history[i].iter().copied().collect();
        assert!(deleted.is_subset(prev));
        assert!(now.is_disjoint(&deleted));
        assert!(prev.difference(&deleted).all(|s| now.contains(s)));
        assert!(r.rejected_history[i].iter().all(|s| !now.contains(s)));
    }
}

#[test]
fn outputs_round_trip() {
    let r = run_experiment(&waxman_cfg(Strategy::AvgDegree, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&r, dir.path()).unwrap();
    let net: Network =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("topology.json")).unwrap()).unwrap();
    let plan: TrafficPlan =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan, r.plan);
    assert!(validate_plan(&net, &plan).is_ok());
}

#[test]
fn topology_file_is_accepted() {
    let first = run_experiment(&waxman_cfg(Strategy::Homogeneous, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("topology.json");
    std::fs::write(&path, serde_json::to_string(&first.network).unwrap()).unwrap();
    let mut cfg = waxman_cfg(Strategy::Homogeneous, 2);
    cfg.topology = TopologySpec::File { path };
    let second = run_experiment(&cfg).unwrap();
    assert_eq!(second.plan, first.plan);
}
