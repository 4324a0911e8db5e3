//! Iteration driver: deletions, expansion, planning and bookkeeping for one
//! dynamic update.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{expand, global_budget, ExpansionParams, ExpansionReport, NewStream};
use crate::graph::{Configuration, ConflictGraph, VertexId};
use crate::model::{Network, Stream, StreamBatch, StreamId};
use crate::plan::{PlannedStream, TrafficPlan};
use crate::routing::{candidate_routes, Route, DEFAULT_CANDIDATE_ROUTES};
use crate::solver::{choose_plan, defensive_plan, offensive_plan, PlanChoice, Solution};

/// An admitted stream with its frozen candidate routes and current
/// configuration.
#[derive(Clone, Debug)]
pub struct AdmittedStream {
    pub stream: Stream,
    pub routes: Vec<Route>,
    pub config: Configuration,
}

#[derive(Clone, Debug, Default)]
pub struct IterationState {
    pub iteration: usize,
    pub admitted: BTreeMap<StreamId, AdmittedStream>,
    /// Rejected streams, one entry per processed iteration.
    pub rejected_history: Vec<Vec<StreamId>>,
}

impl IterationState {
    pub fn plan(&self) -> TrafficPlan {
        TrafficPlan {
            iteration: self.iteration,
            streams: self
                .admitted
                .values()
                .map(|a| PlannedStream {
                    stream: a.stream.clone(),
                    route_index: a.config.route,
                    route: a.routes[a.config.route].nodes.clone(),
                    phase: a.config.phase,
                })
                .collect(),
        }
    }
}

/// One row of experiment output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub strategy: String,
    pub scheme: String,
    pub cps: u64,
    pub rejected: usize,
    pub expansion_ms: f64,
    pub solving_ms: f64,
    pub total_ms: f64,
    pub vertices: usize,
    pub edges: usize,
    #[serde(skip)]
    pub added: usize,
    #[serde(skip)]
    pub deleted: usize,
    #[serde(skip)]
    pub admitted: usize,
    #[serde(skip)]
    pub vertex_budget: u64,
    #[serde(skip)]
    pub offensive_chosen: bool,
}

/// Owns the conflict graph and iteration state of one experiment.
#[derive(Clone, Debug)]
pub struct Planner {
    net: Network,
    params: ExpansionParams,
    candidate_routes: usize,
    graph: ConflictGraph,
    state: IterationState,
    last_expansion: Option<ExpansionReport>,
}

impl Planner {
    pub fn new(net: Network, params: ExpansionParams) -> Result<Self> {
        params.validate()?;
        Ok(Planner {
            net,
            params,
            candidate_routes: DEFAULT_CANDIDATE_ROUTES,
            graph: ConflictGraph::new(),
            state: IterationState::default(),
            last_expansion: None,
        })
    }

    pub fn with_candidate_routes(mut self, k: usize) -> Self {
        self.candidate_routes = k.max(1);
        self
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn graph(&self) -> &ConflictGraph {
        &self.graph
    }

    pub fn state(&self) -> &IterationState {
        &self.state
    }

    pub fn params(&self) -> &ExpansionParams {
        &self.params
    }

    pub fn last_expansion(&self) -> Option<&ExpansionReport> {
        self.last_expansion.as_ref()
    }

    pub fn plan(&self) -> TrafficPlan {
        self.state.plan()
    }

    fn check_batch(&self, batch: &StreamBatch) -> Result<()> {
        let mut fresh = HashSet::new();
        for s in &batch.add {
            s.check_in(&self.net)?;
            if self.state.admitted.contains_key(&s.id) || !fresh.insert(s.id) {
                return Err(Error::InvalidBatch(format!("stream {} is not fresh", s.id)));
            }
        }
        let mut dels = HashSet::new();
        for id in &batch.delete {
            if !self.state.admitted.contains_key(id) || !dels.insert(*id) {
                return Err(Error::InvalidBatch(format!("stream {id} is not admitted")));
            }
        }
        Ok(())
    }

    /// Applies one batch: deletions, expansion for the new streams,
    /// defensive and offensive planning, and cleanup of rejected streams.
    pub fn iterate(&mut self, batch: &StreamBatch) -> Result<IterationMetrics> {
        let started = Instant::now();
        self.check_batch(batch)?;

        self.graph.remove_streams(&batch.delete);
        for id in &batch.delete {
            self.state.admitted.remove(id);
        }

        let new_streams: Vec<NewStream> = batch
            .add
            .iter()
            .map(|s| {
                let routes = candidate_routes(&self.net, s, self.candidate_routes).unwrap_or_default();
                NewStream::new(&self.net, s.clone(), routes)
            })
            .collect();

        let live = self.state.admitted.len() + new_streams.len();
        let vbar = global_budget(self.params.cps, live);
        let min_period =
            self.state.admitted.values().map(|a| &a.stream).chain(&batch.add).map(|s| s.period).min().unwrap_or(1);

        let expansion_started = Instant::now();
        let report = expand(&mut self.graph, &self.net, &new_streams, &self.params, vbar, min_period)?;
        let expansion_ms = ms(expansion_started);
        // Size of the graph the solver works on, before rejected streams are purged.
        let (vertices, edges) = (self.graph.vertex_count(), self.graph.edge_count());

        let solving_started = Instant::now();
        let old: Vec<StreamId> = self.state.admitted.keys().copied().collect();
        let new: Vec<StreamId> = batch.add.iter().map(|s| s.id).collect();
        let pinned: Vec<(StreamId, VertexId)> = self
            .state
            .admitted
            .values()
            .map(|a| {
                let v = self.graph.find(&a.config).expect("admitted configurations stay in the graph");
                (a.stream.id, v)
            })
            .collect();
        let (defensive, offensive) =
            rayon::join(|| defensive_plan(&self.graph, &pinned, &new), || offensive_plan(&self.graph, &old, &new));
        let defensive = defensive?;
        let choice = choose_plan(&defensive, offensive.as_ref());
        let solution: Solution = match choice {
            PlanChoice::Defensive => defensive,
            PlanChoice::Offensive => offensive.expect("chosen plan exists"),
        };
        let solving_ms = ms(solving_started);

        self.graph.remove_streams(&solution.rejected);
        let rejected: BTreeSet<StreamId> = solution.rejected.iter().copied().collect();
        for ns in new_streams {
            if rejected.contains(&ns.stream.id) {
                continue;
            }
            let v = solution.selected[&ns.stream.id];
            self.state.admitted.insert(
                ns.stream.id,
                AdmittedStream {
                    stream: ns.stream,
                    routes: ns.routes,
                    config: self.graph.vertex(v).expect("selected vertex").config,
                },
            );
        }
        if choice == PlanChoice::Offensive {
            for id in &old {
                let v = solution.selected[id];
                let config = self.graph.vertex(v).expect("selected vertex").config;
                self.state.admitted.get_mut(id).expect("old stream").config = config;
            }
        }
        self.state.iteration = batch.iteration;
        self.state.rejected_history.push(solution.rejected.clone());
        self.last_expansion = Some(report);

        Ok(IterationMetrics {
            iteration: batch.iteration,
            strategy: self.params.strategy.to_string(),
            scheme: self.params.scheme.to_string(),
            cps: self.params.cps,
            rejected: solution.rejected.len(),
            expansion_ms,
            solving_ms,
            total_ms: ms(started),
            vertices,
            edges,
            added: batch.add.len(),
            deleted: batch.delete.len(),
            admitted: self.state.admitted.len(),
            vertex_budget: vbar,
            offensive_chosen: choice == PlanChoice::Offensive,
        })
    }

    /// Test hook: overwrite an admitted stream's configuration.
    #[doc(hidden)]
    pub fn force_config(&mut self, id: StreamId, config: Configuration) {
        if let Some(a) = self.state.admitted.get_mut(&id) {
            a.config = config;
        }
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}
