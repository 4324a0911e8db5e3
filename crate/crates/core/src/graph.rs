//! Vertex-colored conflict graph over (stream, route, phase) configurations.
//!
//! Vertices are configurations, colors are streams, and an edge joins two
//! configurations of different streams whose frames collide on some link.
//! Same-stream pairs never get an edge: a colorful set already picks at most
//! one vertex per color.
//!
//! Insertion only has to examine configurations that share a link, so every
//! link keeps an index of the occupancy intervals placed on it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StreamId;
use crate::timing::{frames_conflict, OccupancySchedule};

pub type VertexId = u32;

/// Identity of a configuration: route index into the stream's candidate list
/// and phase of the first transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub stream: StreamId,
    pub route: usize,
    pub phase: u64,
}

/// A configuration together with its precomputed occupancy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub config: Configuration,
    pub period: u64,
    pub schedule: OccupancySchedule,
}

impl Vertex {
    pub fn conflicts_with(&self, other: &Vertex) -> bool {
        self.config.stream != other.config.stream
            && frames_conflict(&self.schedule, self.period, &other.schedule, other.period)
    }
}

#[derive(Clone, Copy, Debug)]
struct LinkEntry {
    vertex: VertexId,
    color: StreamId,
    start: u64,
    end: u64,
    period: u64,
}

#[derive(Clone, Debug, Default)]
pub struct ConflictGraph {
    slots: Vec<Option<Vertex>>,
    adjacency: Vec<Vec<VertexId>>,
    free: BinaryHeap<Reverse<VertexId>>,
    by_color: BTreeMap<StreamId, Vec<VertexId>>,
    by_config: HashMap<Configuration, VertexId>,
    link_index: Vec<Vec<LinkEntry>>,
    vertex_count: usize,
    edge_count: usize,
}

impl ConflictGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_count == 0
    }

    pub fn vertex(&self, v: VertexId) -> Option<&Vertex> {
        self.slots.get(v as usize).and_then(Option::as_ref)
    }

    /// Stream (color) of a vertex.
    pub fn color(&self, v: VertexId) -> Option<StreamId> {
        self.vertex(v).map(|x| x.config.stream)
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        self.adjacency.get(v as usize).map_or(&[], Vec::as_slice)
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors(v).len()
    }

    /// Upper bound (exclusive) on vertex ids currently in use.
    pub fn id_bound(&self) -> usize {
        self.slots.len()
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| i as VertexId)
    }

    pub fn colors(&self) -> impl Iterator<Item = StreamId> + '_ {
        self.by_color.keys().copied()
    }

    pub fn vertices_of(&self, stream: StreamId) -> &[VertexId] {
        self.by_color.get(&stream).map_or(&[], Vec::as_slice)
    }

    pub fn find(&self, config: &Configuration) -> Option<VertexId> {
        self.by_config.get(config).copied()
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.by_config.contains_key(config)
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.neighbors(u).contains(&v)
    }

    /// Inserts one configuration and connects it to every conflicting vertex
    /// of another color.
    pub fn add_configuration(&mut self, vertex: Vertex) -> Result<VertexId> {
        Ok(self.add_configurations(vec![vertex])?[0])
    }

    /// Inserts a batch of configurations. Conflict checks run in parallel;
    /// the resulting graph does not depend on the degree of parallelism.
    ///
    /// Fails without modifying the graph if any configuration is already
    /// present or repeated within the batch.
    pub fn add_configurations(&mut self, vertices: Vec<Vertex>) -> Result<Vec<VertexId>> {
        let mut fresh = HashSet::with_capacity(vertices.len());
        for v in &vertices {
            if self.by_config.contains_key(&v.config) || !fresh.insert(v.config) {
                return Err(Error::DuplicateConfiguration {
                    stream: v.config.stream,
                    route: v.config.route,
                    phase: v.config.phase,
                });
            }
        }

        let old_bound = self.slots.len();
        let mut ids = Vec::with_capacity(vertices.len());
        for vertex in vertices {
            let id = match self.free.pop() {
                Some(Reverse(id)) => id,
                None => {
                    self.slots.push(None);
                    self.adjacency.push(Vec::new());
                    (self.slots.len() - 1) as VertexId
                }
            };
            for hop in &vertex.schedule.hops {
                let l = hop.link.index();
                if self.link_index.len() <= l {
                    self.link_index.resize_with(l + 1, Vec::new);
                }
                self.link_index[l].push(LinkEntry {
                    vertex: id,
                    color: vertex.config.stream,
                    start: hop.start,
                    end: hop.end,
                    period: vertex.period,
                });
            }
            self.by_color.entry(vertex.config.stream).or_default().push(id);
            self.by_config.insert(vertex.config, id);
            self.slots[id as usize] = Some(vertex);
            ids.push(id);
        }
        self.vertex_count += ids.len();

        let is_new = {
            let mut mark = vec![false; self.slots.len()];
            for &id in &ids {
                mark[id as usize] = true;
            }
            mark
        };
        debug_assert!(self.slots.len() >= old_bound);

        let found: Vec<Vec<VertexId>> = ids.par_iter().map(|&id| self.scan_conflicts(id)).collect();

        for (&id, neighbors) in ids.iter().zip(found) {
            for &u in &neighbors {
                if is_new[u as usize] {
                    // Counted from both sides; the other side adds its half.
                    if u < id {
                        self.edge_count += 1;
                    }
                } else {
                    self.adjacency[u as usize].push(id);
                    self.edge_count += 1;
                }
            }
            self.adjacency[id as usize] = neighbors;
        }
        Ok(ids)
    }

    fn scan_conflicts(&self, id: VertexId) -> Vec<VertexId> {
        let vertex = self.slots[id as usize].as_ref().expect("vertex present");
        let color = vertex.config.stream;
        let mut out = Vec::new();
        for hop in &vertex.schedule.hops {
            for e in &self.link_index[hop.link.index()] {
                if e.color != color
                    && crate::timing::intervals_conflict(hop.start, hop.end, vertex.period, e.start, e.end, e.period)
                {
                    out.push(e.vertex);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Removes every vertex of `stream`; returns how many were removed.
    pub fn remove_stream(&mut self, stream: StreamId) -> usize {
        self.remove_streams(&[stream])
    }

    pub fn remove_streams(&mut self, streams: &[StreamId]) -> usize {
        let removed: Vec<VertexId> = streams.iter().filter_map(|s| self.by_color.remove(s)).flatten().collect();
        if removed.is_empty() {
            return 0;
        }
        let mut gone = vec![false; self.slots.len()];
        for &v in &removed {
            gone[v as usize] = true;
        }

        let mut touched_vertices = BTreeSet::new();
        let mut touched_links = BTreeSet::new();
        let mut internal_half_edges = 0;
        for &v in &removed {
            for &u in &self.adjacency[v as usize] {
                if gone[u as usize] {
                    internal_half_edges += 1;
                } else {
                    touched_vertices.insert(u);
                    self.edge_count -= 1;
                }
            }
            self.adjacency[v as usize] = Vec::new();
            let vertex = self.slots[v as usize].take().expect("vertex present");
            for hop in &vertex.schedule.hops {
                touched_links.insert(hop.link.index());
            }
            self.by_config.remove(&vertex.config);
            self.free.push(Reverse(v));
        }
        self.edge_count -= internal_half_edges / 2;
        for u in touched_vertices {
            self.adjacency[u as usize].retain(|w| !gone[*w as usize]);
        }
        for l in touched_links {
            self.link_index[l].retain(|e| !gone[e.vertex as usize]);
        }
        self.vertex_count -= removed.len();
        removed.len()
    }

    /// Mean degree of the stream's vertices.
    pub fn avg_degree(&self, stream: StreamId) -> Result<Ratio<u64>> {
        let vs = self.vertices_of(stream);
        if vs.is_empty() {
            return Err(Error::NoVertices(stream));
        }
        let total: u64 = vs.iter().map(|&v| self.degree(v) as u64).sum();
        Ok(Ratio::new(total, vs.len() as u64))
    }

    /// Power iteration treating every edge as two arcs. Starts uniform,
    /// spreads the mass of isolated vertices uniformly, and renormalizes
    /// after each step.
    pub fn page_rank(&self, iterations: usize, damping: f64) -> PageRank {
        let n = self.vertex_count;
        let mut scores = vec![0.0; self.slots.len()];
        if n == 0 {
            return PageRank { scores };
        }
        let ids: Vec<VertexId> = self.vertex_ids().collect();
        let uniform = 1.0 / n as f64;
        for &v in &ids {
            scores[v as usize] = uniform;
        }
        let mut next = vec![0.0; self.slots.len()];
        for _ in 0..iterations {
            let dangling: f64 = ids.iter().filter(|&&v| self.degree(v) == 0).map(|&v| scores[v as usize]).sum();
            let base = (1.0 - damping) * uniform + damping * dangling * uniform;
            next.par_iter_mut().enumerate().for_each(|(v, slot)| {
                if self.slots[v].is_none() {
                    return;
                }
                let inflow: f64 = self.adjacency[v]
                    .iter()
                    .map(|&u| scores[u as usize] / self.adjacency[u as usize].len() as f64)
                    .sum();
                *slot = base + damping * inflow;
            });
            let total: f64 = ids.iter().map(|&v| next[v as usize]).sum();
            for &v in &ids {
                next[v as usize] /= total;
            }
            std::mem::swap(&mut scores, &mut next);
        }
        PageRank { scores }
    }

    /// Sum of the page ranks of the stream's vertices.
    pub fn stream_rank(&self, pr: &PageRank, stream: StreamId) -> Result<f64> {
        let vs = self.vertices_of(stream);
        if vs.is_empty() {
            return Err(Error::NoVertices(stream));
        }
        Ok(vs.iter().map(|&v| pr.get(v)).sum())
    }

    /// Normalized edge set, `u < v`.
    pub fn edges(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.vertex_ids()
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    /// Edge set recomputed by checking every pair of vertices from scratch.
    pub fn rebuilt_edges(&self) -> BTreeSet<(VertexId, VertexId)> {
        let ids: Vec<VertexId> = self.vertex_ids().collect();
        let mut edges = BTreeSet::new();
        for (i, &u) in ids.iter().enumerate() {
            for &v in &ids[i + 1..] {
                let (a, b) = (self.vertex(u).unwrap(), self.vertex(v).unwrap());
                if a.conflicts_with(b) {
                    edges.insert((u, v));
                }
            }
        }
        edges
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            vertices: self
                .vertex_ids()
                .map(|id| {
                    let c = self.vertex(id).unwrap().config;
                    DumpVertex { id, stream: c.stream, route: c.route, phase: c.phase }
                })
                .collect(),
            edges: self.edges().into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PageRank {
    scores: Vec<f64>,
}

impl PageRank {
    pub fn get(&self, v: VertexId) -> f64 {
        self.scores.get(v as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpVertex {
    pub id: VertexId,
    pub stream: StreamId,
    pub route: usize,
    pub phase: u64,
}

/// Debug/fixture representation of a conflict graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub vertices: Vec<DumpVertex>,
    pub edges: Vec<(VertexId, VertexId)>,
}
