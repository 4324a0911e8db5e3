//! Conflict graph expansion: which (route, phase) configurations to add for
//! the streams of a batch.
//!
//! Two orthogonal choices drive an expansion round. The enumeration scheme
//! picks phases either on a fixed ladder or uniformly at random. The
//! distribution strategy decides how many configurations every new stream
//! receives: the same number for all streams, or fewer for streams that look
//! hard to place (high traffic volume, high average degree, high page rank).
//! Streams from earlier iterations never receive new configurations.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Configuration, ConflictGraph, Vertex};
use crate::model::{traffic_volume, Network, Stream, StreamId};
use crate::routing::Route;
use crate::timing::{link_occupancy, max_phase, transmission_time};

/// Frame size assumed for the largest possible traffic volume (bytes).
pub const MTU_BYTES: u64 = 1500;
pub const DEFAULT_ALPHA: u64 = 5;
pub const PAGE_RANK_ITERATIONS: usize = 4;
pub const PAGE_RANK_DAMPING: f64 = 0.85;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Deterministic,
    Randomized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Homogeneous,
    TrafficVolume,
    AvgDegree,
    PageRank,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::Homogeneous, Strategy::TrafficVolume, Strategy::AvgDegree, Strategy::PageRank];

    /// Graph-metric strategies place α configurations first so the metric
    /// exists for the new streams.
    pub fn is_two_step(self) -> bool {
        matches!(self, Strategy::AvgDegree | Strategy::PageRank)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Deterministic => "deterministic",
            Scheme::Randomized => "randomized",
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Homogeneous => "homogeneous",
            Strategy::TrafficVolume => "traffic-volume",
            Strategy::AvgDegree => "avg-degree",
            Strategy::PageRank => "page-rank",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Scheme::Deterministic),
            "randomized" => Ok(Scheme::Randomized),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawParams")]
pub struct ExpansionParams {
    /// Average configurations per live stream; bounds the graph size.
    pub cps: u64,
    /// Base budget every new stream receives.
    pub alpha: u64,
    pub scheme: Scheme,
    pub strategy: Strategy,
    pub seed: u64,
}

/// Serialized form; a missing `alpha` means `min(DEFAULT_ALPHA, cps)`.
#[derive(Deserialize)]
struct RawParams {
    cps: u64,
    #[serde(default)]
    alpha: Option<u64>,
    scheme: Scheme,
    strategy: Strategy,
    #[serde(default)]
    seed: u64,
}

impl From<RawParams> for ExpansionParams {
    fn from(r: RawParams) -> Self {
        let mut p = ExpansionParams::new(r.cps, r.scheme, r.strategy, r.seed);
        if let Some(a) = r.alpha {
            p.alpha = a;
        }
        p
    }
}

impl ExpansionParams {
    pub fn new(cps: u64, scheme: Scheme, strategy: Strategy, seed: u64) -> Self {
        ExpansionParams { cps, alpha: DEFAULT_ALPHA.min(cps), scheme, strategy, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cps < 1 || self.alpha < 1 || self.alpha > self.cps {
            return Err(Error::Config(format!(
                "expected 1 <= alpha <= cps, got alpha={} cps={}",
                self.alpha, self.cps
            )));
        }
        Ok(())
    }
}

/// A stream of the current batch with its frozen candidate routes.
#[derive(Clone, Debug)]
pub struct NewStream {
    pub stream: Stream,
    pub routes: Vec<Route>,
    /// Per route; `None` when the route misses the deadline at every phase.
    pub max_phases: Vec<Option<u64>>,
}

impl NewStream {
    pub fn new(net: &Network, stream: Stream, routes: Vec<Route>) -> Self {
        let max_phases = routes.iter().map(|r| max_phase(net, &stream, r)).collect();
        NewStream { stream, routes, max_phases }
    }

    /// Size of the feasible (route, phase) space.
    pub fn feasible_count(&self) -> u64 {
        self.max_phases.iter().flatten().map(|m| m + 1).sum()
    }

    fn vertex(&self, net: &Network, route: usize, phase: u64) -> Vertex {
        Vertex {
            config: Configuration { stream: self.stream.id, route, phase },
            period: self.stream.period,
            schedule: link_occupancy(net, &self.stream, &self.routes[route], phase),
        }
    }
}

/// Per-stream configuration budgets for one expansion round, in batch order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BudgetPlan {
    pub budgets: Vec<(StreamId, u64)>,
}

impl BudgetPlan {
    pub fn get(&self, id: StreamId) -> Option<u64> {
        self.budgets.iter().find(|(s, _)| *s == id).map(|&(_, b)| b)
    }

    pub fn total(&self) -> u64 {
        self.budgets.iter().map(|&(_, b)| b).sum()
    }
}

/// Total graph size allowed for an iteration with `live_streams` streams.
pub fn global_budget(cps: u64, live_streams: usize) -> u64 {
    cps * live_streams as u64
}

/// `V̄ - |V| - |S_add|·α` without clamping; negative when oversubscribed.
pub fn remaining_budget_signed(vbar: u64, vertex_count: usize, added: usize, alpha: u64) -> i64 {
    vbar as i64 - vertex_count as i64 - (added as u64 * alpha) as i64
}

/// Freely disposable configurations, floored at zero.
pub fn remaining_budget(vbar: u64, vertex_count: usize, added: usize, alpha: u64) -> u64 {
    remaining_budget_signed(vbar, vertex_count, added, alpha).max(0) as u64
}

/// Nearest-rank 75th percentile.
pub fn delta_75(transmission_times: &[u64]) -> u64 {
    assert!(!transmission_times.is_empty(), "at least one transmission time");
    let mut sorted = transmission_times.to_vec();
    sorted.sort_unstable();
    let rank = (3 * sorted.len()).div_ceil(4);
    sorted[rank.max(1) - 1]
}

/// Phase step for the deterministic ladder, from the source-link
/// transmission times of the batch.
pub fn batch_delta(net: &Network, streams: &[NewStream]) -> u64 {
    let times: Vec<u64> = streams
        .iter()
        .filter_map(|ns| {
            let link =
                ns.routes.first().map(|r| r.links[0]).or_else(|| net.out_links(ns.stream.src).first().copied())?;
            Some(transmission_time(ns.stream.size, net.link(link).rate))
        })
        .collect();
    if times.is_empty() {
        1
    } else {
        delta_75(&times).max(1)
    }
}

/// Route-major phase ladder: `(r0,0), (r1,0), …, (r0,Δ), (r1,Δ), …`.
/// Infeasible phases are skipped without consuming budget.
pub fn deterministic_enumeration(max_phases: &[Option<u64>], budget: u64, delta: u64) -> Vec<(usize, u64)> {
    assert!(delta >= 1);
    let mut out = Vec::new();
    let top = max_phases.iter().flatten().copied().max();
    let Some(top) = top else {
        return out;
    };
    let mut phase = 0;
    while phase <= top && (out.len() as u64) < budget {
        for (route, m) in max_phases.iter().enumerate() {
            if (out.len() as u64) >= budget {
                break;
            }
            if m.is_some_and(|m| phase <= m) {
                out.push((route, phase));
            }
        }
        phase += delta;
    }
    out
}

/// Splits `budget` evenly over the routes (remainder to the first routes),
/// then draws that many distinct phases per route uniformly from the
/// feasible phases not in `exclude`. Shortfalls of small routes are
/// re-offered to the other routes in order.
pub fn randomized_enumeration(
    max_phases: &[Option<u64>],
    budget: u64,
    exclude: &HashSet<(usize, u64)>,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, u64)> {
    let m = max_phases.len() as u64;
    if m == 0 || budget == 0 {
        return Vec::new();
    }
    let excluded: Vec<Vec<u64>> = (0..max_phases.len())
        .map(|r| {
            let mut v: Vec<u64> = exclude
                .iter()
                .filter(|(er, p)| *er == r && max_phases[r].is_some_and(|mx| *p <= mx))
                .map(|&(_, p)| p)
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    let available: Vec<u64> =
        max_phases.iter().zip(&excluded).map(|(mp, ex)| mp.map_or(0, |mx| mx + 1 - ex.len() as u64)).collect();

    let mut shares: Vec<u64> = (0..m).map(|r| budget / m + u64::from(r < budget % m)).collect();
    let mut shortfall = 0;
    for (share, &avail) in shares.iter_mut().zip(&available) {
        if *share > avail {
            shortfall += *share - avail;
            *share = avail;
        }
    }
    for (share, &avail) in shares.iter_mut().zip(&available) {
        let extra = (avail - *share).min(shortfall);
        *share += extra;
        shortfall -= extra;
    }

    let mut out = Vec::with_capacity(budget as usize);
    for (route, (&share, &avail)) in shares.iter().zip(&available).enumerate() {
        if share == 0 {
            continue;
        }
        let mut picked: Vec<u64> = index::sample(rng, avail as usize, share as usize)
            .into_iter()
            .map(|i| nth_allowed(i as u64, &excluded[route]))
            .collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|p| (route, p)));
    }
    out
}

/// The `i`-th value of `0..` that is not in the sorted `excluded` list.
fn nth_allowed(i: u64, excluded: &[u64]) -> u64 {
    let mut value = i;
    for &e in excluded {
        if e <= value {
            value += 1;
        } else {
            break;
        }
    }
    value
}

/// Equal split of `available` over the streams, remainder to the first ones.
pub fn budget_homogeneous(streams: &[StreamId], available: u64) -> BudgetPlan {
    let n = streams.len() as u64;
    if n == 0 {
        return BudgetPlan::default();
    }
    BudgetPlan {
        budgets: streams
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, available / n + u64::from((i as u64) < available % n)))
            .collect(),
    }
}

/// `(top - h(s)) / (top·n - Σ h) · R` for every stream, or `None` when the
/// denominator vanishes (all streams equally hard).
pub fn proportional_extras(hardness: &[BigRational], top: &BigRational, remaining: u64) -> Option<Vec<BigRational>> {
    let n = BigRational::from_integer(BigInt::from(hardness.len()));
    let sum: BigRational = hardness.iter().sum();
    let denom = top * n - sum;
    if denom.is_zero() {
        return None;
    }
    let r = BigRational::from_integer(BigInt::from(remaining));
    Some(hardness.iter().map(|h| (top - h) / &denom * &r).collect())
}

/// Floating-point variant of [`proportional_extras`] for page-rank scores.
pub fn proportional_extras_f64(hardness: &[f64], top: f64, remaining: u64) -> Option<Vec<f64>> {
    let denom: f64 = hardness.iter().map(|h| top - h).sum();
    if denom <= 0.0 {
        return None;
    }
    Some(hardness.iter().map(|h| (top - h) / denom * remaining as f64).collect())
}

/// Floor every share and hand the leftover units to the largest fractional
/// parts (earlier streams win ties). The result never sums above `total`.
fn largest_remainder(shares: &[(u64, f64)], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = shares.iter().map(|&(floor, _)| floor).collect();
    let assigned: u64 = out.iter().sum();
    let mut leftover = total.saturating_sub(assigned).min(out.len() as u64) as usize;
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[b].1.total_cmp(&shares[a].1).then(a.cmp(&b)));
    for i in order {
        if leftover == 0 {
            break;
        }
        if shares[i].1 > 0.0 {
            out[i] += 1;
            leftover -= 1;
        }
    }
    out
}

pub fn integerize_exact(raw: &[BigRational], total: u64) -> Vec<u64> {
    let shares: Vec<(u64, f64)> = raw
        .iter()
        .map(|x| {
            let floor = x.floor();
            let frac = (x - &floor).to_f64().unwrap_or(0.0);
            (floor.to_integer().to_u64().unwrap_or(0), frac)
        })
        .collect();
    largest_remainder(&shares, total)
}

pub fn integerize_f64(raw: &[f64], total: u64) -> Vec<u64> {
    let shares: Vec<(u64, f64)> = raw
        .iter()
        .map(|&x| {
            let x = x.max(0.0);
            (x.floor() as u64, x - x.floor())
        })
        .collect();
    largest_remainder(&shares, total)
}

fn ratio_to_big(r: num_rational::Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Per-stream extras proportional to how far each stream's traffic volume is
/// below the largest possible volume `MTU / min period`. Returns the raw
/// extras (when the denominator is nonzero) and the integer extras.
pub fn traffic_volume_extras(streams: &[&Stream], min_period: u64, remaining: u64) -> (Option<Vec<f64>>, Vec<u64>) {
    let vols: Vec<BigRational> = streams.iter().map(|s| ratio_to_big(traffic_volume(s))).collect();
    let mtu_volume = BigRational::new(BigInt::from(MTU_BYTES), BigInt::from(min_period));
    let top = vols.iter().cloned().fold(mtu_volume, |a, b| if b > a { b } else { a });
    finish_exact(streams.iter().map(|s| s.id).collect(), proportional_extras(&vols, &top, remaining), remaining)
}

/// Per-stream extras proportional to how far each stream's average degree is
/// below the largest average degree of the batch.
pub fn avg_degree_extras(
    g: &ConflictGraph,
    streams: &[StreamId],
    remaining: u64,
) -> Result<(Option<Vec<f64>>, Vec<u64>)> {
    let degs = streams.iter().map(|&s| g.avg_degree(s).map(ratio_to_big)).collect::<Result<Vec<_>>>()?;
    let top = degs.iter().max().cloned().unwrap_or_else(BigRational::zero);
    Ok(finish_exact(streams.to_vec(), proportional_extras(&degs, &top, remaining), remaining))
}

/// Per-stream extras proportional to how far each stream's rank (sum of its
/// vertices' page ranks) is below the largest stream rank of the batch.
pub fn page_rank_extras(
    g: &ConflictGraph,
    streams: &[StreamId],
    remaining: u64,
) -> Result<(Option<Vec<f64>>, Vec<u64>)> {
    let pr = g.page_rank(PAGE_RANK_ITERATIONS, PAGE_RANK_DAMPING);
    let ranks = streams.iter().map(|&s| g.stream_rank(&pr, s)).collect::<Result<Vec<_>>>()?;
    let top = ranks.iter().copied().fold(0.0, f64::max);
    let raw = proportional_extras_f64(&ranks, top, remaining);
    let ints = match &raw {
        Some(raw) => integerize_f64(raw, remaining),
        None => uniform(streams.len(), remaining),
    };
    Ok((raw, ints))
}

fn uniform(n: usize, total: u64) -> Vec<u64> {
    let ids: Vec<StreamId> = (0..n as u32).map(StreamId).collect();
    budget_homogeneous(&ids, total).budgets.into_iter().map(|(_, b)| b).collect()
}

fn finish_exact(ids: Vec<StreamId>, raw: Option<Vec<BigRational>>, remaining: u64) -> (Option<Vec<f64>>, Vec<u64>) {
    match raw {
        Some(raw) => {
            let ints = integerize_exact(&raw, remaining);
            (Some(raw.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect()), ints)
        }
        None => (None, uniform(ids.len(), remaining)),
    }
}

/// What an expansion round did.
#[derive(Clone, Debug, Default)]
pub struct ExpansionReport {
    pub vertices_added: usize,
    pub edges_added: usize,
    pub elapsed: Duration,
    /// Configurations placed per new stream (both steps), batch order.
    pub placed: BudgetPlan,
    /// Budgets handed out per new stream, before feasible-space truncation.
    pub budgets: BudgetPlan,
    /// `R_i` before clamping.
    pub remaining_signed: i64,
    /// Clamped `R_i` the heterogeneous strategy distributed.
    pub remaining: u64,
    /// Raw real-valued extras of a heterogeneous strategy, when its
    /// denominator was nonzero.
    pub raw_extras: Option<Vec<f64>>,
    /// Budget that could not be placed because a stream's feasible
    /// configuration space was too small.
    pub truncated: u64,
}

fn stream_rng(seed: u64, stream: StreamId, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream.0 as u64) << 8) | step);
    rng
}

struct Placer<'a> {
    net: &'a Network,
    params: &'a ExpansionParams,
    delta: u64,
    placed: BTreeMap<StreamId, Vec<(usize, u64)>>,
    truncated: u64,
}

impl Placer<'_> {
    /// Places `extra` more configurations for each stream, continuing the
    /// enumeration where earlier steps stopped.
    fn place(&mut self, g: &mut ConflictGraph, streams: &[NewStream], extra: &[u64], step: u64) -> Result<()> {
        let mut vertices = Vec::new();
        for (ns, &want) in streams.iter().zip(extra) {
            let already = self.placed.entry(ns.stream.id).or_default();
            let room = ns.feasible_count() - already.len() as u64;
            let take = want.min(room);
            self.truncated += want - take;
            if take == 0 {
                continue;
            }
            let picks = match self.params.scheme {
                Scheme::Deterministic => {
                    let ladder = deterministic_enumeration(&ns.max_phases, already.len() as u64 + take, self.delta);
                    ladder[already.len()..].to_vec()
                }
                Scheme::Randomized => {
                    let exclude: HashSet<(usize, u64)> = already.iter().copied().collect();
                    let mut rng = stream_rng(self.params.seed, ns.stream.id, step);
                    randomized_enumeration(&ns.max_phases, take, &exclude, &mut rng)
                }
            };
            vertices.extend(picks.iter().map(|&(r, p)| ns.vertex(self.net, r, p)));
            already.extend(picks);
        }
        g.add_configurations(vertices)?;
        Ok(())
    }
}

/// Adds configurations for the new streams of a batch.
///
/// `vbar` is the global budget for this iteration and `min_period` the
/// smallest period among all live streams. Deletions must already be applied
/// to `g`. The graph never grows beyond `vbar` vertices through this call;
/// when it is already close to `vbar` the base budget α shrinks accordingly.
pub fn expand(
    g: &mut ConflictGraph,
    net: &Network,
    streams: &[NewStream],
    params: &ExpansionParams,
    vbar: u64,
    min_period: u64,
) -> Result<ExpansionReport> {
    let started = Instant::now();
    let (v0, e0) = (g.vertex_count(), g.edge_count());
    let mut report = ExpansionReport::default();
    if streams.is_empty() {
        return Ok(report);
    }

    let ids: Vec<StreamId> = streams.iter().map(|ns| ns.stream.id).collect();
    // Streams without any feasible configuration take no part in budgeting.
    let feasible: Vec<usize> = (0..streams.len()).filter(|&i| streams[i].feasible_count() > 0).collect();
    let feasible_ids: Vec<StreamId> = feasible.iter().map(|&i| ids[i]).collect();
    let n = feasible.len();

    let available = vbar.saturating_sub(v0 as u64);
    report.remaining_signed = remaining_budget_signed(vbar, v0, n, params.alpha);
    report.remaining = remaining_budget(vbar, v0, n, params.alpha);
    let oversubscribed = available < n as u64 * params.alpha;
    let base: Vec<u64> = if oversubscribed { uniform(n, available) } else { vec![params.alpha; n] };

    let mut placer = Placer {
        net,
        params,
        delta: match params.scheme {
            Scheme::Deterministic => batch_delta(net, streams),
            Scheme::Randomized => 1,
        },
        placed: BTreeMap::new(),
        truncated: 0,
    };
    let subset: Vec<NewStream> = feasible.iter().map(|&i| streams[i].clone()).collect();

    let mut budgets = vec![0u64; n];
    match params.strategy {
        Strategy::Homogeneous => {
            budgets = uniform(n, available);
            placer.place(g, &subset, &budgets, 0)?;
        }
        Strategy::TrafficVolume => {
            let extras = if oversubscribed {
                vec![0; n]
            } else {
                let refs: Vec<&Stream> = subset.iter().map(|ns| &ns.stream).collect();
                let (raw, ints) = traffic_volume_extras(&refs, min_period, report.remaining);
                report.raw_extras = raw;
                ints
            };
            for i in 0..n {
                budgets[i] = base[i] + extras[i];
            }
            placer.place(g, &subset, &budgets, 0)?;
        }
        Strategy::AvgDegree | Strategy::PageRank => {
            placer.place(g, &subset, &base, 0)?;
            let extras = if oversubscribed || n == 0 {
                vec![0; n]
            } else {
                let (raw, ints) = if params.strategy == Strategy::AvgDegree {
                    avg_degree_extras(g, &feasible_ids, report.remaining)?
                } else {
                    page_rank_extras(g, &feasible_ids, report.remaining)?
                };
                report.raw_extras = raw;
                ints
            };
            placer.place(g, &subset, &extras, 1)?;
            for i in 0..n {
                budgets[i] = base[i] + extras[i];
            }
        }
    }

    let budget_of: BTreeMap<StreamId, u64> = feasible_ids.iter().copied().zip(budgets).collect();
    report.budgets =
        BudgetPlan { budgets: ids.iter().map(|id| (*id, budget_of.get(id).copied().unwrap_or(0))).collect() };
    report.placed = BudgetPlan {
        budgets: ids.iter().map(|id| (*id, placer.placed.get(id).map_or(0, |v| v.len() as u64))).collect(),
    };
    report.truncated = placer.truncated;
    report.vertices_added = g.vertex_count() - v0;
    report.edges_added = g.edge_count() - e0;
    report.elapsed = started.elapsed();
    Ok(report)
}
