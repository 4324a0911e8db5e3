//! Topology generators. Bridges get ids `0..n`; device `n + i` hangs off
//! bridge `i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Link, Network, Node, NodeId, NodeKind, GIGABIT_RATE};

/// Resampling attempts before a generator gives up on connectivity.
pub const MAX_RESAMPLES: usize = 1000;

pub const DEFAULT_WAXMAN_A: f64 = 0.4;
pub const DEFAULT_WAXMAN_B: f64 = 0.4;

/// Physical parameters shared by every link and bridge of a generated
/// topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    /// Bits per tick.
    pub rate: u64,
    pub propagation_delay: u64,
    pub processing_delay: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams { rate: GIGABIT_RATE, propagation_delay: 1, processing_delay: 4 }
    }
}

/// Builds a network from undirected bridge cables, adding one end device per
/// bridge. Every cable becomes two directed links.
pub fn from_bridge_edges(n: usize, edges: &[(usize, usize)], params: &LinkParams) -> Network {
    let mut nodes = Vec::with_capacity(2 * n);
    for i in 0..n {
        nodes.push(Node { id: NodeId(i as u32), kind: NodeKind::Bridge, processing_delay: params.processing_delay });
    }
    for i in 0..n {
        nodes.push(Node { id: NodeId((n + i) as u32), kind: NodeKind::EndDevice, processing_delay: 0 });
    }
    let link = |a: usize, b: usize| Link {
        from: NodeId(a as u32),
        to: NodeId(b as u32),
        rate: params.rate,
        propagation_delay: params.propagation_delay,
    };
    let mut links = Vec::with_capacity(2 * edges.len() + 2 * n);
    for &(a, b) in edges {
        links.push(link(a, b));
        links.push(link(b, a));
    }
    for i in 0..n {
        links.push(link(n + i, i));
        links.push(link(i, n + i));
    }
    Network::new(nodes, links)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Draws edge sets from `sample` with seeds `seed, seed + 1, ...` until one
/// is connected.
fn resample(
    n: usize,
    seed: u64,
    params: &LinkParams,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> Vec<(usize, usize)>,
) -> Result<Network> {
    for attempt in 0..MAX_RESAMPLES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let edges = sample(&mut rng);
        if connected(n, &edges) {
            return Ok(from_bridge_edges(n, &edges, params));
        }
    }
    Err(Error::Unconnectable(MAX_RESAMPLES))
}

/// Erdős–Rényi bridge graph: every pair is cabled with probability `p`.
pub fn gen_random(n: usize, p: f64, seed: u64, params: &LinkParams) -> Result<Network> {
    if n < 2 || !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("random topology needs n >= 2 and 0 < p <= 1 (got n={n}, p={p})")));
    }
    resample(n, seed, params, |rng| {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        edges
    })
}

/// Waxman graph: bridges uniform in the unit square, pair probability
/// `b * exp(-d / (a * L))` with `L` the largest pairwise distance.
pub fn gen_waxman(n: usize, a: f64, b: f64, seed: u64, params: &LinkParams) -> Result<Network> {
    if n < 2 || !(a > 0.0 && b > 0.0 && b <= 1.0) {
        return Err(Error::Config(format!(
            "waxman topology needs n >= 2, a > 0, 0 < b <= 1 (got n={n}, a={a}, b={b})"
        )));
    }
    resample(n, seed, params, |rng| {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let dist = |i: usize, j: usize| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
        let mut l = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                l = l.max(dist(i, j));
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let prob = if l > 0.0 { b * (-dist(i, j) / (a * l)).exp() } else { b };
                if rng.gen_bool(prob.clamp(0.0, 1.0)) {
                    edges.push((i, j));
                }
            }
        }
        edges
    })
}

pub fn gen_ring(n: usize, params: &LinkParams) -> Result<Network> {
    if n < 3 {
        return Err(Error::Config(format!("ring topology needs n >= 3 (got {n})")));
    }
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Ok(from_bridge_edges(n, &edges, params))
}

/// Mesh where bridge `r * cols + c` is cabled to its horizontal and vertical
/// neighbours.
pub fn gen_grid(rows: usize, cols: usize, params: &LinkParams) -> Result<Network> {
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!("grid topology needs rows, cols >= 2 (got {rows}x{cols})")));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Ok(from_bridge_edges(rows * cols, &edges, params))
}
