//! Candidate route computation: shortest paths with a diversity penalty.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinkId, Network, NodeId, Stream};

/// Weight of a link already used by a previously selected candidate route.
pub const DIVERSITY_PENALTY: u64 = 10;

/// Candidate routes per stream used throughout the evaluation setup.
pub const DEFAULT_CANDIDATE_ROUTES: usize = 2;

/// A loop-free path of directed links from a talker to a listener.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    #[serde(skip)]
    pub links: Vec<LinkId>,
}

impl Route {
    pub fn hop_count(&self) -> usize {
        self.links.len()
    }

    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().expect("route has at least two nodes")
    }

    /// Rebuilds a route from its node list, resolving each hop to a link.
    pub fn from_nodes(net: &Network, nodes: Vec<NodeId>) -> Option<Route> {
        let links = nodes.windows(2).map(|w| net.link_between(w[0], w[1])).collect::<Option<Vec<_>>>()?;
        if links.is_empty() {
            return None;
        }
        Some(Route { nodes, links })
    }

    /// Checks contiguity, loop freedom, endpoints and bridge-only interior.
    pub fn is_valid_for(&self, net: &Network, src: NodeId, dst: NodeId) -> bool {
        if self.nodes.len() != self.links.len() + 1 || self.links.is_empty() {
            return false;
        }
        if self.src() != src || self.dst() != dst {
            return false;
        }
        let mut seen = HashSet::new();
        if !self.nodes.iter().all(|n| seen.insert(*n)) {
            return false;
        }
        let contiguous = self.links.iter().enumerate().all(|(i, &l)| {
            let link = net.link(l);
            link.from == self.nodes[i] && link.to == self.nodes[i + 1]
        });
        let interior_bridges = self.nodes[1..self.nodes.len() - 1].iter().all(|&n| net.is_bridge(n));
        contiguous && interior_bridges
    }
}

/// Shortest route under `weight`, ties broken towards the lexicographically
/// smallest node-id sequence.
fn shortest_weighted(net: &Network, src: NodeId, dst: NodeId, weight: impl Fn(LinkId) -> u64) -> Result<Route> {
    let unreachable = || Error::Unreachable { src, dst };
    if src == dst || net.node(src).is_none() || net.node(dst).is_none() {
        return Err(unreachable());
    }

    // Distances to dst, computed backwards. Only dst and bridges are expanded
    // so that end devices never become interior hops.
    let mut to_dst: HashMap<NodeId, u64> = HashMap::from([(dst, 0)]);
    let mut heap = BinaryHeap::from([Reverse((0u64, dst))]);
    while let Some(Reverse((d, u))) = heap.pop() {
        if to_dst.get(&u).is_some_and(|&best| best < d) {
            continue;
        }
        if u != dst && !net.is_bridge(u) {
            continue;
        }
        for &l in net.in_links(u) {
            let v = net.link(l).from;
            let nd = d + weight(l);
            if to_dst.get(&v).is_none_or(|&best| nd < best) {
                to_dst.insert(v, nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }

    let mut remaining = *to_dst.get(&src).ok_or_else(unreachable)?;
    let mut nodes = vec![src];
    let mut links = Vec::new();
    let mut cur = src;
    while cur != dst {
        let (next, link) = net
            .out_links(cur)
            .iter()
            .filter_map(|&l| {
                let v = net.link(l).to;
                let tail = *to_dst.get(&v)?;
                let interior_ok = v == dst || net.is_bridge(v);
                (interior_ok && weight(l) + tail == remaining).then_some((v, l))
            })
            .min()
            .ok_or_else(unreachable)?;
        remaining -= weight(link);
        nodes.push(next);
        links.push(link);
        cur = next;
    }
    Ok(Route { nodes, links })
}

/// Minimum-hop route from `src` to `dst`.
pub fn shortest_path(net: &Network, src: NodeId, dst: NodeId) -> Result<Route> {
    shortest_weighted(net, src, dst, |_| 1)
}

/// Up to `k` distinct candidate routes for `stream`.
///
/// The first route is the minimum-hop route; every following route is the
/// shortest path when links used by earlier candidates cost
/// [`DIVERSITY_PENALTY`] instead of 1. Stops early once the penalized search
/// only rediscovers an existing candidate.
pub fn candidate_routes(net: &Network, stream: &Stream, k: usize) -> Result<Vec<Route>> {
    assert!(k >= 1, "at least one candidate route must be requested");
    let first = shortest_path(net, stream.src, stream.dst)?;
    let mut used: HashSet<LinkId> = first.links.iter().copied().collect();
    let mut routes = vec![first];
    while routes.len() < k {
        let next =
            shortest_weighted(net, stream.src, stream.dst, |l| if used.contains(&l) { DIVERSITY_PENALTY } else { 1 })?;
        if routes.contains(&next) {
            break;
        }
        used.extend(next.links.iter().copied());
        routes.push(next);
    }
    Ok(routes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::topology::{gen_ring, LinkParams};
    use crate::model::{Link, Node, NodeKind, StreamId};

    fn ids(r: &Route) -> Vec<u32> {
        r.nodes.iter().map(|n| n.0).collect()
    }

    // Ring generator numbering: bridges 0..n, device of bridge i is n + i.
    fn ring4() -> Network {
        gen_ring(4, &LinkParams::default()).unwrap()
    }

    fn stream(src: u32, dst: u32) -> Stream {
        Stream::new(StreamId(0), NodeId(src), NodeId(dst), 1000, 100).unwrap()
    }

    /// Every loop-free device-to-device path with bridge-only interior.
    fn all_paths(net: &Network, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
        fn walk(net: &Network, path: &mut Vec<NodeId>, dst: NodeId, out: &mut Vec<Vec<NodeId>>) {
            let cur = *path.last().unwrap();
            if cur == dst {
                out.push(path.clone());
                return;
            }
            if path.len() > 1 && !net.is_bridge(cur) {
                return;
            }
            for &l in net.out_links(cur) {
                let v = net.link(l).to;
                if !path.contains(&v) {
                    path.push(v);
                    walk(net, path, dst, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(net, &mut vec![src], dst, &mut out);
        out
    }

    #[test]
    fn ring_tie_breaks_to_smallest_sequence() {
        let net = ring4();
        let r = shortest_path(&net, NodeId(4), NodeId(6)).unwrap();
        assert_eq!(ids(&r), vec![4, 0, 1, 2, 6]);

        // Cross-check against exhaustive enumeration.
        let mut paths = all_paths(&net, NodeId(4), NodeId(6));
        let min_len = paths.iter().map(Vec::len).min().unwrap();
        paths.retain(|p| p.len() == min_len);
        paths.sort();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0], r.nodes);
    }

    #[test]
    fn adjacent_bridges_unique_path() {
        let r = shortest_path(&ring4(), NodeId(4), NodeId(5)).unwrap();
        assert_eq!(ids(&r), vec![4, 0, 1, 5]);
    }

    #[test]
    fn disconnected_node_unreachable() {
        let net = ring4();
        let mut nodes = net.nodes().to_vec();
        nodes.push(Node { id: NodeId(100), kind: NodeKind::EndDevice, processing_delay: 0 });
        let net = Network::new(nodes, net.links().to_vec());
        assert!(matches!(shortest_path(&net, NodeId(4), NodeId(100)), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn ring_candidates_are_opposite_arcs() {
        let net = ring4();
        let routes = candidate_routes(&net, &stream(4, 6), 2).unwrap();
        assert_eq!(routes.len(), 2);
        assert_eq!(ids(&routes[0]), vec![4, 0, 1, 2, 6]);
        assert_eq!(ids(&routes[1]), vec![4, 0, 3, 2, 6]);
        let bridge_links = |r: &Route| -> HashSet<LinkId> { r.links[1..r.links.len() - 1].iter().copied().collect() };
        assert!(bridge_links(&routes[0]).is_disjoint(&bridge_links(&routes[1])));
    }

    #[test]
    fn tree_has_single_candidate() {
        // d3 - b0 - b1 - b2 - d4 line topology.
        let mut nodes: Vec<Node> =
            (0..3).map(|i| Node { id: NodeId(i), kind: NodeKind::Bridge, processing_delay: 4 }).collect();
        nodes.extend((3..5).map(|i| Node { id: NodeId(i), kind: NodeKind::EndDevice, processing_delay: 0 }));
        let mut links = Vec::new();
        for (a, b) in [(3, 0), (0, 1), (1, 2), (2, 4)] {
            for (f, t) in [(a, b), (b, a)] {
                links.push(Link { from: NodeId(f), to: NodeId(t), rate: 1000, propagation_delay: 1 });
            }
        }
        let net = Network::new(nodes, links);
        let routes = candidate_routes(&net, &stream(3, 4), 2).unwrap();
        assert_eq!(routes.len(), 1);
        assert_eq!(ids(&routes[0]), vec![3, 0, 1, 2, 4]);
    }

    #[test]
    fn k1_is_shortest_path() {
        let net = ring4();
        let routes = candidate_routes(&net, &stream(5, 7), 1).unwrap();
        assert_eq!(routes, vec![shortest_path(&net, NodeId(5), NodeId(7)).unwrap()]);
    }

    #[test]
    fn end_devices_never_interior() {
        // Two bridges joined only through an end device: no valid route.
        let nodes = vec![
            Node { id: NodeId(0), kind: NodeKind::Bridge, processing_delay: 4 },
            Node { id: NodeId(1), kind: NodeKind::Bridge, processing_delay: 4 },
            Node { id: NodeId(2), kind: NodeKind::EndDevice, processing_delay: 0 },
            Node { id: NodeId(3), kind: NodeKind::EndDevice, processing_delay: 0 },
            Node { id: NodeId(4), kind: NodeKind::EndDevice, processing_delay: 0 },
        ];
        let mut links = Vec::new();
        for (a, b) in [(3, 0), (0, 2), (2, 1), (1, 4)] {
            for (f, t) in [(a, b), (b, a)] {
                links.push(Link { from: NodeId(f), to: NodeId(t), rate: 1000, propagation_delay: 1 });
            }
        }
        let net = Network::new(nodes, links);
        assert!(shortest_path(&net, NodeId(3), NodeId(4)).is_err());
    }

    #[test]
    fn from_nodes_roundtrip() {
        let net = ring4();
        let r = shortest_path(&net, NodeId(4), NodeId(6)).unwrap();
        assert_eq!(Route::from_nodes(&net, r.nodes.clone()).unwrap(), r);
        assert!(Route::from_nodes(&net, vec![NodeId(4), NodeId(2)]).is_none());
    }
}
