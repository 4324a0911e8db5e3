//! Independent colorful set solving with defensive and offensive planning.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::graph::{ConflictGraph, VertexId};
use crate::model::StreamId;

/// One ICS instance over a conflict graph.
#[derive(Clone, Debug)]
pub struct SolveRequest<'a> {
    pub graph: &'a ConflictGraph,
    /// Streams that must end up in the solution.
    pub required: Vec<StreamId>,
    /// Streams that may be rejected.
    pub optional: Vec<StreamId>,
    /// Required streams fixed to a given vertex, selected first in order.
    pub pinned: Vec<(StreamId, VertexId)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Solution {
    pub selected: BTreeMap<StreamId, VertexId>,
    pub rejected: Vec<StreamId>,
}

/// Greedy Flow Heap style heuristic.
///
/// Repeatedly resolves the stream with the fewest still-feasible
/// configurations (ties: fewer configurations overall, then smaller id) by
/// selecting its feasible vertex with the fewest feasible neighbors (ties:
/// smaller phase, then smaller route). Selecting a vertex makes all of its
/// neighbors and all other vertices of its stream infeasible. An optional
/// stream without feasible vertices is rejected; a required one fails the
/// solve.
pub fn gfh_solve(req: &SolveRequest<'_>) -> Result<Solution> {
    let g = req.graph;
    let n = g.id_bound();
    let active: HashSet<StreamId> = req.required.iter().chain(&req.optional).copied().collect();
    let required: HashSet<StreamId> = req.required.iter().copied().collect();

    let mut alive = vec![false; n];
    for &c in &active {
        for &v in g.vertices_of(c) {
            alive[v as usize] = true;
        }
    }
    let mut live_degree: Vec<u32> =
        (0..n as VertexId).map(|v| g.neighbors(v).iter().filter(|&&u| alive[u as usize]).count() as u32).collect();
    let mut feasible: BTreeMap<StreamId, usize> = active.iter().map(|&c| (c, g.vertices_of(c).len())).collect();
    let mut queue: BTreeSet<(usize, usize, StreamId)> =
        feasible.iter().map(|(&c, &k)| (k, g.vertices_of(c).len(), c)).collect();

    let mut solution = Solution::default();

    // Marks `v` infeasible and updates the counters of its stream and its
    // neighbors.
    let kill = |v: VertexId,
                alive: &mut Vec<bool>,
                live_degree: &mut Vec<u32>,
                feasible: &mut BTreeMap<StreamId, usize>,
                queue: &mut BTreeSet<(usize, usize, StreamId)>| {
        if !alive[v as usize] {
            return;
        }
        alive[v as usize] = false;
        let c = g.color(v).expect("vertex present");
        if let Some(k) = feasible.get_mut(&c) {
            let total = g.vertices_of(c).len();
            if queue.remove(&(*k, total, c)) {
                *k -= 1;
                queue.insert((*k, total, c));
            }
        }
        for &u in g.neighbors(v) {
            if alive[u as usize] {
                live_degree[u as usize] -= 1;
            }
        }
    };

    let select = |v: VertexId,
                  alive: &mut Vec<bool>,
                  live_degree: &mut Vec<u32>,
                  feasible: &mut BTreeMap<StreamId, usize>,
                  queue: &mut BTreeSet<(usize, usize, StreamId)>,
                  solution: &mut Solution| {
        let c = g.color(v).expect("vertex present");
        let total = g.vertices_of(c).len();
        queue.remove(&(feasible[&c], total, c));
        feasible.remove(&c);
        alive[v as usize] = false;
        for &u in g.neighbors(v) {
            if alive[u as usize] {
                live_degree[u as usize] -= 1;
            }
        }
        for &w in g.vertices_of(c) {
            kill(w, alive, live_degree, feasible, queue);
        }
        for &u in g.neighbors(v) {
            kill(u, alive, live_degree, feasible, queue);
        }
        solution.selected.insert(c, v);
    };

    for &(c, v) in &req.pinned {
        if g.color(v) != Some(c) || !alive[v as usize] || !feasible.contains_key(&c) {
            return Err(Error::RequiredColorUnsatisfiable(c));
        }
        select(v, &mut alive, &mut live_degree, &mut feasible, &mut queue, &mut solution);
    }

    while let Some(&(k, _, c)) = queue.first() {
        if k == 0 {
            queue.pop_first();
            feasible.remove(&c);
            if required.contains(&c) {
                return Err(Error::RequiredColorUnsatisfiable(c));
            }
            solution.rejected.push(c);
            continue;
        }
        let v = g
            .vertices_of(c)
            .iter()
            .copied()
            .filter(|&v| alive[v as usize])
            .min_by_key(|&v| {
                let cfg = g.vertex(v).expect("vertex present").config;
                (live_degree[v as usize], cfg.phase, cfg.route)
            })
            .expect("feasible count matches alive vertices");
        select(v, &mut alive, &mut live_degree, &mut feasible, &mut queue, &mut solution);
    }
    solution.rejected.sort();
    Ok(solution)
}

/// Keeps every surviving stream on its current configuration and places the
/// new streams around them.
pub fn defensive_plan(
    g: &ConflictGraph,
    pinned: &[(StreamId, VertexId)],
    new_streams: &[StreamId],
) -> Result<Solution> {
    gfh_solve(&SolveRequest {
        graph: g,
        required: pinned.iter().map(|&(s, _)| s).collect(),
        optional: new_streams.to_vec(),
        pinned: pinned.to_vec(),
    })
}

/// Re-solves from scratch, allowing surviving streams to move to any of
/// their configurations. `None` when some surviving stream cannot be placed.
pub fn offensive_plan(g: &ConflictGraph, old_streams: &[StreamId], new_streams: &[StreamId]) -> Option<Solution> {
    gfh_solve(&SolveRequest {
        graph: g,
        required: old_streams.to_vec(),
        optional: new_streams.to_vec(),
        pinned: Vec::new(),
    })
    .ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanChoice {
    Defensive,
    Offensive,
}

/// The plan with fewer rejections; ties keep the defensive plan.
pub fn choose_plan(defensive: &Solution, offensive: Option<&Solution>) -> PlanChoice {
    match offensive {
        Some(o) if o.rejected.len() < defensive.rejected.len() => PlanChoice::Offensive,
        _ => PlanChoice::Defensive,
    }
}

/// Maximum number of colors in any independent colorful set, by exhaustive
/// search. Test oracle for small graphs.
pub fn exhaustive_max_colors(g: &ConflictGraph, required: &[StreamId]) -> Option<usize> {
    let colors: Vec<StreamId> = g.colors().collect();
    fn go(
        g: &ConflictGraph,
        colors: &[StreamId],
        required: &[StreamId],
        i: usize,
        chosen: &mut Vec<VertexId>,
        best: &mut Option<usize>,
    ) {
        if i == colors.len() {
            if best.is_none_or(|b| chosen.len() > b) {
                *best = Some(chosen.len());
            }
            return;
        }
        let c = colors[i];
        for &v in g.vertices_of(c) {
            if chosen.iter().all(|&u| !g.has_edge(u, v)) {
                chosen.push(v);
                go(g, colors, required, i + 1, chosen, best);
                chosen.pop();
            }
        }
        if !required.contains(&c) {
            go(g, colors, required, i + 1, chosen, best);
        }
    }
    let mut best = None;
    go(g, &colors, required, 0, &mut Vec::new(), &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::vtx;

    fn check_independent_colorful(g: &ConflictGraph, s: &Solution) {
        let vs: Vec<VertexId> = s.selected.values().copied().collect();
        for (i, &u) in vs.iter().enumerate() {
            for &v in &vs[i + 1..] {
                assert!(!g.has_edge(u, v));
                assert_ne!(g.color(u), g.color(v));
            }
        }
        for (&c, &v) in &s.selected {
            assert_eq!(g.color(v), Some(c));
        }
    }

    #[test]
    fn edgeless_selects_all() {
        let mut g = ConflictGraph::new();
        for s in 0..4 {
            g.add_configuration(vtx(s, 0, s, 0, 4, 100)).unwrap();
        }
        let ids: Vec<_> = g.colors().collect();
        let sol = gfh_solve(&SolveRequest { graph: &g, required: vec![], optional: ids, pinned: vec![] }).unwrap();
        assert_eq!(sol.selected.len(), 4);
        assert!(sol.rejected.is_empty());
    }

    #[test]
    fn triangle_with_isolated_alternatives() {
        let mut g = ConflictGraph::new();
        for s in 0..3 {
            g.add_configuration(vtx(s, 0, 0, 0, 4, 100)).unwrap();
            g.add_configuration(vtx(s, 1, 10 + s, 0, 4, 100)).unwrap();
        }
        assert_eq!(g.edge_count(), 3);
        assert_eq!(exhaustive_max_colors(&g, &[]), Some(3));
        let ids: Vec<_> = g.colors().collect();
        let sol = gfh_solve(&SolveRequest { graph: &g, required: vec![], optional: ids, pinned: vec![] }).unwrap();
        assert_eq!(sol.selected.len(), 3);
        // Once two streams leave the shared link, the third may use it.
        let on_shared = sol.selected.values().filter(|&&v| g.vertex(v).unwrap().config.route == 0).count();
        assert!(on_shared <= 1);
        check_independent_colorful(&g, &sol);
    }

    #[test]
    fn pinned_blocks_optional() {
        let mut g = ConflictGraph::new();
        let p = g.add_configuration(vtx(0, 0, 0, 0, 10, 100)).unwrap();
        g.add_configuration(vtx(1, 0, 0, 2, 6, 100)).unwrap();
        g.add_configuration(vtx(1, 1, 0, 5, 9, 100)).unwrap();
        let sol = defensive_plan(&g, &[(StreamId(0), p)], &[StreamId(1)]).unwrap();
        assert_eq!(sol.rejected, vec![StreamId(1)]);
        assert_eq!(sol.selected, BTreeMap::from([(StreamId(0), p)]));
    }

    #[test]
    fn defensive_admits_free_vertex_and_keeps_pins() {
        let mut g = ConflictGraph::new();
        let p = g.add_configuration(vtx(0, 0, 0, 0, 10, 100)).unwrap();
        g.add_configuration(vtx(0, 1, 0, 50, 60, 100)).unwrap();
        g.add_configuration(vtx(1, 0, 0, 2, 6, 100)).unwrap();
        let free = g.add_configuration(vtx(1, 1, 0, 20, 24, 100)).unwrap();
        let sol = defensive_plan(&g, &[(StreamId(0), p)], &[StreamId(1)]).unwrap();
        assert_eq!(sol.selected[&StreamId(0)], p);
        assert_eq!(sol.selected[&StreamId(1)], free);

        let none = defensive_plan(&g, &[(StreamId(0), p)], &[]).unwrap();
        assert_eq!(none.selected.len(), 1);
        assert!(none.rejected.is_empty());
    }

    #[test]
    fn offensive_reconfigures_old_stream() {
        // Old stream 0 sits on [0,10) of link 0 and could move to link 1.
        // New stream 1 only has a vertex on link 0 at [2,6).
        let mut g = ConflictGraph::new();
        let pinned = g.add_configuration(vtx(0, 0, 0, 0, 10, 100)).unwrap();
        let alt = g.add_configuration(vtx(0, 1, 1, 0, 10, 100)).unwrap();
        g.add_configuration(vtx(1, 0, 0, 2, 6, 100)).unwrap();

        let d = defensive_plan(&g, &[(StreamId(0), pinned)], &[StreamId(1)]).unwrap();
        assert_eq!(d.rejected, vec![StreamId(1)]);
        let o = offensive_plan(&g, &[StreamId(0)], &[StreamId(1)]).unwrap();
        assert!(o.rejected.is_empty());
        assert_eq!(o.selected[&StreamId(0)], alt);
        assert_eq!(choose_plan(&d, Some(&o)), PlanChoice::Offensive);
        assert_eq!(exhaustive_max_colors(&g, &[StreamId(0)]), Some(2));
    }

    #[test]
    fn offensive_failure_falls_back() {
        // Required stream 1 has fewer options and is resolved first, killing
        // stream 0's only vertex.
        let mut g = ConflictGraph::new();
        let a = g.add_configuration(vtx(0, 0, 0, 0, 10, 100)).unwrap();
        g.add_configuration(vtx(0, 1, 0, 1, 11, 100)).unwrap();
        g.add_configuration(vtx(1, 0, 0, 2, 6, 100)).unwrap();
        let r = gfh_solve(&SolveRequest {
            graph: &g,
            required: vec![StreamId(0), StreamId(1)],
            optional: vec![],
            pinned: vec![],
        });
        assert!(matches!(r, Err(Error::RequiredColorUnsatisfiable(_))));
        let d = defensive_plan(&g, &[(StreamId(0), a)], &[]).unwrap();
        assert_eq!(choose_plan(&d, None), PlanChoice::Defensive);
    }

    #[test]
    fn choose_plan_rules() {
        let rej = |n: u32| Solution { selected: BTreeMap::new(), rejected: (0..n).map(StreamId).collect() };
        assert_eq!(choose_plan(&rej(2), Some(&rej(0))), PlanChoice::Offensive);
        assert_eq!(choose_plan(&rej(1), Some(&rej(1))), PlanChoice::Defensive);
        assert_eq!(choose_plan(&rej(1), None), PlanChoice::Defensive);
    }

    #[test]
    fn colors_without_vertices_are_rejected() {
        let g = ConflictGraph::new();
        let sol = gfh_solve(&SolveRequest { graph: &g, required: vec![], optional: vec![StreamId(3)], pinned: vec![] })
            .unwrap();
        assert_eq!(sol.rejected, vec![StreamId(3)]);
    }
}
