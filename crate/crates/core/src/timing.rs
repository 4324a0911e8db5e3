//! No-wait frame propagation and the pairwise conflict predicate.

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::model::{checked_hypercycle, LinkId, Network, Stream};
use crate::routing::Route;

/// Default tick bound for [`brute_force_conflict`].
pub const ORACLE_TICK_BOUND: u64 = 1_000_000;

/// Half-open occupancy `[start, end)` of one link by one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Hop {
    pub link: LinkId,
    pub start: u64,
    pub end: u64,
}

/// Link occupancy of the first frame of a stream within its period.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OccupancySchedule {
    pub hops: Vec<Hop>,
    /// Tick at which the frame has fully arrived at the listener.
    pub arrival: u64,
}

impl OccupancySchedule {
    pub fn phase(&self) -> u64 {
        self.hops.first().map_or(0, |h| h.start)
    }

    pub fn shifted(&self, by: u64) -> OccupancySchedule {
        OccupancySchedule {
            hops: self.hops.iter().map(|h| Hop { link: h.link, start: h.start + by, end: h.end + by }).collect(),
            arrival: self.arrival + by,
        }
    }

    pub fn hop_on(&self, link: LinkId) -> Option<&Hop> {
        self.hops.iter().find(|h| h.link == link)
    }
}

/// Ticks needed to serialize `size` bytes at `rate` bits per tick, rounded up.
pub fn transmission_time(size: u64, rate: u64) -> u64 {
    (size * 8).div_ceil(rate)
}

/// Store-and-forward, no-wait propagation of one frame released at `phase`.
pub fn link_occupancy(net: &Network, stream: &Stream, route: &Route, phase: u64) -> OccupancySchedule {
    let mut hops = Vec::with_capacity(route.links.len());
    let mut start = phase;
    let mut arrival = phase;
    for (i, &l) in route.links.iter().enumerate() {
        let link = net.link(l);
        let end = start + transmission_time(stream.size, link.rate);
        hops.push(Hop { link: l, start, end });
        arrival = end + link.propagation_delay;
        if i + 1 < route.links.len() {
            start = arrival + net.processing_delay(link.to);
        }
    }
    OccupancySchedule { hops, arrival }
}

/// Largest phase whose arrival still meets the deadline (= period), or
/// `None` when the route misses the deadline even at phase 0.
pub fn max_phase(net: &Network, stream: &Stream, route: &Route) -> Option<u64> {
    let arrival = link_occupancy(net, stream, route, 0).arrival;
    stream.deadline.checked_sub(arrival)
}

/// Whether two frame sequences `[sa + k·pa, ea + k·pa)` and
/// `[sb + k·pb, eb + k·pb)` collide within their common hypercycle.
pub(crate) fn intervals_conflict(sa: u64, ea: u64, pa: u64, sb: u64, eb: u64, pb: u64) -> bool {
    if ea <= pa && eb <= pb {
        // Both frames stay inside their period, so every relative offset
        // `sb - sa + j·gcd` is realized inside the hypercycle.
        let g = pa.gcd(&pb) as i128;
        let r = (sb as i128 - sa as i128).rem_euclid(g);
        return r < (ea - sa) as i128 || g - r < (eb - sb) as i128;
    }
    let Some(h) = checked_hypercycle(&[pa, pb]) else {
        // Unreachable for realistic periods; fall back to the conservative answer.
        return true;
    };
    let (sb, eb, pb) = (sb as i128, eb as i128, pb as i128);
    for ka in 0..h / pa {
        let x = (sa + ka * pa) as i128;
        let y = (ea + ka * pa) as i128;
        // Smallest kb whose frame ends after x.
        let lo = (x - eb).div_euclid(pb) + 1;
        let lo = lo.max(0);
        if lo < (h as i128) / pb && sb + lo * pb < y {
            return true;
        }
    }
    false
}

/// True iff the two configurations transmit on a common link at overlapping
/// times anywhere in their hypercycle.
pub fn frames_conflict(a: &OccupancySchedule, period_a: u64, b: &OccupancySchedule, period_b: u64) -> bool {
    a.hops.iter().any(|ha| {
        b.hop_on(ha.link).is_some_and(|hb| intervals_conflict(ha.start, ha.end, period_a, hb.start, hb.end, period_b))
    })
}

/// Test oracle: tick-by-tick occupancy simulation over the hypercycle.
pub fn brute_force_conflict(
    a: &OccupancySchedule,
    period_a: u64,
    b: &OccupancySchedule,
    period_b: u64,
    bound: u64,
) -> Result<bool> {
    let h = checked_hypercycle(&[period_a, period_b]).ok_or(Error::OracleBoundExceeded(u64::MAX, bound))?;
    if h > bound {
        return Err(Error::OracleBoundExceeded(h, bound));
    }
    let max_end = a.hops.iter().chain(&b.hops).map(|x| x.end).max().unwrap_or(0);
    // Frames released late in the hypercycle may run past it.
    let horizon = (h + max_end) as usize;

    for ha in &a.hops {
        let Some(hb) = b.hop_on(ha.link) else {
            continue;
        };
        let mut busy = vec![false; horizon];
        for k in 0..h / period_a {
            for t in ha.start + k * period_a..ha.end + k * period_a {
                busy[t as usize] = true;
            }
        }
        for k in 0..h / period_b {
            for t in hb.start + k * period_b..hb.end + k * period_b {
                if busy[t as usize] {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Link, Node, NodeId, NodeKind, StreamId};
    use proptest::prelude::*;

    fn line_net() -> Network {
        // d3 -> b1 -> b2 -> d4, rate 1000, propagation 1, processing 4.
        let nodes = vec![
            Node { id: NodeId(1), kind: NodeKind::Bridge, processing_delay: 4 },
            Node { id: NodeId(2), kind: NodeKind::Bridge, processing_delay: 4 },
            Node { id: NodeId(3), kind: NodeKind::EndDevice, processing_delay: 0 },
            Node { id: NodeId(4), kind: NodeKind::EndDevice, processing_delay: 0 },
        ];
        let links = [(3, 1), (1, 2), (2, 4)]
            .into_iter()
            .map(|(f, t)| Link { from: NodeId(f), to: NodeId(t), rate: 1000, propagation_delay: 1 })
            .collect();
        Network::new(nodes, links)
    }

    fn single(link: u32, start: u64, end: u64) -> OccupancySchedule {
        OccupancySchedule { hops: vec![Hop { link: LinkId(link), start, end }], arrival: end }
    }

    #[test]
    fn transmission_time_examples() {
        assert_eq!(transmission_time(1500, 1000), 12);
        assert_eq!(transmission_time(500, 1000), 4);
        assert_eq!(transmission_time(125, 1000), 1);
        assert_eq!(transmission_time(126, 1000), 2);
    }

    #[test]
    fn three_hop_recurrence() {
        let net = line_net();
        let s = Stream::new(StreamId(0), NodeId(3), NodeId(4), 100, 500).unwrap();
        let route = Route::from_nodes(&net, vec![NodeId(3), NodeId(1), NodeId(2), NodeId(4)]).unwrap();
        let sched = link_occupancy(&net, &s, &route, 0);
        let spans: Vec<_> = sched.hops.iter().map(|h| (h.start, h.end)).collect();
        assert_eq!(spans, vec![(0, 4), (9, 13), (18, 22)]);
        assert_eq!(sched.arrival, 23);

        assert_eq!(link_occupancy(&net, &s, &route, 7), sched.shifted(7));
        assert_eq!(max_phase(&net, &s, &route), Some(77));
    }

    #[test]
    fn single_link_route() {
        let net = line_net();
        let s = Stream::new(StreamId(0), NodeId(3), NodeId(1), 100, 500).unwrap();
        let route = Route::from_nodes(&net, vec![NodeId(3), NodeId(1)]).unwrap();
        let sched = link_occupancy(&net, &s, &route, 5);
        assert_eq!(sched.hops, vec![Hop { link: route.links[0], start: 5, end: 9 }]);
        assert_eq!(sched.arrival, 10);
    }

    #[test]
    fn max_phase_boundaries() {
        let net = line_net();
        let route = Route::from_nodes(&net, vec![NodeId(3), NodeId(1), NodeId(2), NodeId(4)]).unwrap();
        let at = |period| {
            let s = Stream::new(StreamId(0), NodeId(3), NodeId(4), period, 500).unwrap();
            max_phase(&net, &s, &route)
        };
        assert_eq!(at(23), Some(0));
        assert_eq!(at(22), None);
    }

    #[test]
    fn conflict_examples() {
        let a = single(0, 0, 4);
        assert!(frames_conflict(&a, 100, &a, 100));
        assert!(!frames_conflict(&a, 100, &single(0, 96, 100), 250));
        assert!(frames_conflict(&a, 100, &single(0, 2, 6), 250));
        assert!(!frames_conflict(&a, 100, &single(1, 0, 4), 100));
        // Back-to-back frames do not conflict.
        assert!(!frames_conflict(&a, 100, &single(0, 4, 8), 100));

        for (b, pb) in [(single(0, 96, 100), 250), (single(0, 2, 6), 250), (single(1, 0, 4), 100)] {
            assert_eq!(
                brute_force_conflict(&a, 100, &b, pb, ORACLE_TICK_BOUND).unwrap(),
                frames_conflict(&a, 100, &b, pb)
            );
        }
    }

    #[test]
    fn oracle_bound_enforced() {
        let a = single(0, 0, 4);
        assert!(matches!(brute_force_conflict(&a, 997, &a, 991, 1000), Err(Error::OracleBoundExceeded(_, 1000))));
    }

    fn schedule_strategy() -> impl Strategy<Value = (OccupancySchedule, u64)> {
        (1u64..=64, prop::collection::vec((0u32..4, 0u64..80, 1u64..8), 1..4)).prop_map(|(period, hops)| {
            let mut seen = std::collections::HashSet::new();
            let hops: Vec<Hop> = hops
                .into_iter()
                .filter(|(l, _, _)| seen.insert(*l))
                .map(|(l, s, d)| Hop { link: LinkId(l), start: s, end: s + d })
                .collect();
            let arrival = hops.iter().map(|h| h.end).max().unwrap();
            (OccupancySchedule { hops, arrival }, period)
        })
    }

    proptest! {
        // Arbitrary intervals, including ones spilling past their period.
        #[test]
        fn predicate_matches_oracle((a, pa) in schedule_strategy(), (b, pb) in schedule_strategy()) {
            let fast = frames_conflict(&a, pa, &b, pb);
            prop_assert_eq!(fast, brute_force_conflict(&a, pa, &b, pb, ORACLE_TICK_BOUND).unwrap());
            prop_assert_eq!(fast, frames_conflict(&b, pb, &a, pa));
        }

        #[test]
        fn self_conflict((a, pa) in schedule_strategy()) {
            prop_assert!(frames_conflict(&a, pa, &a, pa));
        }

        #[test]
        fn shift_equivariance(phase in 0u64..1000, size in 1u64..1500) {
            let net = line_net();
            let s = Stream::new(StreamId(0), NodeId(3), NodeId(4), 5000, size).unwrap();
            let route = Route::from_nodes(&net, vec![NodeId(3), NodeId(1), NodeId(2), NodeId(4)]).unwrap();
            prop_assert_eq!(link_occupancy(&net, &s, &route, phase), link_occupancy(&net, &s, &route, 0).shifted(phase));
        }
    }
}
