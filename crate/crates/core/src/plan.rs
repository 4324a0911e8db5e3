//! Traffic plans and their end-to-end validation.
//!
//! [`validate_plan`] is deliberately self-contained: it recomputes frame
//! propagation from the raw topology and sweeps every link over the global
//! hypercycle, sharing no code with the pairwise conflict predicate used to
//! build conflict graphs.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Network, NodeId, Stream, StreamId};

/// Largest global hypercycle the sweep is willing to unroll.
pub const MAX_VALIDATION_HYPERCYCLE: u64 = 100_000_000;

/// Route and phase selected for one admitted stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedStream {
    #[serde(flatten)]
    pub stream: Stream,
    /// Index into the stream's candidate routes.
    pub route_index: usize,
    /// Node sequence from talker to listener.
    pub route: Vec<NodeId>,
    pub phase: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficPlan {
    pub iteration: usize,
    pub streams: Vec<PlannedStream>,
}

impl TrafficPlan {
    pub fn get(&self, id: StreamId) -> Option<&PlannedStream> {
        self.streams.iter().find(|p| p.stream.id == id)
    }

    pub fn stream_ids(&self) -> impl Iterator<Item = StreamId> + '_ {
        self.streams.iter().map(|p| p.stream.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanViolation {
    DuplicateStream(StreamId),
    InvalidStream { stream: StreamId, reason: String },
    InvalidRoute { stream: StreamId, reason: String },
    DeadlineMiss { stream: StreamId, arrival: u64, deadline: u64 },
    Overlap { from: NodeId, to: NodeId, streams: (StreamId, StreamId), start: u64, end: u64 },
    HypercycleTooLarge,
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::DuplicateStream(s) => write!(f, "stream {s} planned twice"),
            PlanViolation::InvalidStream { stream, reason } => write!(f, "stream {stream}: {reason}"),
            PlanViolation::InvalidRoute { stream, reason } => write!(f, "route of {stream}: {reason}"),
            PlanViolation::DeadlineMiss { stream, arrival, deadline } => {
                write!(f, "deadline miss: {stream} arrives at {arrival} > {deadline}")
            }
            PlanViolation::Overlap { from, to, streams, start, end } => write!(
                f,
                "overlap on link {from}->{to} between {} and {} in ticks [{start}, {end})",
                streams.0, streams.1
            ),
            PlanViolation::HypercycleTooLarge => {
                write!(f, "hypercycle exceeds {MAX_VALIDATION_HYPERCYCLE} ticks")
            }
        }
    }
}

struct Transmission {
    stream: StreamId,
    start: u64,
    end: u64,
    period: u64,
}

/// Checks that no two frames share a link at the same tick and that every
/// frame arrives within its deadline.
pub fn validate_plan(net: &Network, plan: &TrafficPlan) -> Result<(), Vec<PlanViolation>> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    // (from, to) -> first-period transmissions on that directed link.
    let mut per_link: BTreeMap<(NodeId, NodeId), Vec<Transmission>> = BTreeMap::new();
    let mut hyper: Option<u64> = Some(1);

    for p in &plan.streams {
        let s = &p.stream;
        if !seen.insert(s.id) {
            violations.push(PlanViolation::DuplicateStream(s.id));
            continue;
        }
        if let Err(e) = s.check_in(net) {
            violations.push(PlanViolation::InvalidStream { stream: s.id, reason: e.to_string() });
            continue;
        }
        if let Err(reason) = check_route(net, s, &p.route) {
            violations.push(PlanViolation::InvalidRoute { stream: s.id, reason });
            continue;
        }

        // Store-and-forward, no wait: each hop starts once the frame is fully
        // received and processed by the bridge in front of the link.
        let mut t = p.phase;
        let mut arrival = t;
        for (h, w) in p.route.windows(2).enumerate() {
            let link = &net.links()[net.link_between(w[0], w[1]).expect("checked").index()];
            if h > 0 {
                t += net.node(w[0]).map_or(0, |n| n.processing_delay);
            }
            let bits = s.size * 8;
            let end = t + bits / link.rate + u64::from(bits % link.rate != 0);
            per_link.entry((w[0], w[1])).or_default().push(Transmission {
                stream: s.id,
                start: t,
                end,
                period: s.period,
            });
            arrival = end + link.propagation_delay;
            t = arrival;
        }
        if arrival > s.deadline {
            violations.push(PlanViolation::DeadlineMiss { stream: s.id, arrival, deadline: s.deadline });
        }
        hyper = hyper.and_then(|h| {
            let g = num_integer::gcd(h, s.period);
            (h / g).checked_mul(s.period)
        });
    }

    let Some(hyper) = hyper.filter(|&h| h <= MAX_VALIDATION_HYPERCYCLE) else {
        violations.push(PlanViolation::HypercycleTooLarge);
        return Err(violations);
    };

    for ((from, to), txs) in &per_link {
        let mut frames: Vec<(u64, u64, StreamId)> = Vec::new();
        for tx in txs {
            let mut k = 0;
            while k * tx.period < hyper {
                frames.push((tx.start + k * tx.period, tx.end + k * tx.period, tx.stream));
                k += 1;
            }
        }
        frames.sort_unstable();
        // Sweep: compare each frame with the latest-ending earlier frame.
        let mut reach: Option<(u64, StreamId)> = None;
        for &(start, end, stream) in &frames {
            if let Some((busy_until, owner)) = reach {
                if start < busy_until {
                    violations.push(PlanViolation::Overlap {
                        from: *from,
                        to: *to,
                        streams: (owner, stream),
                        start,
                        end: busy_until.min(end),
                    });
                }
                if end > busy_until {
                    reach = Some((end, stream));
                }
            } else {
                reach = Some((end, stream));
            }
        }
        // Frames running past the hypercycle wrap onto its start.
        if let Some((busy_until, owner)) = reach {
            if busy_until > hyper {
                if let Some(&(start, _, stream)) = frames.first() {
                    if start < busy_until - hyper {
                        violations.push(PlanViolation::Overlap {
                            from: *from,
                            to: *to,
                            streams: (owner, stream),
                            start,
                            end: busy_until - hyper,
                        });
                    }
                }
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn check_route(net: &Network, s: &Stream, route: &[NodeId]) -> Result<(), String> {
    if route.len() < 2 {
        return Err("fewer than two nodes".into());
    }
    if route[0] != s.src || route[route.len() - 1] != s.dst {
        return Err("does not connect src to dst".into());
    }
    let mut seen = HashSet::new();
    if !route.iter().all(|n| seen.insert(*n)) {
        return Err("repeats a node".into());
    }
    if let Some(n) = route[1..route.len() - 1].iter().find(|&&n| !net.is_bridge(n)) {
        return Err(format!("interior node {n} is not a bridge"));
    }
    if let Some(w) = route.windows(2).find(|w| net.link_between(w[0], w[1]).is_none()) {
        return Err(format!("no link {}->{}", w[0], w[1]));
    }
    Ok(())
}
