//! Stream and scenario generation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Network, NodeId, Stream, StreamId};

/// Frame sizes in bytes used throughout the evaluation.
pub const DEFAULT_SIZES: [u64; 6] = [125, 250, 500, 750, 1000, 1500];
/// Periods in ticks.
pub const DEFAULT_PERIODS: [u64; 4] = [250, 500, 1000, 2000];

fn default_sizes() -> Vec<u64> {
    DEFAULT_SIZES.to_vec()
}

fn default_periods() -> Vec<u64> {
    DEFAULT_PERIODS.to_vec()
}

/// Shape of a dynamic experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub initial_streams: usize,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub add_per_iteration: usize,
    #[serde(default)]
    pub delete_per_iteration: usize,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<u64>,
    #[serde(default = "default_periods")]
    pub periods: Vec<u64>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.periods.is_empty() {
            return Err(Error::Config("size and period sets must be nonempty".into()));
        }
        if self.sizes.contains(&0) || self.periods.contains(&0) {
            return Err(Error::Config("sizes and periods must be positive".into()));
        }
        Ok(())
    }
}

/// One update of a scenario. Deletions are either listed explicitly or drawn
/// at run time from the streams admitted at that point.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub iteration: usize,
    pub add: Vec<Stream>,
    #[serde(default)]
    pub delete: Vec<StreamId>,
    #[serde(default)]
    pub delete_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub steps: Vec<ScenarioStep>,
}

/// Streams between distinct random end devices with sizes and periods drawn
/// uniformly from the given sets. Ids start at `first_id`.
pub fn gen_streams(
    net: &Network,
    count: usize,
    sizes: &[u64],
    periods: &[u64],
    seed: u64,
    first_id: u32,
) -> Result<Vec<Stream>> {
    let devices: Vec<NodeId> = net.end_devices().collect();
    if count == 0 {
        return Ok(Vec::new());
    }
    if devices.len() < 2 {
        return Err(Error::Config("stream generation needs at least two end devices".into()));
    }
    if sizes.is_empty() || periods.is_empty() {
        return Err(Error::Config("size and period sets must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let a = rng.gen_range(0..devices.len());
            let mut b = rng.gen_range(0..devices.len() - 1);
            if b >= a {
                b += 1;
            }
            let size = *sizes.choose(&mut rng).expect("nonempty");
            let period = *periods.choose(&mut rng).expect("nonempty");
            Stream::new(StreamId(first_id + i as u32), devices[a], devices[b], period, size)
        })
        .collect()
}

/// Initial batch followed by `iterations` add/delete steps. Every step uses
/// its own derived seed so changing the iteration count keeps earlier steps.
pub fn gen_scenario(net: &Network, spec: &ScenarioSpec, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let mut next = 0u32;
    let mut steps = Vec::with_capacity(spec.iterations + 1);
    for it in 0..=spec.iterations {
        let count = if it == 0 { spec.initial_streams } else { spec.add_per_iteration };
        let add = gen_streams(net, count, &spec.sizes, &spec.periods, derive(seed, it as u64), next)?;
        next += count as u32;
        steps.push(ScenarioStep {
            iteration: it,
            add,
            delete: Vec::new(),
            delete_count: if it == 0 { 0 } else { spec.delete_per_iteration },
        });
    }
    Ok(Scenario { steps })
}

/// Resolves the deletions of a step against the currently admitted streams:
/// explicit ids that are still admitted, then `delete_count` random picks
/// among the rest.
pub fn resolve_deletions(step: &ScenarioStep, admitted: &[StreamId], seed: u64) -> Vec<StreamId> {
    let live: HashSet<StreamId> = admitted.iter().copied().collect();
    let mut out: Vec<StreamId> = Vec::new();
    let mut taken = HashSet::new();
    for id in &step.delete {
        if live.contains(id) && taken.insert(*id) {
            out.push(*id);
        }
    }
    let mut pool: Vec<StreamId> = admitted.iter().copied().filter(|id| !taken.contains(id)).collect();
    pool.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, step.iteration as u64));
    let k = step.delete_count.min(pool.len());
    out.extend(pool.partial_shuffle(&mut rng, k).0.iter().copied());
    out
}

/// SplitMix64 finalizer over `seed + salt`; used to derive independent
/// sub-seeds.
pub fn derive(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
