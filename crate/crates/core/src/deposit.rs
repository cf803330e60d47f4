//! Exact continuous-time simulation of multilayer deposition with screening.
//!
//! Every vertex carries an independent unit-rate Poisson clock. An arriving
//! particle cannot pass particles already deposited on the vertex or on its
//! neighbors, so it settles one layer above the highest top in the closed
//! neighborhood. The superposition of the clocks is simulated directly:
//! exponential gaps of rate `|V|`, each event at a uniformly chosen vertex.
//!
//! Replica streams are derived from the master seed with
//! `replica_seed = splitmix64(splitmix64(seed) ^ index)`; random trees for a
//! replica use `splitmix64(replica_seed ^ TREE_STREAM)`. Replicas run in
//! parallel and are reduced in index order, so results are bit-identical for a
//! given seed regardless of thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{DensityCurve, Estimate, Series};
use crate::degree::DegreeDistribution;
use crate::tree::{build_random_ball, GraphError, GraphInstance};

/// Largest number of layers whose occupancy can be tracked per vertex.
pub const MAX_TRACK_LAYERS: u32 = 32;
pub const DEFAULT_TRACK_LAYERS: u32 = 8;
const TREE_STREAM: u64 = 0x7472_6565;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("sample times are empty")]
    NoSampleTimes,
    #[error("sample times must be positive and strictly increasing")]
    UnsortedSampleTimes,
    #[error("sample time {time} lies beyond the horizon {horizon}")]
    BeyondHorizon { time: f64, horizon: f64 },
    #[error("at least one replica is required")]
    NoReplicas,
    #[error("tracked layers must be in 2..={MAX_TRACK_LAYERS}, got {0}")]
    TrackLayers(u32),
    #[error("pattern {pattern} has {len} layers but only {track} are tracked")]
    PatternTooLong { pattern: String, len: usize, track: u32 },
    #[error("layer {layer} is outside 1..={track}")]
    LayerOutOfRange { layer: u32, track: u32 },
    #[error("invalid layer pattern {0:?}; expected a string of 0/1")]
    BadPattern(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-vertex state: arrivals, top occupied height and low-layer occupancy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteState {
    /// Particles that have arrived at the vertex.
    pub arrivals: u32,
    /// Highest occupied layer, 0 when empty.
    pub top: u32,
    /// Bit `h - 1` set when layer `h` is occupied (tracked layers only).
    pub mask: u32,
}

impl SiteState {
    pub fn occupied(&self, layer: u32) -> bool {
        (1..=MAX_TRACK_LAYERS).contains(&layer) && self.mask & (1 << (layer - 1)) != 0
    }

    /// Two-layer code `m = (layer 1) + 2 (layer 2)`.
    pub fn two_layer_code(&self) -> u8 {
        (self.mask & 0b11) as u8
    }

    /// Records a particle landing at `height`.
    pub fn deposit(&mut self, height: u32, track_layers: u32) {
        debug_assert!(height > self.top);
        self.arrivals += 1;
        self.top = height;
        if height <= track_layers {
            self.mask |= 1 << (height - 1);
        }
    }
}

/// Landing height of a particle arriving at `site`: one above the highest top
/// over the site and its neighbors.
pub fn settle_height<'a>(
    site: &SiteState,
    neighbors: impl IntoIterator<Item = &'a SiteState>,
) -> u32 {
    1 + neighbors.into_iter().map(|s| s.top).fold(site.top, u32::max)
}

/// Exact occupancy of the lowest layers of one vertex.
///
/// Textual form lists the highest layer first, so `"0101"` means layers 1 and
/// 3 occupied and layers 2 and 4 empty. Internally `bits[0]` is layer 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LayerPattern {
    bits: Vec<bool>,
}

impl LayerPattern {
    /// Pattern from occupancy bits ordered from layer 1 upwards.
    pub fn from_bottom_up(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bottom_up(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn matches(&self, site: &SiteState) -> bool {
        self.bits.iter().enumerate().all(|(i, &b)| site.occupied(i as u32 + 1) == b)
    }
}

impl FromStr for LayerPattern {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.len() > MAX_TRACK_LAYERS as usize {
            return Err(SimError::BadPattern(s.to_string()));
        }
        let mut bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(SimError::BadPattern(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        bits.reverse();
        Ok(Self { bits })
    }
}

impl TryFrom<String> for LayerPattern {
    type Error = SimError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LayerPattern> for String {
    fn from(p: LayerPattern) -> Self {
        p.to_string()
    }
}

impl fmt::Display for LayerPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter().rev() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observable {
    Layer(u32),
    Pattern(LayerPattern),
}

impl Observable {
    fn value(&self, site: &SiteState) -> bool {
        match self {
            Observable::Layer(k) => site.occupied(*k),
            Observable::Pattern(p) => p.matches(site),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Layer(k) => write!(f, "layer:{k}"),
            Observable::Pattern(p) => write!(f, "pattern:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulated time horizon `T`.
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub replicas: u32,
    pub track_layers: u32,
    pub seed: u64,
    /// Layers whose density is recorded.
    pub layers: Vec<u32>,
    pub patterns: Vec<LayerPattern>,
}

impl SimConfig {
    pub fn new(sample_times: Vec<f64>, replicas: u32, seed: u64) -> Self {
        let horizon = sample_times.last().copied().unwrap_or(0.0);
        Self {
            horizon,
            sample_times,
            replicas,
            track_layers: DEFAULT_TRACK_LAYERS,
            seed,
            layers: vec![1, 2],
            patterns: Vec::new(),
        }
    }

    pub fn with_patterns(mut self, patterns: Vec<LayerPattern>) -> Self {
        self.patterns = patterns;
        self
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<(), SimError> {
        if self.sample_times.is_empty() {
            return Err(SimError::NoSampleTimes);
        }
        let increasing = self.sample_times.windows(2).all(|w| w[0] < w[1]);
        if !increasing || !(self.sample_times[0] > 0.0) {
            return Err(SimError::UnsortedSampleTimes);
        }
        let last = *self.sample_times.last().unwrap();
        if last > self.horizon {
            return Err(SimError::BeyondHorizon { time: last, horizon: self.horizon });
        }
        if self.replicas == 0 {
            return Err(SimError::NoReplicas);
        }
        if !(2..=MAX_TRACK_LAYERS).contains(&self.track_layers) {
            return Err(SimError::TrackLayers(self.track_layers));
        }
        for &layer in &self.layers {
            if layer == 0 || layer > self.track_layers {
                return Err(SimError::LayerOutOfRange { layer, track: self.track_layers });
            }
        }
        for p in &self.patterns {
            if p.len() > self.track_layers as usize {
                return Err(SimError::PatternTooLong {
                    pattern: p.to_string(),
                    len: p.len(),
                    track: self.track_layers,
                });
            }
        }
        Ok(())
    }

    pub fn observables(&self) -> Vec<Observable> {
        self.layers
            .iter()
            .map(|&k| Observable::Layer(k))
            .chain(self.patterns.iter().cloned().map(Observable::Pattern))
            .collect()
    }
}

/// A single arrival, reported to observers after the state update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalEvent {
    pub time: f64,
    pub vertex: u32,
    pub before: SiteState,
    pub after: SiteState,
}

/// States of the measured vertices at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaTrace {
    pub times: Vec<f64>,
    /// `sites[i][j]`: state of the `j`-th measured vertex at `times[i]`.
    pub sites: Vec<Vec<SiteState>>,
}

/// Simulates one realization on `graph`, recording the interior vertices.
pub fn run_replica(graph: &GraphInstance, config: &SimConfig, replica_seed: u64) -> ReplicaTrace {
    run_replica_with(graph, &graph.interior, config, replica_seed, |_, _| {})
}

/// Like [`run_replica`], measuring `measured` and calling `observer` after
/// every arrival with the event and the full post-event state.
pub fn run_replica_with<F>(
    graph: &GraphInstance,
    measured: &[u32],
    config: &SimConfig,
    replica_seed: u64,
    mut observer: F,
) -> ReplicaTrace
where
    F: FnMut(&ArrivalEvent, &[SiteState]),
{
    let n = graph.vertex_count();
    let samples = &config.sample_times;
    let mut states = vec![SiteState::default(); n];
    let mut sites = Vec::with_capacity(samples.len());
    let mut rng = ChaCha8Rng::seed_from_u64(replica_seed);
    let total_rate = n as f64;
    let mut t = 0.0;
    let mut next = 0;
    while next < samples.len() {
        let gap: f64 = rng.sample(Exp1);
        t += gap / total_rate;
        while next < samples.len() && samples[next] < t {
            sites.push(measured.iter().map(|&v| states[v as usize]).collect());
            next += 1;
        }
        if next == samples.len() {
            break;
        }
        let v = rng.random_range(0..n);
        let before = states[v];
        let height = settle_height(
            &before,
            graph.adjacency[v].iter().map(|&u| &states[u as usize]),
        );
        states[v].deposit(height, config.track_layers);
        let event = ArrivalEvent { time: t, vertex: v as u32, before, after: states[v] };
        observer(&event, &states);
    }
    ReplicaTrace { times: samples.clone(), sites }
}

/// Where replicas are simulated.
#[derive(Debug, Clone)]
pub enum Substrate {
    /// One fixed graph, measured on its interior.
    Fixed(GraphInstance),
    /// A fresh random-tree ball per replica.
    RandomTrees { dist: DegreeDistribution, radius: u32, buffer: u32, measure: Measure },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// The root only; estimates the tree-averaged density at a fixed vertex.
    Root,
    /// All interior vertices; lower variance, but degrees there are size biased.
    Interior,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replica_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

pub fn tree_seed(replica_seed: u64) -> u64 {
    splitmix64(replica_seed ^ TREE_STREAM)
}

/// Per-replica observable fractions, `[time][observable]`.
fn replica_fractions(
    substrate: &Substrate,
    config: &SimConfig,
    observables: &[Observable],
    index: u64,
) -> Result<Vec<Vec<f64>>, SimError> {
    let seed = replica_seed(config.seed, index);
    let trace = match substrate {
        Substrate::Fixed(graph) => run_replica(graph, config, seed),
        Substrate::RandomTrees { dist, radius, buffer, measure } => {
            let graph = build_random_ball(dist, *radius, *buffer, tree_seed(seed))?;
            let measured = match measure {
                Measure::Root => vec![graph.root.unwrap_or(0)],
                Measure::Interior => graph.interior.clone(),
            };
            run_replica_with(&graph, &measured, config, seed, |_, _| {})
        }
    };
    Ok(trace
        .sites
        .iter()
        .map(|sites| {
            let count = sites.len().max(1) as f64;
            observables
                .iter()
                .map(|obs| sites.iter().filter(|s| obs.value(s)).count() as f64 / count)
                .collect()
        })
        .collect())
}

/// Runs `config.replicas` replicas and reports, for every sample time and
/// observable, the mean of the per-replica fractions and its standard error
/// over replicas. Vertices inside one replica are correlated, so replicas are
/// the unit of independence.
pub fn estimate_densities(substrate: &Substrate, config: &SimConfig) -> Result<DensityCurve, SimError> {
    config.validate()?;
    let observables = config.observables();
    let per_replica = (0..config.replicas as u64)
        .into_par_iter()
        .map(|i| replica_fractions(substrate, config, &observables, i))
        .collect::<Result<Vec<_>, _>>()?;

    let reps = per_replica.len();
    let series = observables
        .iter()
        .enumerate()
        .map(|(o, obs)| Series {
            observable: obs.to_string(),
            values: (0..config.sample_times.len())
                .map(|ti| summarize(per_replica.iter().map(|r| r[ti][o]), reps))
                .collect(),
        })
        .collect();
    Ok(DensityCurve { times: config.sample_times.clone(), series })
}

fn summarize(values: impl Iterator<Item = f64> + Clone, n: usize) -> Estimate {
    let mean = values.clone().sum::<f64>() / n as f64;
    let stderr = (n > 1).then(|| {
        let var = values.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    Estimate { mean, stderr, n: Some(n as u64) }
}

/// Fraction of measured vertices whose lowest layers match `pattern` exactly.
pub fn estimate_pattern(
    substrate: &Substrate,
    config: &SimConfig,
    pattern: &LayerPattern,
) -> Result<Series, SimError> {
    let mut cfg = config.clone();
    cfg.layers.clear();
    cfg.patterns = vec![pattern.clone()];
    let curve = estimate_densities(substrate, &cfg)?;
    Ok(curve.series.into_iter().next().expect("one pattern series"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_cycle, build_regular_ball};

    fn site(arrivals: u32, top: u32, mask: u32) -> SiteState {
        SiteState { arrivals, top, mask }
    }

    #[test]
    fn settle_rate_table() {
        let empty = SiteState::default();
        // 0 → 1: site and all neighbors empty
        assert_eq!(settle_height(&empty, &[empty, empty]), 1);
        // 0 → 2: one neighbor with a single first-layer particle
        assert_eq!(settle_height(&empty, &[site(1, 1, 1), empty, empty]), 2);
        // 1 → 3: site holds one first-layer particle, neighbors empty
        let one = site(1, 1, 1);
        let h = settle_height(&one, &[empty, empty]);
        assert_eq!(h, 2);
        let mut after = one;
        after.deposit(h, 8);
        assert_eq!(after.two_layer_code(), 3);
    }

    #[test]
    fn screening_above_layer_two() {
        let empty = SiteState::default();
        let h = settle_height(&empty, &[site(1, 2, 0b10)]);
        assert_eq!(h, 3);
        let mut s = empty;
        s.deposit(h, 8);
        assert_eq!(s.two_layer_code(), 0);
        assert_eq!(s.arrivals, 1);
        // untracked heights keep the mask unchanged
        let mut tall = site(3, 9, 0b1);
        tall.deposit(12, 8);
        assert_eq!(tall.mask, 0b1);
        assert_eq!(tall.top, 12);
    }

    #[test]
    fn pattern_orientation() {
        let p: LayerPattern = "0101".parse().unwrap();
        assert_eq!(p.bottom_up(), &[true, false, true, false]);
        assert_eq!(p.to_string(), "0101");
        assert!(p.matches(&site(2, 3, 0b101)));
        assert!(!p.matches(&site(3, 4, 0b1101)));
        assert!("01x".parse::<LayerPattern>().is_err());
        assert!("".parse::<LayerPattern>().is_err());
        let m3: LayerPattern = "11".parse().unwrap();
        assert!(m3.matches(&site(2, 2, 0b11)));
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(vec![1.0, 2.0], 2, 0);
        assert!(ok.validate().is_ok());
        assert_eq!(SimConfig::new(vec![], 1, 0).validate(), Err(SimError::NoSampleTimes));
        assert_eq!(SimConfig::new(vec![2.0, 1.0], 1, 0).validate(), Err(SimError::UnsortedSampleTimes));
        assert_eq!(SimConfig::new(vec![1.0], 0, 0).validate(), Err(SimError::NoReplicas));
        let mut beyond = ok.clone();
        beyond.horizon = 1.5;
        assert!(matches!(beyond.validate(), Err(SimError::BeyondHorizon { .. })));
        let mut long = ok.clone();
        long.track_layers = 3;
        long.patterns = vec!["0101".parse().unwrap()];
        assert!(matches!(long.validate(), Err(SimError::PatternTooLong { len: 4, .. })));
    }

    #[test]
    fn pattern_longer_than_tracked_is_rejected() {
        let g = Substrate::Fixed(build_cycle(10).unwrap());
        let mut cfg = SimConfig::new(vec![1.0], 2, 0);
        cfg.track_layers = 2;
        let err = estimate_pattern(&g, &cfg, &"0101".parse().unwrap()).unwrap_err();
        assert!(matches!(err, SimError::PatternTooLong { .. }));
    }

    #[test]
    fn tiny_time_is_empty() {
        let g = Substrate::Fixed(build_cycle(200).unwrap());
        let curve = estimate_densities(&g, &SimConfig::new(vec![1e-9], 4, 1)).unwrap();
        assert!(curve.series.iter().all(|s| s.values[0].mean == 0.0));
    }

    #[test]
    fn single_replica_has_no_stderr() {
        let g = Substrate::Fixed(build_cycle(50).unwrap());
        let curve = estimate_densities(&g, &SimConfig::new(vec![1.0], 1, 1)).unwrap();
        assert_eq!(curve.series[0].values[0].stderr, None);
        assert_eq!(curve.series[0].values[0].n, Some(1));
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_ne!(replica_seed(7, 0), replica_seed(7, 1));
        assert_ne!(replica_seed(7, 0), replica_seed(8, 0));
        assert_eq!(replica_seed(7, 3), replica_seed(7, 3));
        assert_ne!(tree_seed(5), 5);
    }

    #[test]
    fn replica_trace_shape() {
        let g = build_regular_ball(3, 4, 2).unwrap();
        let cfg = SimConfig::new(vec![0.5, 1.0, 3.0], 1, 0);
        let trace = run_replica(&g, &cfg, 11);
        assert_eq!(trace.sites.len(), 3);
        assert!(trace.sites.iter().all(|s| s.len() == g.interior.len()));
        assert_eq!(trace, run_replica(&g, &cfg, 11));
    }
}
