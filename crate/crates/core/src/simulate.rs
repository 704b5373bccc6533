//! Synthetic benchmark data with known structure.
//!
//! Every series follows
//! `X^q_t = a^qq X^q_{t-1} + sum_p a^pq f_pq(X^p_{t-lag}) + 0.1 xi^q_t`
//! with per-edge coefficients and nonlinearities drawn once from the seed.
//! Hidden common causes are extra series that drive both members of a pair
//! at lag 1 and are dropped from the emitted dataset.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::graph::{default_names, ExtendedSummaryGraph, Mark, SliceNode};

pub const MIN_LENGTH: usize = 50;
pub const BURN_IN: usize = 100;
/// Largest lag of a lagged cross edge.
pub const MAX_TRUE_LAG: usize = 2;
const NOISE: f64 = 0.1;
const DIVERGENCE: f64 = 1e6;
const MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureId {
    /// Diamond with instantaneous cross edges and self loops.
    Ring4tsT0,
    /// Diamond with lagged cross edges, no self loops.
    FourtsTpos,
    /// Diamond with lagged cross edges and self loops.
    Ring4tsTpos,
    /// Seven-series chain with two hidden common causes.
    Seven2hTpos,
    /// As `Seven2hTpos`, with self loops.
    Ring7t2hTpos,
}

impl StructureId {
    pub const ALL: [StructureId; 5] = [
        StructureId::Ring4tsT0,
        StructureId::FourtsTpos,
        StructureId::Ring4tsTpos,
        StructureId::Seven2hTpos,
        StructureId::Ring7t2hTpos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructureId::Ring4tsT0 => "ring4ts_t0",
            StructureId::FourtsTpos => "fourts_tpos",
            StructureId::Ring4tsTpos => "ring4ts_tpos",
            StructureId::Seven2hTpos => "seven2h_tpos",
            StructureId::Ring7t2hTpos => "ring7t2h_tpos",
        }
    }

    pub fn has_self_loops(self) -> bool {
        matches!(self, StructureId::Ring4tsT0 | StructureId::Ring4tsTpos | StructureId::Ring7t2hTpos)
    }

    pub fn instantaneous(self) -> bool {
        self == StructureId::Ring4tsT0
    }

    pub fn has_hidden(self) -> bool {
        matches!(self, StructureId::Seven2hTpos | StructureId::Ring7t2hTpos)
    }

    /// Number of observed series.
    pub fn d(self) -> usize {
        if self.has_hidden() {
            7
        } else {
            4
        }
    }

    /// Observed cross edges as (cause, effect), 0-based.
    pub fn cross_edges(self) -> &'static [(usize, usize)] {
        if self.has_hidden() {
            &[(1, 0), (2, 1), (3, 2), (3, 4), (4, 5), (5, 6)]
        } else {
            &[(0, 1), (0, 2), (1, 3), (2, 3)]
        }
    }

    /// Observed pairs sharing a hidden common cause.
    pub fn confounded_pairs(self) -> &'static [(usize, usize)] {
        if self.has_hidden() {
            &[(6, 1), (0, 5)]
        } else {
            &[]
        }
    }
}

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StructureId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| Error::UnknownStructure(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonLinearity {
    Abs,
    Tanh,
    Sin,
    Cos,
}

impl NonLinearity {
    pub const ALL: [NonLinearity; 4] = [NonLinearity::Abs, NonLinearity::Tanh, NonLinearity::Sin, NonLinearity::Cos];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            NonLinearity::Abs => x.abs(),
            NonLinearity::Tanh => x.tanh(),
            NonLinearity::Sin => x.sin(),
            NonLinearity::Cos => x.cos(),
        }
    }
}

/// One term `coefficient * function(X^cause_{t-lag})` in the equation of
/// `effect`. Series indices at or above the observed count are hidden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub cause: usize,
    pub effect: usize,
    pub lag: usize,
    pub coefficient: f64,
    pub function: NonLinearity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundTruth {
    pub structure: StructureId,
    pub seed: u64,
    /// Observed-series graph; hidden confounding appears as `<->` edges.
    pub extended_graph: ExtendedSummaryGraph,
    /// Indices of hidden series in the simulated system (observed series
    /// come first).
    pub hidden_series: Vec<usize>,
    pub mechanisms: Vec<Mechanism>,
    /// `a^qq` for every simulated series; zero when there is no self loop.
    pub self_coefficients: Vec<f64>,
    pub names: Vec<String>,
}

impl GroundTruth {
    /// The two-slice graph over observed and hidden series, every hidden
    /// series driving its pair from the past slice.
    pub fn latent_graph(&self) -> ExtendedSummaryGraph {
        latent_graph(self.structure)
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "structure": self.structure.name(),
            "seed": self.seed,
            "series": self.names,
            "hidden_series": self.hidden_series,
            "self_coefficients": self.self_coefficients,
            "mechanisms": self.mechanisms,
            "burn_in": BURN_IN,
            "noise_scale": NOISE,
        })
    }
}

/// Observed-variable truth of a structure.
pub fn truth_graph(structure: StructureId) -> ExtendedSummaryGraph {
    let d = structure.d();
    let mut g = ExtendedSummaryGraph::empty(d).expect("d > 0");
    if structure.has_self_loops() {
        for q in 0..d {
            g.add_edge(SliceNode::past(q), SliceNode::present(q), Mark::Tail, Mark::Arrow).expect("valid edge");
        }
    }
    for &(p, q) in structure.cross_edges() {
        let cause = if structure.instantaneous() { SliceNode::present(p) } else { SliceNode::past(p) };
        g.add_edge(cause, SliceNode::present(q), Mark::Tail, Mark::Arrow).expect("valid edge");
    }
    for &(p, q) in structure.confounded_pairs() {
        g.add_edge(SliceNode::present(p), SliceNode::present(q), Mark::Arrow, Mark::Arrow).expect("valid edge");
    }
    g
}

/// Two-slice DAG including hidden series (indexed after the observed ones).
pub fn latent_graph(structure: StructureId) -> ExtendedSummaryGraph {
    let d = structure.d();
    let pairs = structure.confounded_pairs();
    let mut g = ExtendedSummaryGraph::empty(d + pairs.len()).expect("d > 0");
    let observed = truth_graph(structure);
    for e in observed.edges() {
        if e.mark_a == Mark::Arrow && e.mark_b == Mark::Arrow {
            continue;
        }
        g.add_edge(e.a, e.b, e.mark_a, e.mark_b).expect("valid edge");
    }
    for (h, &(p, q)) in pairs.iter().enumerate() {
        let l = SliceNode::past(d + h);
        g.add_edge(l, SliceNode::present(p), Mark::Tail, Mark::Arrow).expect("valid edge");
        g.add_edge(l, SliceNode::present(q), Mark::Tail, Mark::Arrow).expect("valid edge");
        if structure.has_self_loops() {
            g.add_edge(l, SliceNode::present(d + h), Mark::Tail, Mark::Arrow).expect("valid edge");
        }
    }
    g
}

fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.gen_range(0.1..=1.0);
    if rng.gen_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn draw_mechanisms(structure: StructureId, rng: &mut ChaCha8Rng) -> (Vec<Mechanism>, Vec<f64>) {
    let d = structure.d();
    let total = d + structure.confounded_pairs().len();
    let self_coefficients: Vec<f64> =
        (0..total).map(|_| if structure.has_self_loops() { rng.gen_range(0.1..=0.9) } else { 0.0 }).collect();
    let mut mechanisms = Vec::new();
    for &(cause, effect) in structure.cross_edges() {
        let lag = if structure.instantaneous() { 0 } else { rng.gen_range(1..=MAX_TRUE_LAG) };
        let coefficient = coefficient(rng);
        let function = *NonLinearity::ALL.choose(rng).expect("non-empty");
        mechanisms.push(Mechanism { cause, effect, lag, coefficient, function });
    }
    for (h, &(p, q)) in structure.confounded_pairs().iter().enumerate() {
        for effect in [p, q] {
            let coefficient = coefficient(rng);
            let function = *NonLinearity::ALL.choose(rng).expect("non-empty");
            mechanisms.push(Mechanism { cause: d + h, effect, lag: 1, coefficient, function });
        }
    }
    (mechanisms, self_coefficients)
}

/// Runs the system for `BURN_IN + length` steps; `None` on divergence.
fn run(
    total: usize,
    length: usize,
    mechanisms: &[Mechanism],
    self_coefficients: &[f64],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Vec<f64>>> {
    let steps = BURN_IN + length;
    let mut x = vec![vec![0.0; steps]; total];
    // instantaneous parents always have a smaller index, so index order
    // is a causal order within a time step
    let mut by_effect: Vec<Vec<&Mechanism>> = vec![Vec::new(); total];
    for m in mechanisms {
        by_effect[m.effect].push(m);
    }
    for t in 0..steps {
        for q in 0..total {
            let mut v = NOISE * rng.sample::<f64, _>(StandardNormal);
            if t >= 1 {
                v += self_coefficients[q] * x[q][t - 1];
            }
            for m in &by_effect[q] {
                if t >= m.lag {
                    v += m.coefficient * m.function.apply(x[m.cause][t - m.lag]);
                }
            }
            if !v.is_finite() || v.abs() > DIVERGENCE {
                return None;
            }
            x[q][t] = v;
        }
    }
    Some(x.into_iter().map(|s| s[BURN_IN..].to_vec()).collect())
}

/// Simulates `length` observations of `structure`. Deterministic in `seed`.
pub fn generate(structure: StructureId, length: usize, seed: u64) -> Result<(TimeSeriesDataset, GroundTruth)> {
    if length < MIN_LENGTH {
        return Err(Error::TooShort { length, minimum: MIN_LENGTH });
    }
    let d = structure.d();
    let total = d + structure.confounded_pairs().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let (mechanisms, self_coefficients) = draw_mechanisms(structure, &mut rng);
        let Some(mut series) = run(total, length, &mechanisms, &self_coefficients, &mut rng) else {
            continue;
        };
        series.truncate(d);
        let names = default_names(d);
        let ds = TimeSeriesDataset::new(names.clone(), series)?;
        let truth = GroundTruth {
            structure,
            seed,
            extended_graph: truth_graph(structure),
            hidden_series: (d..total).collect(),
            mechanisms,
            self_coefficients,
            names,
        };
        return Ok((ds, truth));
    }
    Err(Error::InvariantViolation(format!("{structure} diverged in {MAX_ATTEMPTS} attempts")))
}
