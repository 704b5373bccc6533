//! Scoring against ground truth, the d-separation oracle, and the
//! benchmark harness.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::citest::CiTest;
use crate::error::{Error, Result};
use crate::estimator::{CITestResult, EstimatorConfig};
use crate::graph::{ExtendedSummaryGraph, Mark, SliceNode};
use crate::orient_fci::fcigce;
use crate::orient_pc::pcgce;
use crate::simulate::{generate, GroundTruth, StructureId};
use crate::skeleton::{complexity_bound, SkeletonOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// A circle matches any mark.
    #[default]
    Compatible,
    /// Marks must match exactly.
    Strict,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compatible" => Ok(Self::Compatible),
            "strict" => Ok(Self::Strict),
            other => Err(Error::InvalidConfig(format!("unknown scoring mode {other:?} (compatible, strict)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Measure {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Measure {
    /// Precision of an empty prediction and recall of an empty truth are
    /// taken as 1, so scoring a graph against itself always gives 1.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { tp, fp, fn_, precision, recall, f1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    /// Relations between distinct series.
    pub f1_cross: f64,
    /// Self relations; absent when the truth has none.
    pub f1_self: Option<f64>,
    pub cross: Measure,
    pub self_edges: Option<Measure>,
}

fn marks_match(predicted: Mark, truth: Mark, mode: ScoringMode) -> bool {
    predicted == truth || (mode == ScoringMode::Compatible && predicted == Mark::Circle)
}

pub fn f1_scores(
    predicted: &ExtendedSummaryGraph,
    truth: &ExtendedSummaryGraph,
    mode: ScoringMode,
) -> Result<ScoreReport> {
    if predicted.d() != truth.d() {
        return Err(Error::DimensionMismatch { expected: truth.d(), found: predicted.d() });
    }
    // [cross, self] counts of (tp, predicted, true)
    let mut counts = [[0usize; 3]; 2];
    for e in predicted.edges() {
        let slot = usize::from(e.is_self());
        counts[slot][1] += 1;
        if let Some((ta, tb)) = truth.edge(e.a, e.b) {
            if marks_match(e.mark_a, ta, mode) && marks_match(e.mark_b, tb, mode) {
                counts[slot][0] += 1;
            }
        }
    }
    for e in truth.edges() {
        counts[usize::from(e.is_self())][2] += 1;
    }
    let measure = |[tp, p, t]: [usize; 3]| Measure::from_counts(tp, p - tp, t - tp);
    let cross = measure(counts[0]);
    let self_edges = (counts[1][2] > 0).then(|| measure(counts[1]));
    Ok(ScoreReport { f1_cross: cross.f1, f1_self: self_edges.map(|m| m.f1), cross, self_edges })
}

/// A two-slice DAG prepared for d-separation queries.
#[derive(Clone, Debug)]
pub struct Dag {
    d: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Fails unless every edge of `graph` is directed.
    pub fn new(graph: &ExtendedSummaryGraph) -> Result<Self> {
        let d = graph.d();
        let n = graph.node_count();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for e in graph.edges() {
            let (from, to) = match (e.mark_a, e.mark_b) {
                (Mark::Tail, Mark::Arrow) => (e.a, e.b),
                (Mark::Arrow, Mark::Tail) => (e.b, e.a),
                _ => return Err(Error::InvariantViolation(format!("edge {e} is not directed"))),
            };
            parents[to.index(d)].push(from.index(d));
            children[from.index(d)].push(to.index(d));
        }
        if !graph.directed_is_acyclic() {
            return Err(Error::InvariantViolation("graph has a directed cycle".into()));
        }
        Ok(Self { d, parents, children })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Whether `a` and `b` are d-separated given `s`.
    pub fn d_separated(&self, a: SliceNode, b: SliceNode, s: &[SliceNode]) -> bool {
        let n = self.parents.len();
        let (a, b) = (a.index(self.d), b.index(self.d));
        let mut given = vec![false; n];
        for c in s {
            given[c.index(self.d)] = true;
        }
        if given[a] || given[b] {
            return true;
        }
        // ancestors of the conditioning set, itself included
        let mut anc = given.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&i| given[i]).collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !anc[p] {
                    anc[p] = true;
                    stack.push(p);
                }
            }
        }
        // (node, arrived from a child) states of an active trail
        let mut seen = vec![[false; 2]; n];
        let mut queue = VecDeque::from([(a, true)]);
        seen[a][1] = true;
        while let Some((v, up)) = queue.pop_front() {
            if v == b {
                return false;
            }
            let mut visit = |w: usize, up: bool, queue: &mut VecDeque<(usize, bool)>| {
                if !seen[w][usize::from(up)] {
                    seen[w][usize::from(up)] = true;
                    queue.push_back((w, up));
                }
            };
            if up && !given[v] {
                for &p in &self.parents[v] {
                    visit(p, true, &mut queue);
                }
                for &c in &self.children[v] {
                    visit(c, false, &mut queue);
                }
            } else if !up {
                if !given[v] {
                    for &c in &self.children[v] {
                        visit(c, false, &mut queue);
                    }
                }
                if anc[v] {
                    for &p in &self.parents[v] {
                        visit(p, true, &mut queue);
                    }
                }
            }
        }
        true
    }
}

/// d-separation in the latent-inclusive graph of `truth`.
pub fn dsep_oracle(truth: &GroundTruth, a: SliceNode, b: SliceNode, s: &[SliceNode]) -> bool {
    Dag::new(&truth.latent_graph()).expect("latent graphs are DAGs").d_separated(a, b, s)
}

/// Perfect independence information read off a DAG. Only the first `names.len()`
/// series are visible to the discovery algorithms.
#[derive(Clone, Debug)]
pub struct OracleTester {
    dag: Dag,
    names: Vec<String>,
}

impl OracleTester {
    pub fn new(dag: &ExtendedSummaryGraph, names: Vec<String>) -> Result<Self> {
        if names.is_empty() || names.len() > dag.d() {
            return Err(Error::DimensionMismatch { expected: dag.d(), found: names.len() });
        }
        Ok(Self { dag: Dag::new(dag)?, names })
    }

    pub fn for_structure(structure: StructureId) -> Self {
        let names = crate::graph::default_names(structure.d());
        Self::new(&crate::simulate::latent_graph(structure), names).expect("latent graphs are DAGs")
    }
}

impl CiTest for OracleTester {
    fn test(&self, x: SliceNode, y: SliceNode, conditioners: &[SliceNode]) -> Result<CITestResult> {
        let independent = self.dag.d_separated(x, y, conditioners);
        Ok(CITestResult {
            statistic: if independent { 0.0 } else { 1.0 },
            p_value: if independent { 1.0 } else { 0.0 },
            independent,
            n_used: 0,
        })
    }

    fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pcgce,
    Fcigce,
}

impl Algorithm {
    pub fn for_structure(structure: StructureId) -> Self {
        if structure.has_hidden() {
            Self::Fcigce
        } else {
            Self::Pcgce
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pcgce => "pcgce",
            Self::Fcigce => "fcigce",
        }
    }

    /// Estimator defaults, with the larger significance level for FCIGCE.
    pub fn default_config(self) -> EstimatorConfig {
        match self {
            Self::Pcgce => EstimatorConfig::default(),
            Self::Fcigce => EstimatorConfig::hidden_causes(),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcgce" => Ok(Self::Pcgce),
            "fcigce" => Ok(Self::Fcigce),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?} (pcgce, fcigce)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub n_datasets: usize,
    pub length: usize,
    /// Dataset `i` is generated from `seed + i`.
    pub seed: u64,
    pub estimator: EstimatorConfig,
    /// Overrides `estimator.alpha`; `None` uses the algorithm's default.
    pub alpha: Option<f64>,
    pub options: SkeletonOptions,
    pub scoring: ScoringMode,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_datasets: 10,
            length: 1000,
            seed: 0,
            estimator: EstimatorConfig::default(),
            alpha: None,
            options: SkeletonOptions::default(),
            scoring: ScoringMode::Compatible,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub dataset_seed: u64,
    pub scores: ScoreReport,
    pub total_tests: usize,
    pub skeleton_tests: usize,
    /// Conditioning levels run by the skeleton search, level 0 included.
    pub kappa: usize,
    pub seconds: f64,
}

impl RunResult {
    /// Whether the skeleton test count stays within the worst-case bound.
    pub fn within_bound(&self, d: usize) -> bool {
        self.skeleton_tests as f64 <= complexity_bound(d, self.kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureSummary {
    pub structure: StructureId,
    pub algorithm: Algorithm,
    pub f1_cross: MeanStd,
    pub f1_self: Option<MeanStd>,
    pub mean_seconds: f64,
    pub total_tests: usize,
    pub runs: Vec<RunResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub length: usize,
    pub rows: Vec<StructureSummary>,
}

fn run_one(structure: StructureId, dataset_seed: u64, cfg: &BenchmarkConfig) -> Result<RunResult> {
    let algorithm = Algorithm::for_structure(structure);
    let alpha = cfg.alpha.unwrap_or(algorithm.default_config().alpha);
    let est = EstimatorConfig { alpha, ..cfg.estimator.clone() };
    let (ds, truth) = generate(structure, cfg.length, dataset_seed)?;
    let start = Instant::now();
    let found = match algorithm {
        Algorithm::Pcgce => pcgce(&ds, &est, &cfg.options)?,
        Algorithm::Fcigce => fcigce(&ds, &est, &cfg.options)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    Ok(RunResult {
        dataset_seed,
        scores: f1_scores(&found.graph, &truth.extended_graph, cfg.scoring)?,
        total_tests: found.log.total_tests,
        skeleton_tests: found.log.skeleton_tests(),
        kappa: found.log.max_level().map_or(0, |l| l + 1),
        seconds,
    })
}

/// Runs the matching algorithm on `n_datasets` simulations of every
/// structure and summarizes the scores.
pub fn benchmark(structures: &[StructureId], cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.n_datasets == 0 {
        return Err(Error::InvalidConfig("n_datasets must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &structure in structures {
        let runs: Vec<RunResult> = (0..cfg.n_datasets as u64)
            .into_par_iter()
            .map(|i| run_one(structure, cfg.seed.wrapping_add(i), cfg))
            .collect::<Result<_>>()?;
        let cross: Vec<f64> = runs.iter().map(|r| r.scores.f1_cross).collect();
        let selfs: Vec<f64> = runs.iter().filter_map(|r| r.scores.f1_self).collect();
        rows.push(StructureSummary {
            structure,
            algorithm: Algorithm::for_structure(structure),
            f1_cross: MeanStd::of(&cross),
            f1_self: (!selfs.is_empty()).then(|| MeanStd::of(&selfs)),
            mean_seconds: runs.iter().map(|r| r.seconds).sum::<f64>() / runs.len() as f64,
            total_tests: runs.iter().map(|r| r.total_tests).sum(),
            runs,
        });
    }
    Ok(BenchmarkReport { length: cfg.length, rows })
}

impl BenchmarkReport {
    pub fn to_markdown(&self) -> String {
        let cell = |m: Option<MeanStd>| m.map_or("-".to_string(), |m| format!("{:.2} ± {:.2}", m.mean, m.std));
        let mut out = String::from("| structure | algorithm | F p≠q | F p=q | datasets | tests | mean time (s) |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {:.1} |",
                r.structure,
                r.algorithm.name(),
                cell(Some(r.f1_cross)),
                cell(r.f1_self),
                r.runs.len(),
                r.total_tests,
                r.mean_seconds
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "structure,algorithm,length,datasets,f1_cross_mean,f1_cross_std,f1_self_mean,f1_self_std,total_tests,mean_seconds\n",
        );
        for r in &self.rows {
            let (sm, ss) =
                r.f1_self.map_or((String::new(), String::new()), |m| (m.mean.to_string(), m.std.to_string()));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.structure,
                r.algorithm.name(),
                self.length,
                r.runs.len(),
                r.f1_cross.mean,
                r.f1_cross.std,
                sm,
                ss,
                r.total_tests,
                r.mean_seconds
            );
        }
        out
    }
}
