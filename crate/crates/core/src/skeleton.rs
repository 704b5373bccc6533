//! Order-independent skeleton search over the extended summary graph.
//!
//! Level 0 tests every edge unconditionally. Level `l` tests each surviving
//! edge against size-`l` subsets of the nodes adjacent to either endpoint,
//! taken from the graph as it stood when the level began; removals are
//! applied only once the whole level is done.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::citest::CiTest;
use crate::error::Result;
use crate::graph::{EdgeKey, ExtendedSummaryGraph, Sepset, SepsetTable, Slice, SliceNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Skeleton,
    PossibleDsep,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestRecord {
    pub stage: Stage,
    pub x: SliceNode,
    pub y: SliceNode,
    pub level: usize,
    pub conditioners: Vec<SliceNode>,
    pub statistic: f64,
    pub p_value: f64,
    pub removed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TestLog {
    pub entries: Vec<TestRecord>,
    pub total_tests: usize,
}

impl TestLog {
    fn push(&mut self, r: TestRecord) {
        self.entries.push(r);
        self.total_tests += 1;
    }

    /// Highest conditioning level at which a skeleton test ran.
    pub fn max_level(&self) -> Option<usize> {
        self.entries.iter().filter(|r| r.stage == Stage::Skeleton).map(|r| r.level).max()
    }

    pub fn skeleton_tests(&self) -> usize {
        self.entries.iter().filter(|r| r.stage == Stage::Skeleton).count()
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let node = |n: SliceNode| match n.slice {
            Slice::Past => format!("{}_past", names[n.series]),
            Slice::Present => names[n.series].clone(),
        };
        let mut out = String::from("stage,edge,level,conditioning_set,statistic,p_value,decision\n");
        for r in &self.entries {
            let cond: Vec<String> = r.conditioners.iter().map(|&c| node(c)).collect();
            let stage = match r.stage {
                Stage::Skeleton => "skeleton",
                Stage::PossibleDsep => "possible_dsep",
            };
            let _ = writeln!(
                out,
                "{},{} - {},{},\"{}\",{},{},{}",
                stage,
                node(r.x),
                node(r.y),
                r.level,
                cond.join(" "),
                r.statistic,
                r.p_value,
                if r.removed { "removed" } else { "kept" }
            );
        }
        out
    }
}

/// Worst-case number of tests, `4 d^2 (2d-1)^(kappa-1) / (kappa-1)!`, where
/// `kappa` counts the conditioning levels that were run (level 0 included).
pub fn complexity_bound(d: usize, kappa: usize) -> f64 {
    let d = d as f64;
    let levels = kappa.saturating_sub(1);
    let mut bound = 4.0 * d * d;
    for i in 1..=levels {
        bound *= (2.0 * d - 1.0) / i as f64;
    }
    bound
}

#[derive(Clone, Debug)]
pub struct SkeletonOptions {
    /// Highest conditioning-set size to try; `None` runs until no edge has
    /// enough candidates.
    pub max_level: Option<usize>,
    /// Highest conditioning-set size drawn from Possible-Dsep sets.
    pub max_pdsep_level: Option<usize>,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        Self { max_level: None, max_pdsep_level: Some(3) }
    }
}

#[derive(Clone, Debug)]
pub struct Skeleton {
    pub graph: ExtendedSummaryGraph,
    pub sepsets: SepsetTable,
    pub log: TestLog,
    /// Level-0 statistic of every edge of the complete graph.
    pub scores: BTreeMap<EdgeKey, f64>,
    /// Every (edge, conditioning set) pair already tested.
    pub tested: HashSet<(EdgeKey, Vec<SliceNode>)>,
}

/// The two endpoints of an edge in test orientation: `x` is the cause side
/// (a past node, or the present node with the smaller name) and `y` the
/// present effect.
pub(crate) fn oriented(key: EdgeKey, names: &[String]) -> (SliceNode, SliceNode) {
    let (a, b) = key.nodes();
    if a.is_present() && names[b.series] < names[a.series] {
        (b, a)
    } else {
        (a, b)
    }
}

/// Candidate conditioners ranked by their level-0 dependence with the
/// effect node, strongest first; ties broken by series name, then slice.
pub(crate) fn rank_candidates(
    mut candidates: Vec<SliceNode>,
    effect: SliceNode,
    scores: &BTreeMap<EdgeKey, f64>,
    names: &[String],
) -> Vec<SliceNode> {
    let score =
        |c: SliceNode| EdgeKey::of(c, effect).and_then(|k| scores.get(&k).copied()).unwrap_or(f64::NEG_INFINITY);
    candidates.sort_by(|&a, &b| {
        score(b)
            .total_cmp(&score(a))
            .then_with(|| names[a.series].cmp(&names[b.series]))
            .then_with(|| a.slice.cmp(&b.slice))
    });
    candidates
}

pub(crate) fn canonical_set(set: &[SliceNode]) -> Vec<SliceNode> {
    let mut v = set.to_vec();
    v.sort();
    v
}

/// Advances `idx` to the next size-`idx.len()` combination of `0..m` in
/// lexicographic order.
pub(crate) fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let l = idx.len();
    let mut i = l;
    while i > 0 {
        i -= 1;
        if idx[i] < m - l + i {
            idx[i] += 1;
            for j in i + 1..l {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub(crate) struct EdgeSearch {
    pub key: EdgeKey,
    pub records: Vec<TestRecord>,
    pub separator: Option<Vec<SliceNode>>,
}

/// Tests `key` against the size-`level` subsets of `ranked` in rank order,
/// stopping at the first accepted independence. Sets in `skip` are not
/// re-tested.
pub(crate) fn search_level<T: CiTest + ?Sized>(
    tester: &T,
    key: EdgeKey,
    ranked: &[SliceNode],
    level: usize,
    stage: Stage,
    skip: &HashSet<(EdgeKey, Vec<SliceNode>)>,
) -> Result<EdgeSearch> {
    let (x, y) = oriented(key, tester.names());
    let mut out = EdgeSearch { key, records: Vec::new(), separator: None };
    let m = ranked.len();
    if level > m {
        return Ok(out);
    }
    let mut idx: Vec<usize> = (0..level).collect();
    loop {
        let cond: Vec<SliceNode> = idx.iter().map(|&i| ranked[i]).collect();
        if !skip.contains(&(key, canonical_set(&cond))) {
            let r = tester.test(x, y, &cond)?;
            out.records.push(TestRecord {
                stage,
                x,
                y,
                level,
                conditioners: cond.clone(),
                statistic: r.statistic,
                p_value: r.p_value,
                removed: r.independent,
            });
            if r.independent {
                out.separator = Some(cond);
                return Ok(out);
            }
        }
        if level == 0 || !next_combination(&mut idx, m) {
            return Ok(out);
        }
    }
}

fn neighbour_candidates(g: &ExtendedSummaryGraph, a: SliceNode, b: SliceNode) -> Vec<SliceNode> {
    let set: BTreeSet<SliceNode> =
        g.neighbors(a).into_iter().chain(g.neighbors(b)).filter(|&n| n != a && n != b).collect();
    set.into_iter().collect()
}

/// Builds the skeleton from the complete graph using `tester`.
pub fn build_skeleton<T: CiTest + ?Sized>(tester: &T, options: &SkeletonOptions) -> Result<Skeleton> {
    let d = tester.d();
    let names = tester.names().to_vec();
    let mut graph = ExtendedSummaryGraph::full(d)?.with_names(names.clone())?;
    let mut sepsets = SepsetTable::new();
    let mut log = TestLog::default();
    let mut scores = BTreeMap::new();
    let mut tested = HashSet::new();
    let no_skip = HashSet::new();

    let keys: Vec<EdgeKey> = graph.edges().iter().filter_map(|e| EdgeKey::of(e.a, e.b)).collect();
    let level0: Vec<EdgeSearch> = keys
        .par_iter()
        .map(|&key| search_level(tester, key, &[], 0, Stage::Skeleton, &no_skip))
        .collect::<Result<_>>()?;
    for s in level0 {
        scores.insert(s.key, s.records[0].statistic);
        apply_search(s, &mut graph, &mut sepsets, &mut log, &mut tested)?;
    }

    let mut level = 1;
    while options.max_level.is_none_or(|m| level <= m) {
        let snapshot = graph.clone();
        let work: Vec<(EdgeKey, Vec<SliceNode>)> = snapshot
            .edges()
            .iter()
            .filter_map(|e| {
                let key = EdgeKey::of(e.a, e.b)?;
                let (_, effect) = oriented(key, &names);
                let cands = neighbour_candidates(&snapshot, e.a, e.b);
                (cands.len() >= level).then(|| (key, rank_candidates(cands, effect, &scores, &names)))
            })
            .collect();
        if work.is_empty() {
            break;
        }
        let results: Vec<EdgeSearch> = work
            .par_iter()
            .map(|(key, ranked)| search_level(tester, *key, ranked, level, Stage::Skeleton, &no_skip))
            .collect::<Result<_>>()?;
        for s in results {
            apply_search(s, &mut graph, &mut sepsets, &mut log, &mut tested)?;
        }
        level += 1;
    }
    Ok(Skeleton { graph, sepsets, log, scores, tested })
}

pub(crate) fn apply_search(
    s: EdgeSearch,
    graph: &mut ExtendedSummaryGraph,
    sepsets: &mut SepsetTable,
    log: &mut TestLog,
    tested: &mut HashSet<(EdgeKey, Vec<SliceNode>)>,
) -> Result<()> {
    for r in s.records {
        tested.insert((s.key, canonical_set(&r.conditioners)));
        log.push(r);
    }
    if let Some(sep) = s.separator {
        let (a, b) = s.key.nodes();
        graph.remove_edge(a, b);
        sepsets.insert(a, b, sep.into_iter().collect::<Sepset>())?;
    }
    Ok(())
}
