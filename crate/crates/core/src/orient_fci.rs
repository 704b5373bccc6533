//! Orientation when hidden common causes may be present.
//!
//! After the skeleton search, collider detection places arrowheads, edges
//! that only a Possible-Dsep set can separate are removed, all marks are
//! reset, colliders are found again, and Zhang's orientation rules
//! R1-R4 and R8-R10 run to a fixpoint. Rules R5-R7 concern selection bias
//! and are not used.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rayon::prelude::*;

use crate::citest::{CiTest, PermutationTester};
use crate::data::TimeSeriesDataset;
use crate::error::Result;
use crate::estimator::EstimatorConfig;
use crate::graph::{EdgeKey, ExtendedSummaryGraph, Mark, SepsetTable, SliceNode};
use crate::orient_pc::{orient_temporal, separated_by, Discovery};
use crate::skeleton::{
    apply_search, build_skeleton, oriented, rank_candidates, search_level, EdgeSearch, SkeletonOptions, Stage,
};

/// Places arrowheads at the middle node of every unshielded triple whose
/// middle node is absent from the separating set of the outer pair.
/// Marks other than circles are left alone.
pub fn fci_colliders(graph: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> ExtendedSummaryGraph {
    let mut g = graph.clone();
    for b in (0..graph.d()).map(SliceNode::present) {
        let nb = graph.neighbors(b);
        for (i, &a) in nb.iter().enumerate() {
            for &c in &nb[i + 1..] {
                if graph.adjacent(a, c) || (a.is_past() && c.is_past()) {
                    continue;
                }
                if separated_by(sepsets, a, c, b) == Some(false) {
                    for end in [a, c] {
                        set_circle(&mut g, b, end, Mark::Arrow);
                    }
                }
            }
        }
    }
    g
}

/// Replaces a circle at `at` on the edge `other - at`; returns whether the
/// mark changed.
fn set_circle(g: &mut ExtendedSummaryGraph, at: SliceNode, other: SliceNode, mark: Mark) -> bool {
    if g.mark_at(at, other) != Some(Mark::Circle) || (at.is_past() && mark == Mark::Arrow) {
        return false;
    }
    g.set_mark_at(at, other, mark).is_ok()
}

/// Every endpoint back to a circle, lagged edges back to `(Tail, Circle)`.
pub fn reset_marks(graph: &ExtendedSummaryGraph) -> ExtendedSummaryGraph {
    let mut g = graph.clone();
    for e in graph.edges() {
        let (ma, mb) = match (e.a.is_past(), e.b.is_past()) {
            (true, _) => (Mark::Tail, Mark::Circle),
            (_, true) => (Mark::Circle, Mark::Tail),
            _ => (Mark::Circle, Mark::Circle),
        };
        g.set_marks(e.a, e.b, ma, mb).expect("reset marks are admissible");
    }
    g
}

/// Nodes with a potentially directed path into `a` or `b`, the two
/// included: along every step `u *-* v` of the path `u` carries no
/// arrowhead and `v` no tail.
fn possible_ancestors(g: &ExtendedSummaryGraph, targets: &[SliceNode]) -> Vec<bool> {
    let d = g.d();
    let mut seen = vec![false; g.node_count()];
    let mut queue: VecDeque<SliceNode> = targets.iter().copied().collect();
    for t in targets {
        seen[t.index(d)] = true;
    }
    while let Some(v) = queue.pop_front() {
        for u in g.neighbors(v) {
            let into = g.mark_at(v, u) != Some(Mark::Tail) && g.mark_at(u, v) != Some(Mark::Arrow);
            if into && !seen[u.index(d)] {
                seen[u.index(d)] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Possible-Dsep of the pair `(a, b)`: every node `v` outside the pair
/// reached from `a` or `b` by a path whose inner nodes are colliders on the
/// path and possible ancestors of `a` or `b`.
pub fn possible_dsep(graph: &ExtendedSummaryGraph, a: SliceNode, b: SliceNode) -> BTreeSet<SliceNode> {
    let d = graph.d();
    let n = graph.node_count();
    let ancestors = possible_ancestors(graph, &[a, b]);
    let mut out = BTreeSet::new();
    // states are directed edges (previous, current) of a path
    let mut visited = vec![false; n * n];
    let mut queue = VecDeque::new();
    for start in [a, b] {
        for v in graph.neighbors(start) {
            if v == a || v == b {
                continue;
            }
            out.insert(v);
            let s = start.index(d) * n + v.index(d);
            if ancestors[v.index(d)] && !visited[s] {
                visited[s] = true;
                queue.push_back((start, v));
            }
        }
    }
    while let Some((u, v)) = queue.pop_front() {
        if graph.mark_at(v, u) != Some(Mark::Arrow) {
            continue;
        }
        for w in graph.neighbors(v) {
            if w == u || w == a || w == b || graph.mark_at(v, w) != Some(Mark::Arrow) {
                continue;
            }
            out.insert(w);
            let s = v.index(d) * n + w.index(d);
            if ancestors[w.index(d)] && !visited[s] {
                visited[s] = true;
                queue.push_back((v, w));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FciRule {
    R1,
    R2,
    R3,
    R4,
    R8,
    R9,
    R10,
}

impl FciRule {
    pub const ALL: [FciRule; 7] =
        [FciRule::R1, FciRule::R2, FciRule::R3, FciRule::R4, FciRule::R8, FciRule::R9, FciRule::R10];
}

/// A mark to place: `(at, other, mark)` on the edge `other - at`.
type Update = (SliceNode, SliceNode, Mark);

fn m(g: &ExtendedSummaryGraph, at: SliceNode, other: SliceNode) -> Option<Mark> {
    g.mark_at(at, other)
}

fn directed(g: &ExtendedSummaryGraph, from: SliceNode, to: SliceNode) -> bool {
    g.is_directed(from, to)
}

// A *-> B o-* C, A and C non-adjacent => B -> C
fn rule1(g: &ExtendedSummaryGraph) -> Vec<Update> {
    let mut out = Vec::new();
    for b in g.nodes() {
        for a in g.neighbors(b) {
            if m(g, b, a) != Some(Mark::Arrow) {
                continue;
            }
            for c in g.neighbors(b) {
                if c != a && !g.adjacent(a, c) && m(g, b, c) == Some(Mark::Circle) {
                    out.push((b, c, Mark::Tail));
                    out.push((c, b, Mark::Arrow));
                }
            }
        }
    }
    out
}

// A -> B *-> C or A *-> B -> C, with A *-o C => A *-> C
fn rule2(g: &ExtendedSummaryGraph) -> Vec<Update> {
    let mut out = Vec::new();
    for a in g.nodes() {
        for c in g.neighbors(a) {
            if m(g, c, a) != Some(Mark::Circle) {
                continue;
            }
            let hit = g.neighbors(a).into_iter().any(|b| {
                b != c
                    && g.adjacent(b, c)
                    && ((directed(g, a, b) && m(g, c, b) == Some(Mark::Arrow))
                        || (m(g, b, a) == Some(Mark::Arrow) && directed(g, b, c)))
            });
            if hit {
                out.push((c, a, Mark::Arrow));
            }
        }
    }
    out
}

// A *-> B <-* C, A *-o D o-* C, A and C non-adjacent, D *-o B => D *-> B
fn rule3(g: &ExtendedSummaryGraph) -> Vec<Update> {
    let mut out = Vec::new();
    for b in g.nodes() {
        let nb = g.neighbors(b);
        for &dn in &nb {
            if m(g, b, dn) != Some(Mark::Circle) {
                continue;
            }
            let hit = nb.iter().enumerate().any(|(i, &a)| {
                nb[i + 1..].iter().any(|&c| {
                    a != dn
                        && c != dn
                        && !g.adjacent(a, c)
                        && m(g, b, a) == Some(Mark::Arrow)
                        && m(g, b, c) == Some(Mark::Arrow)
                        && g.adjacent(dn, a)
                        && g.adjacent(dn, c)
                        && m(g, dn, a) == Some(Mark::Circle)
                        && m(g, dn, c) == Some(Mark::Circle)
                })
            });
            if hit {
                out.push((b, dn, Mark::Arrow));
            }
        }
    }
    out
}

/// Shortest discriminating path `<theta, ..., alpha, beta, gamma>` for
/// `beta`, returned as `(theta, alpha)`. Every node strictly between theta
/// and beta is a collider on the path and a parent of gamma.
fn discriminating_path(
    g: &ExtendedSummaryGraph,
    alpha: SliceNode,
    beta: SliceNode,
    gamma: SliceNode,
    max_edges: usize,
) -> Option<SliceNode> {
    // paths grow backwards from alpha; each entry holds the path so far,
    // beginning at alpha
    let mut queue: VecDeque<Vec<SliceNode>> = VecDeque::new();
    queue.push_back(vec![alpha]);
    while let Some(path) = queue.pop_front() {
        // edges: path back to theta, plus alpha-beta and beta-gamma
        if path.len() + 2 > max_edges {
            continue;
        }
        let cur = *path.last().expect("non-empty");
        let after = if path.len() == 1 { beta } else { path[path.len() - 2] };
        for theta in g.neighbors(cur) {
            if theta == beta || theta == gamma || path.contains(&theta) {
                continue;
            }
            // cur must be a collider between theta and the node after it
            if m(g, cur, theta) != Some(Mark::Arrow) || m(g, cur, after) != Some(Mark::Arrow) {
                continue;
            }
            if !g.adjacent(theta, gamma) {
                return Some(theta);
            }
            if directed(g, theta, gamma) {
                let mut next = path.clone();
                next.push(theta);
                queue.push_back(next);
            }
        }
    }
    None
}

// discriminating path for B with B o-* C: B -> C when B is in the
// separating set of the path's end points, else A <-> B <-> C
fn rule4(g: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> Vec<Update> {
    let mut out = Vec::new();
    let max_edges = g.d() + 2;
    for beta in g.nodes() {
        for gamma in g.neighbors(beta) {
            if m(g, beta, gamma) != Some(Mark::Circle) {
                continue;
            }
            for alpha in g.neighbors(beta) {
                if alpha == gamma || !directed(g, alpha, gamma) || m(g, alpha, beta) != Some(Mark::Arrow) {
                    continue;
                }
                let Some(theta) = discriminating_path(g, alpha, beta, gamma, max_edges) else { continue };
                match separated_by(sepsets, theta, gamma, beta) {
                    Some(true) => {
                        out.push((beta, gamma, Mark::Tail));
                        out.push((gamma, beta, Mark::Arrow));
                    }
                    Some(false) => {
                        out.push((beta, alpha, Mark::Arrow));
                        out.push((alpha, beta, Mark::Arrow));
                        out.push((beta, gamma, Mark::Arrow));
                        out.push((gamma, beta, Mark::Arrow));
                    }
                    None => {}
                }
                break;
            }
        }
    }
    out
}

// A -> B -> C or A -o B -> C, with A o-> C => A -> C
fn rule8(g: &ExtendedSummaryGraph) -> Vec<Update> {
    let mut out = Vec::new();
    for a in g.nodes() {
        for c in g.neighbors(a) {
            if g.edge(a, c) != Some((Mark::Circle, Mark::Arrow)) {
                continue;
            }
            let hit = g.neighbors(a).into_iter().any(|b| {
                b != c
                    && directed(g, b, c)
                    && m(g, a, b) == Some(Mark::Tail)
                    && matches!(m(g, b, a), Some(Mark::Arrow) | Some(Mark::Circle))
            });
            if hit {
                out.push((a, c, Mark::Tail));
            }
        }
    }
    out
}

fn potentially_directed(g: &ExtendedSummaryGraph, from: SliceNode, to: SliceNode) -> bool {
    !matches!(m(g, from, to), Some(Mark::Arrow) | None) && m(g, to, from) != Some(Mark::Tail)
}

/// Whether an uncovered potentially directed path runs from `first` (the
/// node after `start`) to `target` without revisiting `start` or
/// `exclude`.
fn uncovered_pd_path(
    g: &ExtendedSummaryGraph,
    start: SliceNode,
    first: SliceNode,
    target: SliceNode,
    exclude: SliceNode,
) -> bool {
    if !potentially_directed(g, start, first) {
        return false;
    }
    if first == target {
        return true;
    }
    let mut stack = vec![vec![start, first]];
    while let Some(path) = stack.pop() {
        let (prev, cur) = (path[path.len() - 2], path[path.len() - 1]);
        for next in g.neighbors(cur) {
            if path.contains(&next) || g.adjacent(prev, next) || !potentially_directed(g, cur, next) {
                continue;
            }
            if next == target {
                return true;
            }
            if next == exclude {
                continue;
            }
            if path.len() < g.node_count() {
                let mut p = path.clone();
                p.push(next);
                stack.push(p);
            }
        }
    }
    false
}

// A o-> C and an uncovered potentially directed path <A, B, ..., C> with
// B and C non-adjacent => A -> C
fn rule9(g: &ExtendedSummaryGraph) -> Vec<Update> {
    let mut out = Vec::new();
    for a in g.nodes() {
        for c in g.neighbors(a) {
            if g.edge(a, c) != Some((Mark::Circle, Mark::Arrow)) {
                continue;
            }
            let hit =
                g.neighbors(a).into_iter().any(|b| b != c && !g.adjacent(b, c) && uncovered_pd_path(g, a, b, c, c));
            if hit {
                out.push((a, c, Mark::Tail));
            }
        }
    }
    out
}

// A o-> C, B -> C <- D, uncovered potentially directed paths from A to B
// and from A to D whose second nodes differ and are non-adjacent => A -> C
fn rule10(g: &ExtendedSummaryGraph) -> Vec<Update> {
    let mut out = Vec::new();
    for a in g.nodes() {
        for c in g.neighbors(a) {
            if g.edge(a, c) != Some((Mark::Circle, Mark::Arrow)) {
                continue;
            }
            let parents: Vec<SliceNode> = g.neighbors(c).into_iter().filter(|&p| p != a && directed(g, p, c)).collect();
            let firsts = |target: SliceNode| -> Vec<SliceNode> {
                g.neighbors(a).into_iter().filter(|&mu| mu != c && uncovered_pd_path(g, a, mu, target, c)).collect()
            };
            let mut hit = false;
            'pairs: for (i, &b) in parents.iter().enumerate() {
                for &dn in &parents[i + 1..] {
                    let mus = firsts(b);
                    let omegas = firsts(dn);
                    for &mu in &mus {
                        for &omega in &omegas {
                            if mu != omega && !g.adjacent(mu, omega) {
                                hit = true;
                                break 'pairs;
                            }
                        }
                    }
                }
            }
            if hit {
                out.push((a, c, Mark::Tail));
            }
        }
    }
    out
}

fn rule_updates(rule: FciRule, g: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> Vec<Update> {
    match rule {
        FciRule::R1 => rule1(g),
        FciRule::R2 => rule2(g),
        FciRule::R3 => rule3(g),
        FciRule::R4 => rule4(g, sepsets),
        FciRule::R8 => rule8(g),
        FciRule::R9 => rule9(g),
        FciRule::R10 => rule10(g),
    }
}

/// Applies `rules` in the given order, repeatedly, until no mark changes.
/// Only circles are ever replaced.
pub fn apply_fci_rules_in_order(
    graph: &ExtendedSummaryGraph,
    sepsets: &SepsetTable,
    rules: &[FciRule],
) -> ExtendedSummaryGraph {
    let mut g = graph.clone();
    loop {
        let mut changed = false;
        for &rule in rules {
            for (at, other, mark) in rule_updates(rule, &g, sepsets) {
                changed |= set_circle(&mut g, at, other, mark);
            }
        }
        if !changed {
            return g;
        }
    }
}

pub fn apply_fci_rules(graph: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> ExtendedSummaryGraph {
    apply_fci_rules_in_order(graph, sepsets, &FciRule::ALL)
}

/// Removes edges separated by a subset of their Possible-Dsep set. All
/// sets are computed on `graph` before any removal, and removals are
/// applied together at the end.
fn prune_possible_dsep<T: CiTest + ?Sized>(
    tester: &T,
    graph: &mut ExtendedSummaryGraph,
    sepsets: &mut SepsetTable,
    log: &mut crate::skeleton::TestLog,
    scores: &std::collections::BTreeMap<EdgeKey, f64>,
    tested: &mut HashSet<(EdgeKey, Vec<SliceNode>)>,
    max_level: Option<usize>,
) -> Result<()> {
    let names = tester.names().to_vec();
    let work: Vec<(EdgeKey, Vec<SliceNode>)> = graph
        .edges()
        .iter()
        .filter_map(|e| {
            let key = EdgeKey::of(e.a, e.b)?;
            let (x, y) = oriented(key, &names);
            let cands: Vec<SliceNode> = possible_dsep(graph, x, y).into_iter().collect();
            Some((key, rank_candidates(cands, y, scores, &names)))
        })
        .collect();
    let skip = &*tested;
    let results: Vec<EdgeSearch> = work
        .par_iter()
        .map(|(key, ranked)| {
            let top = max_level.map_or(ranked.len(), |m| m.min(ranked.len()));
            let mut merged = EdgeSearch { key: *key, records: Vec::new(), separator: None };
            for level in 1..=top {
                let s = search_level(tester, *key, ranked, level, Stage::PossibleDsep, skip)?;
                merged.records.extend(s.records);
                if s.separator.is_some() {
                    merged.separator = s.separator;
                    break;
                }
            }
            Ok(merged)
        })
        .collect::<Result<_>>()?;
    for s in results {
        apply_search(s, graph, sepsets, log, tested)?;
    }
    Ok(())
}

/// Full pipeline allowing hidden common causes, with any independence test.
pub fn fcigce_with<T: CiTest + ?Sized>(tester: &T, options: &SkeletonOptions) -> Result<Discovery> {
    let skeleton = build_skeleton(tester, options)?;
    let mut sepsets = skeleton.sepsets;
    let mut log = skeleton.log;
    let mut tested = skeleton.tested;
    let mut graph = fci_colliders(&orient_temporal(&skeleton.graph), &sepsets);
    prune_possible_dsep(
        tester,
        &mut graph,
        &mut sepsets,
        &mut log,
        &skeleton.scores,
        &mut tested,
        options.max_pdsep_level,
    )?;
    let graph = orient_temporal(&reset_marks(&graph));
    let graph = fci_colliders(&graph, &sepsets);
    let graph = apply_fci_rules(&graph, &sepsets);
    Ok(Discovery { graph, sepsets, log, conflicts: Vec::new() })
}

/// Discovery on data with hidden common causes allowed, using the kNN
/// permutation test.
pub fn fcigce(ds: &TimeSeriesDataset, cfg: &EstimatorConfig, options: &SkeletonOptions) -> Result<Discovery> {
    let tester = PermutationTester::new(ds, cfg.clone())?;
    fcigce_with(&tester, options)
}
