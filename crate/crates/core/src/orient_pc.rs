//! Orientation under causal sufficiency.
//!
//! Lagged edges are oriented by temporal priority. Present-slice edges start
//! as `o-o` (undetermined) and are oriented by collider detection followed
//! by propagation rules until nothing changes. Edges that stay `o-o` in the
//! output are the undirected edges of the CPDAG.

use crate::citest::{CiTest, PermutationTester};
use crate::data::TimeSeriesDataset;
use crate::error::Result;
use crate::estimator::EstimatorConfig;
use crate::graph::{ExtendedSummaryGraph, Mark, SepsetTable, SliceNode};
use crate::skeleton::{build_skeleton, SkeletonOptions, TestLog};

#[derive(Clone, Debug)]
pub struct Discovery {
    pub graph: ExtendedSummaryGraph,
    pub sepsets: SepsetTable,
    pub log: TestLog,
    /// Orientation requests that contradicted an earlier orientation.
    pub conflicts: Vec<String>,
}

/// Orients every lagged edge from the past slice into the present slice.
pub fn orient_temporal(graph: &ExtendedSummaryGraph) -> ExtendedSummaryGraph {
    let mut g = graph.clone();
    for e in graph.edges() {
        let (past, present) = match (e.a.is_past(), e.b.is_past()) {
            (true, false) => (e.a, e.b),
            (false, true) => (e.b, e.a),
            _ => continue,
        };
        g.set_marks(past, present, Mark::Tail, Mark::Arrow).expect("lagged edges accept a past-to-present orientation");
    }
    g
}

pub(crate) fn undirected(g: &ExtendedSummaryGraph, a: SliceNode, b: SliceNode) -> bool {
    matches!(g.edge(a, b), Some((Mark::Circle, Mark::Circle)) | Some((Mark::Tail, Mark::Tail)))
}

/// Separation set of a non-adjacent pair, looked up in the lagged table when
/// one side is a past node.
pub(crate) fn separated_by(sepsets: &SepsetTable, a: SliceNode, c: SliceNode, b: SliceNode) -> Option<bool> {
    sepsets.contains(a, c, b)
}

/// Orients `from -> to` unless that contradicts an existing mark.
fn orient(
    g: &mut ExtendedSummaryGraph,
    from: SliceNode,
    to: SliceNode,
    conflicts: &mut Vec<String>,
    rule: &str,
) -> bool {
    let Some((m_from, m_to)) = g.edge(from, to) else { return false };
    if (m_from, m_to) == (Mark::Tail, Mark::Arrow) {
        return false;
    }
    if m_from == Mark::Arrow || m_to == Mark::Tail {
        conflicts
            .push(format!("{rule}: cannot orient {from} -> {to}, edge is already {from} {m_from:?}/{m_to:?} {to}"));
        return false;
    }
    g.set_marks(from, to, Mark::Tail, Mark::Arrow).is_ok()
}

/// Unshielded triples `a - b - c` (b in the present slice, `a < c` by dense
/// index) whose middle node is absent from the separation set of `a, c`.
fn colliders(g: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> Vec<(SliceNode, SliceNode, SliceNode)> {
    let d = g.d();
    let mut out = Vec::new();
    for b in (0..d).map(SliceNode::present) {
        let nb = g.neighbors(b);
        for (i, &a) in nb.iter().enumerate() {
            for &c in &nb[i + 1..] {
                if g.adjacent(a, c) || (a.is_past() && c.is_past()) {
                    continue;
                }
                if separated_by(sepsets, a, c, b) == Some(false) {
                    out.push((a, b, c));
                }
            }
        }
    }
    out
}

fn has_directed_path(g: &ExtendedSummaryGraph, from: SliceNode, to: SliceNode) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; g.node_count()];
    seen[from.index(g.d())] = true;
    while let Some(u) = stack.pop() {
        for v in g.neighbors(u) {
            if g.is_directed(u, v) && !seen[v.index(g.d())] {
                if v == to {
                    return true;
                }
                seen[v.index(g.d())] = true;
                stack.push(v);
            }
        }
    }
    false
}

fn present_undirected_edges(g: &ExtendedSummaryGraph) -> Vec<(SliceNode, SliceNode)> {
    g.edges()
        .into_iter()
        .filter(|e| e.a.is_present() && e.b.is_present() && undirected(g, e.a, e.b))
        .map(|e| (e.a, e.b))
        .collect()
}

fn propagation(g: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> Vec<(SliceNode, SliceNode)> {
    let mut out = Vec::new();
    for b in (0..g.d()).map(SliceNode::present) {
        let nb = g.neighbors(b);
        for &a in nb.iter().filter(|&&a| g.is_directed(a, b)) {
            for &c in &nb {
                if c == a || !c.is_present() || !undirected(g, b, c) || g.adjacent(a, c) {
                    continue;
                }
                if separated_by(sepsets, a, c, b) == Some(true) {
                    out.push((b, c));
                }
            }
        }
    }
    out
}

fn directed_path_rule(g: &ExtendedSummaryGraph) -> Vec<(SliceNode, SliceNode)> {
    let mut out = Vec::new();
    for (a, b) in present_undirected_edges(g) {
        if has_directed_path(g, a, b) {
            out.push((a, b));
        } else if has_directed_path(g, b, a) {
            out.push((b, a));
        }
    }
    out
}

fn two_paths_rule(g: &ExtendedSummaryGraph) -> Vec<(SliceNode, SliceNode)> {
    let mut out = Vec::new();
    for (u, v) in present_undirected_edges(g) {
        for (a, b) in [(u, v), (v, u)] {
            let mids: Vec<SliceNode> =
                g.neighbors(a).into_iter().filter(|&r| r != b && undirected(g, a, r) && g.is_directed(r, b)).collect();
            let found = mids.iter().enumerate().any(|(i, &r)| mids[i + 1..].iter().any(|&s| !g.adjacent(r, s)));
            if found {
                out.push((a, b));
                break;
            }
        }
    }
    out
}

/// Applies collider detection and the propagation rules until a fixpoint.
/// Each rule reads the graph as it stood when the rule started; its
/// orientations are then applied in enumeration order, skipping any that
/// contradict an earlier one.
pub fn apply_pc_rules(graph: &ExtendedSummaryGraph, sepsets: &SepsetTable) -> (ExtendedSummaryGraph, Vec<String>) {
    let mut g = graph.clone();
    let mut conflicts = Vec::new();
    loop {
        let mut changed = false;
        for (a, b, c) in colliders(&g, sepsets) {
            // an arrowhead from a past node is already in place
            for end in [a, c] {
                if end.is_present() && undirected_or_into(&g, end, b) {
                    changed |= orient(&mut g, end, b, &mut conflicts, "collider");
                }
            }
        }
        for (rule, updates) in [
            ("propagation", propagation(&g, sepsets)),
            ("directed path", directed_path_rule(&g)),
            ("two paths", two_paths_rule(&g)),
        ] {
            for (from, to) in updates {
                changed |= orient(&mut g, from, to, &mut conflicts, rule);
            }
        }
        if !changed {
            break;
        }
    }
    conflicts.dedup();
    if !g.directed_is_acyclic() {
        conflicts.push("directed part of the output contains a cycle".into());
    }
    (g, conflicts)
}

// true when `end - b` is not yet oriented away from b
fn undirected_or_into(g: &ExtendedSummaryGraph, end: SliceNode, b: SliceNode) -> bool {
    !g.is_directed(end, b)
}

/// Full causally-sufficient pipeline with any independence test.
pub fn pcgce_with<T: CiTest + ?Sized>(tester: &T, options: &SkeletonOptions) -> Result<Discovery> {
    let skeleton = build_skeleton(tester, options)?;
    let temporal = orient_temporal(&skeleton.graph);
    let (graph, conflicts) = apply_pc_rules(&temporal, &skeleton.sepsets);
    Ok(Discovery { graph, sepsets: skeleton.sepsets, log: skeleton.log, conflicts })
}

/// Causally-sufficient discovery on data with the kNN permutation test.
pub fn pcgce(ds: &TimeSeriesDataset, cfg: &EstimatorConfig, options: &SkeletonOptions) -> Result<Discovery> {
    let tester = PermutationTester::new(ds, cfg.clone())?;
    pcgce_with(&tester, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Sepset;

    fn p(i: usize) -> SliceNode {
        SliceNode::past(i)
    }
    fn c(i: usize) -> SliceNode {
        SliceNode::present(i)
    }
    fn set(nodes: &[SliceNode]) -> Sepset {
        nodes.iter().copied().collect()
    }

    #[test]
    fn temporal_orientation() {
        let g = orient_temporal(&ExtendedSummaryGraph::full(2).unwrap());
        let lagged: Vec<_> = g.edges().into_iter().filter(|e| e.is_lagged()).collect();
        assert_eq!(lagged.len(), 4);
        assert!(lagged.iter().all(|e| e.mark_a == Mark::Tail && e.mark_b == Mark::Arrow));
        assert_eq!(g.edge(c(0), c(1)), Some((Mark::Circle, Mark::Circle)));
        let empty = ExtendedSummaryGraph::empty(3).unwrap();
        assert_eq!(orient_temporal(&empty), empty);
    }

    #[test]
    fn collider_between_present_nodes() {
        // X2 - X4 - X3 with X2, X3 separated by the empty set
        let mut g = ExtendedSummaryGraph::empty(4).unwrap();
        g.add_edge(c(1), c(3), Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(c(2), c(3), Mark::Circle, Mark::Circle).unwrap();
        let mut s = SepsetTable::new();
        s.insert(c(1), c(2), Sepset::new()).unwrap();
        let (out, conflicts) = apply_pc_rules(&g, &s);
        assert!(out.is_directed(c(1), c(3)) && out.is_directed(c(2), c(3)));
        assert!(conflicts.is_empty());
    }

    #[test]
    fn collider_with_own_past() {
        // X1_{t-} -> X1_t - X2_t, X1_t not in Sepset(1 -> 2)
        let mut g = ExtendedSummaryGraph::empty(2).unwrap();
        g.add_edge(p(0), c(0), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(0), c(1), Mark::Circle, Mark::Circle).unwrap();
        let mut s = SepsetTable::new();
        s.insert(p(0), c(1), Sepset::new()).unwrap();
        let (out, _) = apply_pc_rules(&g, &s);
        assert!(out.is_directed(c(1), c(0)));
    }

    #[test]
    fn propagation_through_sepset_member() {
        // X1 -> X2 - X3 with X2 in Sepset(1 <-> 3)
        let mut g = ExtendedSummaryGraph::empty(3).unwrap();
        g.add_edge(c(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(1), c(2), Mark::Circle, Mark::Circle).unwrap();
        let mut s = SepsetTable::new();
        s.insert(c(0), c(2), set(&[c(1)])).unwrap();
        let (out, _) = apply_pc_rules(&g, &s);
        assert!(out.is_directed(c(1), c(2)));

        // lagged trigger consults the lagged table
        let mut g = ExtendedSummaryGraph::empty(3).unwrap();
        g.add_edge(p(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(1), c(2), Mark::Circle, Mark::Circle).unwrap();
        let mut s = SepsetTable::new();
        s.insert(p(0), c(2), set(&[c(1)])).unwrap();
        let (out, _) = apply_pc_rules(&g, &s);
        assert!(out.is_directed(c(1), c(2)));
    }

    #[test]
    fn directed_path_and_two_paths() {
        let mut g = ExtendedSummaryGraph::empty(3).unwrap();
        g.add_edge(c(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(1), c(2), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(0), c(2), Mark::Circle, Mark::Circle).unwrap();
        let (out, _) = apply_pc_rules(&g, &SepsetTable::new());
        assert!(out.is_directed(c(0), c(2)));

        // a - r -> b, a - s -> b, r and s non-adjacent, a - b
        let mut g = ExtendedSummaryGraph::empty(4).unwrap();
        let (a, b, r, s) = (c(0), c(1), c(2), c(3));
        g.add_edge(a, r, Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(a, s, Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(r, b, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(s, b, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(a, b, Mark::Circle, Mark::Circle).unwrap();
        let mut seps = SepsetTable::new();
        seps.insert(r, s, set(&[a])).unwrap();
        let (out, _) = apply_pc_rules(&g, &seps);
        assert!(out.is_directed(a, b));
        assert!(undirected(&out, a, r));
    }

    #[test]
    fn conflicting_colliders_keep_the_first() {
        // X1 - X2 - X3 - X4 chain, each end pair separated by the empty set:
        // colliders at X2 (from 1,3) and at X3 (from 2,4) disagree on X2 - X3
        let mut g = ExtendedSummaryGraph::empty(4).unwrap();
        g.add_edge(c(0), c(1), Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(c(1), c(2), Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(c(2), c(3), Mark::Circle, Mark::Circle).unwrap();
        let mut s = SepsetTable::new();
        s.insert(c(0), c(2), Sepset::new()).unwrap();
        s.insert(c(1), c(3), Sepset::new()).unwrap();
        s.insert(c(0), c(3), Sepset::new()).unwrap();
        let (out, conflicts) = apply_pc_rules(&g, &s);
        assert!(out.is_directed(c(2), c(1)));
        assert!(out.is_directed(c(3), c(2)));
        assert!(!conflicts.is_empty());
    }

    #[test]
    fn rules_are_idempotent_and_monotone() {
        let mut g = ExtendedSummaryGraph::empty(4).unwrap();
        g.add_edge(p(1), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(0), c(1), Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(c(1), c(3), Mark::Circle, Mark::Circle).unwrap();
        g.add_edge(c(2), c(3), Mark::Circle, Mark::Circle).unwrap();
        let mut s = SepsetTable::new();
        s.insert(p(1), c(0), Sepset::new()).unwrap();
        s.insert(p(1), c(3), set(&[c(1)])).unwrap();
        s.insert(c(1), c(2), Sepset::new()).unwrap();
        s.insert(c(0), c(3), set(&[c(1)])).unwrap();
        let (once, _) = apply_pc_rules(&g, &s);
        let (twice, _) = apply_pc_rules(&once, &s);
        assert_eq!(once, twice);
        for e in g.edges() {
            let (ma, mb) = once.edge(e.a, e.b).unwrap();
            if e.mark_a == Mark::Arrow {
                assert_eq!(ma, Mark::Arrow);
            }
            if e.mark_b == Mark::Arrow {
                assert_eq!(mb, Mark::Arrow);
            }
        }
    }
}
