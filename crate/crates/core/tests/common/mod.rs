#![allow(dead_code)]

use gce_core::graph::{ExtendedSummaryGraph, Mark, SliceNode};

pub fn past(i: usize) -> SliceNode {
    SliceNode::past(i)
}

pub fn present(i: usize) -> SliceNode {
    SliceNode::present(i)
}

/// Directed `(from, to)` pairs of a DAG.
fn arcs(g: &ExtendedSummaryGraph) -> Vec<(SliceNode, SliceNode)> {
    g.edges()
        .into_iter()
        .map(|e| match (e.mark_a, e.mark_b) {
            (Mark::Tail, Mark::Arrow) => (e.a, e.b),
            (Mark::Arrow, Mark::Tail) => (e.b, e.a),
            _ => panic!("{e} is not directed"),
        })
        .collect()
}

fn descendants(arcs: &[(SliceNode, SliceNode)], from: SliceNode) -> Vec<SliceNode> {
    let mut out = vec![from];
    let mut i = 0;
    while i < out.len() {
        let v = out[i];
        for &(a, b) in arcs {
            if a == v && !out.contains(&b) {
                out.push(b);
            }
        }
        i += 1;
    }
    out
}

/// d-separation by enumerating every simple path of the skeleton.
pub fn dsep_by_paths(dag: &ExtendedSummaryGraph, a: SliceNode, b: SliceNode, s: &[SliceNode]) -> bool {
    if s.contains(&a) || s.contains(&b) {
        return true;
    }
    let arcs = arcs(dag);
    let into = |v: SliceNode, from: SliceNode| arcs.contains(&(from, v));
    let mut stack = vec![vec![a]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        for next in dag.neighbors(last) {
            if path.contains(&next) {
                continue;
            }
            let mut p = path.clone();
            p.push(next);
            // check the newly interior node
            if p.len() >= 3 {
                let (u, v, w) = (p[p.len() - 3], p[p.len() - 2], p[p.len() - 1]);
                let open = if into(v, u) && into(v, w) {
                    descendants(&arcs, v).iter().any(|x| s.contains(x))
                } else {
                    !s.contains(&v)
                };
                if !open {
                    continue;
                }
            }
            if next == b {
                return false;
            }
            stack.push(p);
        }
    }
    true
}

fn v_structures(g: &ExtendedSummaryGraph, arcs: &[(SliceNode, SliceNode)]) -> Vec<(SliceNode, SliceNode, SliceNode)> {
    let mut out = Vec::new();
    for &(a, b) in arcs {
        for &(c, b2) in arcs {
            if b == b2 && a < c && !g.adjacent(a, c) {
                out.push((a, b, c));
            }
        }
    }
    out.sort();
    out
}

/// CPDAG of a two-slice DAG: lagged edges keep their temporal orientation,
/// present-slice edges are directed when every Markov-equivalent DAG
/// agrees, `o-o` otherwise.
pub fn brute_force_cpdag(dag: &ExtendedSummaryGraph) -> ExtendedSummaryGraph {
    let truth_arcs = arcs(dag);
    let target = v_structures(dag, &truth_arcs);
    let inst: Vec<(SliceNode, SliceNode)> = truth_arcs.iter().copied().filter(|(a, _)| a.is_present()).collect();
    let fixed: Vec<(SliceNode, SliceNode)> = truth_arcs.iter().copied().filter(|(a, _)| a.is_past()).collect();
    let mut members: Vec<Vec<(SliceNode, SliceNode)>> = Vec::new();
    for mask in 0u32..(1 << inst.len()) {
        let mut candidate = fixed.clone();
        for (i, &(a, b)) in inst.iter().enumerate() {
            candidate.push(if mask >> i & 1 == 1 { (b, a) } else { (a, b) });
        }
        let mut g = ExtendedSummaryGraph::empty(dag.d()).unwrap().with_names(dag.names().to_vec()).unwrap();
        for &(a, b) in &candidate {
            g.add_edge(a, b, Mark::Tail, Mark::Arrow).unwrap();
        }
        if g.directed_is_acyclic() && v_structures(&g, &candidate) == target {
            members.push(candidate);
        }
    }
    let mut out = dag.clone();
    for &(a, b) in &inst {
        if !members.iter().all(|m| m.contains(&(a, b))) {
            out.set_marks(a, b, Mark::Circle, Mark::Circle).unwrap();
        }
    }
    out
}
