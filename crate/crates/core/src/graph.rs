//! Extended summary causal graphs.
//!
//! A graph over `d` series has `2d` nodes: one past-slice node `X^p_{t-}`
//! standing for every lag of series `p` at once, and one present-slice node
//! `X^p_t`. Edges are unordered node pairs; all direction information lives
//! in the two endpoint marks, so the same type carries a skeleton, a CPDAG
//! or a PAG.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slice {
    Past,
    Present,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SliceNode {
    pub series: usize,
    pub slice: Slice,
}

impl SliceNode {
    pub const fn past(series: usize) -> Self {
        Self { series, slice: Slice::Past }
    }

    pub const fn present(series: usize) -> Self {
        Self { series, slice: Slice::Present }
    }

    pub fn is_past(&self) -> bool {
        self.slice == Slice::Past
    }

    pub fn is_present(&self) -> bool {
        self.slice == Slice::Present
    }

    /// Dense index: past nodes occupy `0..d`, present nodes `d..2d`.
    pub fn index(&self, d: usize) -> usize {
        match self.slice {
            Slice::Past => self.series,
            Slice::Present => d + self.series,
        }
    }

    pub fn from_index(index: usize, d: usize) -> Self {
        if index < d {
            Self::past(index)
        } else {
            Self::present(index - d)
        }
    }
}

/// Rendered with 1-based series numbers, `X^1_{t-}` / `X^1_t`.
impl fmt::Display for SliceNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.slice {
            Slice::Past => write!(f, "X^{}_{{t-}}", self.series + 1),
            Slice::Present => write!(f, "X^{}_t", self.series + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Tail,
    Arrow,
    Circle,
}

impl Mark {
    fn symbol_left(self) -> &'static str {
        match self {
            Mark::Tail => "-",
            Mark::Arrow => "<",
            Mark::Circle => "o",
        }
    }

    fn symbol_right(self) -> &'static str {
        match self {
            Mark::Tail => "-",
            Mark::Arrow => ">",
            Mark::Circle => "o",
        }
    }

    fn dot_arrow(self) -> &'static str {
        match self {
            Mark::Tail => "none",
            Mark::Arrow => "normal",
            Mark::Circle => "odot",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: SliceNode,
    pub b: SliceNode,
    pub mark_a: Mark,
    pub mark_b: Mark,
}

impl Edge {
    pub fn is_lagged(&self) -> bool {
        self.a.is_past() || self.b.is_past()
    }

    pub fn is_self(&self) -> bool {
        self.a.series == self.b.series
    }

    pub fn is_directed(&self) -> bool {
        matches!((self.mark_a, self.mark_b), (Mark::Tail, Mark::Arrow) | (Mark::Arrow, Mark::Tail))
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}-{} {}", self.a, self.mark_a.symbol_left(), self.mark_b.symbol_right(), self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedSummaryGraph {
    d: usize,
    names: Vec<String>,
    // marks[a * 2d + b] is the mark at `b` on the edge a - b.
    marks: Vec<Option<Mark>>,
}

pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("X{i}")).collect()
}

impl ExtendedSummaryGraph {
    pub fn empty(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(Self { d, names: default_names(d), marks: vec![None; 4 * d * d] })
    }

    /// Complete starting graph: every past node joined to every present
    /// node with `(Tail, Circle)` and every present pair joined with
    /// `(Circle, Circle)`.
    pub fn full(d: usize) -> Result<Self> {
        let mut g = Self::empty(d)?;
        for p in 0..d {
            for q in 0..d {
                g.put(SliceNode::past(p), SliceNode::present(q), Mark::Tail, Mark::Circle);
            }
        }
        for p in 0..d {
            for q in p + 1..d {
                g.put(SliceNode::present(p), SliceNode::present(q), Mark::Circle, Mark::Circle);
            }
        }
        Ok(g)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: names.len() });
        }
        self.names = names;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_count(&self) -> usize {
        2 * self.d
    }

    pub fn nodes(&self) -> impl Iterator<Item = SliceNode> + '_ {
        (0..2 * self.d).map(move |i| SliceNode::from_index(i, self.d))
    }

    fn slot(&self, at_edge_from: SliceNode, at: SliceNode) -> usize {
        at_edge_from.index(self.d) * 2 * self.d + at.index(self.d)
    }

    fn check_node(&self, n: SliceNode) -> Result<()> {
        if n.series >= self.d {
            return Err(Error::SeriesOutOfRange { index: n.series, d: self.d });
        }
        Ok(())
    }

    fn put(&mut self, a: SliceNode, b: SliceNode, mark_a: Mark, mark_b: Mark) {
        let ab = self.slot(a, b);
        let ba = self.slot(b, a);
        self.marks[ab] = Some(mark_b);
        self.marks[ba] = Some(mark_a);
    }

    fn validate_pair(&self, a: SliceNode, b: SliceNode, mark_a: Mark, mark_b: Mark) -> Result<()> {
        self.check_node(a)?;
        self.check_node(b)?;
        if a == b {
            return Err(Error::InvariantViolation(format!("self-adjacency at {a}")));
        }
        if a.is_past() && b.is_past() {
            return Err(Error::InvariantViolation(format!("past-past edge {a} - {b}")));
        }
        if (a.is_past() && mark_a == Mark::Arrow) || (b.is_past() && mark_b == Mark::Arrow) {
            return Err(Error::InvariantViolation(format!("arrowhead into the past slice on {a} - {b}")));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, a: SliceNode, b: SliceNode, mark_a: Mark, mark_b: Mark) -> Result<()> {
        self.validate_pair(a, b, mark_a, mark_b)?;
        self.put(a, b, mark_a, mark_b);
        Ok(())
    }

    /// Replaces both endpoint marks of an existing edge.
    pub fn set_marks(&mut self, a: SliceNode, b: SliceNode, mark_a: Mark, mark_b: Mark) -> Result<()> {
        if !self.adjacent(a, b) {
            return Err(Error::MissingEdge(a, b));
        }
        self.validate_pair(a, b, mark_a, mark_b)?;
        self.put(a, b, mark_a, mark_b);
        Ok(())
    }

    /// Replaces the mark at `at` on the edge `other - at`.
    pub fn set_mark_at(&mut self, at: SliceNode, other: SliceNode, mark: Mark) -> Result<()> {
        let other_mark = self.mark_at(other, at).ok_or(Error::MissingEdge(other, at))?;
        self.set_marks(at, other, mark, other_mark)
    }

    pub fn remove_edge(&mut self, a: SliceNode, b: SliceNode) -> bool {
        if a.series >= self.d || b.series >= self.d || a == b {
            return false;
        }
        let ab = self.slot(a, b);
        let ba = self.slot(b, a);
        let had = self.marks[ab].is_some();
        self.marks[ab] = None;
        self.marks[ba] = None;
        had
    }

    pub fn adjacent(&self, a: SliceNode, b: SliceNode) -> bool {
        a.series < self.d && b.series < self.d && a != b && self.marks[self.slot(a, b)].is_some()
    }

    /// Mark at `at` on the edge `other - at`.
    pub fn mark_at(&self, at: SliceNode, other: SliceNode) -> Option<Mark> {
        if !self.adjacent(at, other) {
            return None;
        }
        self.marks[self.slot(other, at)]
    }

    /// `(mark at a, mark at b)`.
    pub fn edge(&self, a: SliceNode, b: SliceNode) -> Option<(Mark, Mark)> {
        Some((self.mark_at(a, b)?, self.mark_at(b, a)?))
    }

    /// `from -> to`: tail at `from`, arrowhead at `to`.
    pub fn is_directed(&self, from: SliceNode, to: SliceNode) -> bool {
        self.edge(from, to) == Some((Mark::Tail, Mark::Arrow))
    }

    pub fn neighbors(&self, n: SliceNode) -> Vec<SliceNode> {
        let base = n.index(self.d) * 2 * self.d;
        (0..2 * self.d).filter(|&j| self.marks[base + j].is_some()).map(|j| SliceNode::from_index(j, self.d)).collect()
    }

    /// All edges in canonical order (lower dense index first).
    pub fn edges(&self) -> Vec<Edge> {
        let n = 2 * self.d;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if let Some(mark_b) = self.marks[i * n + j] {
                    let mark_a = self.marks[j * n + i].expect("marks are stored symmetrically");
                    out.push(Edge {
                        a: SliceNode::from_index(i, self.d),
                        b: SliceNode::from_index(j, self.d),
                        mark_a,
                        mark_b,
                    });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.marks.iter().filter(|m| m.is_some()).count() / 2
    }

    /// Checks the structural invariants every graph in the crate must obey.
    pub fn validate(&self) -> Result<()> {
        for e in self.edges() {
            self.validate_pair(e.a, e.b, e.mark_a, e.mark_b)?;
        }
        Ok(())
    }

    /// True when the subgraph of fully directed edges has no cycle.
    pub fn directed_is_acyclic(&self) -> bool {
        let n = 2 * self.d;
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in self.edges() {
            let (from, to) = match (e.mark_a, e.mark_b) {
                (Mark::Tail, Mark::Arrow) => (e.a, e.b),
                (Mark::Arrow, Mark::Tail) => (e.b, e.a),
                _ => continue,
            };
            children[from.index(self.d)].push(to.index(self.d));
            indegree[to.index(self.d)] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop_front() {
            seen += 1;
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        seen == n
    }

    /// Relabels series: series `i` of `self` becomes series `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: perm.len() });
        }
        let mut names = vec![String::new(); self.d];
        for (i, &p) in perm.iter().enumerate() {
            names[p] = self.names[i].clone();
        }
        let mut g = Self::empty(self.d)?.with_names(names)?;
        let map = |n: SliceNode| SliceNode { series: perm[n.series], slice: n.slice };
        for e in self.edges() {
            g.add_edge(map(e.a), map(e.b), e.mark_a, e.mark_b)?;
        }
        Ok(g)
    }

    /// Collapses the two slices into one node per series.
    pub fn collapse_to_summary(&self) -> SummaryGraph {
        let mut summary = SummaryGraph::empty(self.d, self.names.clone());
        // lagged edges first so instantaneous ones can merge into them
        let (lagged, instantaneous): (Vec<Edge>, Vec<Edge>) = self.edges().into_iter().partition(|e| e.is_lagged());
        for e in lagged {
            let (past, present, mark_past, mark_present) =
                if e.a.is_past() { (e.a, e.b, e.mark_a, e.mark_b) } else { (e.b, e.a, e.mark_b, e.mark_a) };
            summary.add_lagged_arc(past.series, present.series, mark_past, mark_present);
        }
        for e in instantaneous {
            summary.merge_arc(e.a.series, e.b.series, e.mark_a, e.mark_b);
        }
        summary
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(GraphJson::from(self)).expect("graph JSON is always serializable")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from(self)).expect("graph JSON is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(text)?;
        Self::try_from(raw)
    }

    pub fn to_dot(&self) -> String {
        let label = |n: SliceNode| match n.slice {
            Slice::Past => format!("{}_past", self.names[n.series]),
            Slice::Present => self.names[n.series].clone(),
        };
        let mut out = String::from("digraph esg {\n  rankdir=LR;\n");
        for n in self.nodes() {
            let style = if n.is_past() { " [style=dashed]" } else { "" };
            out.push_str(&format!("  \"{}\"{};\n", label(n), style));
        }
        for e in self.edges() {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [dir=both, arrowtail={}, arrowhead={}];\n",
                label(e.a),
                label(e.b),
                e.mark_a.dot_arrow(),
                e.mark_b.dot_arrow()
            ));
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for ExtendedSummaryGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.edges() {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    a: SliceNode,
    b: SliceNode,
    mark_a: Mark,
    mark_b: Mark,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    d: usize,
    series: Vec<String>,
    edges: Vec<EdgeJson>,
}

impl From<&ExtendedSummaryGraph> for GraphJson {
    fn from(g: &ExtendedSummaryGraph) -> Self {
        GraphJson {
            d: g.d,
            series: g.names.clone(),
            edges: g
                .edges()
                .into_iter()
                .map(|e| EdgeJson { a: e.a, b: e.b, mark_a: e.mark_a, mark_b: e.mark_b })
                .collect(),
        }
    }
}

impl TryFrom<GraphJson> for ExtendedSummaryGraph {
    type Error = Error;

    fn try_from(raw: GraphJson) -> Result<Self> {
        let mut g = Self::empty(raw.d)?.with_names(raw.series)?;
        for e in raw.edges {
            g.add_edge(e.a, e.b, e.mark_a, e.mark_b)?;
        }
        Ok(g)
    }
}

impl Serialize for ExtendedSummaryGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExtendedSummaryGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = GraphJson::deserialize(deserializer)?;
        Self::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// One node per series. Arcs are keyed by an ordered pair; an arc with a
/// single arrowhead is stored as (tail side, head side), everything else
/// with the lower series first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryGraph {
    pub d: usize,
    pub series: Vec<String>,
    pub arcs: BTreeMap<(usize, usize), (Mark, Mark)>,
}

fn merge_mark(x: Mark, y: Mark) -> Mark {
    match (x, y) {
        (Mark::Arrow, _) | (_, Mark::Arrow) => Mark::Arrow,
        (Mark::Tail, _) | (_, Mark::Tail) => Mark::Tail,
        _ => Mark::Circle,
    }
}

fn canonical_arc(a: usize, b: usize, mark_a: Mark, mark_b: Mark) -> ((usize, usize), (Mark, Mark)) {
    let points_ab = mark_b == Mark::Arrow && mark_a != Mark::Arrow;
    let points_ba = mark_a == Mark::Arrow && mark_b != Mark::Arrow;
    if points_ab || (!points_ba && a <= b) {
        ((a, b), (mark_a, mark_b))
    } else {
        ((b, a), (mark_b, mark_a))
    }
}

impl SummaryGraph {
    pub fn empty(d: usize, series: Vec<String>) -> Self {
        Self { d, series, arcs: BTreeMap::new() }
    }

    /// Adds an arc, merging with an existing arc over the same pair in either
    /// orientation (arrowhead wins at each endpoint, then tail, then circle).
    pub fn merge_arc(&mut self, a: usize, b: usize, mark_a: Mark, mark_b: Mark) {
        let (key, marks) = canonical_arc(a, b, mark_a, mark_b);
        if let Some(existing) = self.arcs.get_mut(&key) {
            *existing = (merge_mark(existing.0, marks.0), merge_mark(existing.1, marks.1));
            return;
        }
        let rev = (key.1, key.0);
        if let Some(existing) = self.arcs.remove(&rev) {
            let merged = (merge_mark(existing.0, marks.1), merge_mark(existing.1, marks.0));
            let (k, m) = canonical_arc(rev.0, rev.1, merged.0, merged.1);
            self.arcs.insert(k, m);
            return;
        }
        self.arcs.insert(key, marks);
    }

    // Lagged contributions never fold into the opposite direction: a lag in
    // each direction is two arcs.
    fn add_lagged_arc(&mut self, cause: usize, effect: usize, mark_cause: Mark, mark_effect: Mark) {
        let (key, marks) = canonical_arc(cause, effect, mark_cause, mark_effect);
        let entry = self.arcs.entry(key).or_insert(marks);
        *entry = (merge_mark(entry.0, marks.0), merge_mark(entry.1, marks.1));
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.arcs.get(&(from, to)) == Some(&(Mark::Tail, Mark::Arrow))
    }

    /// Re-encodes as an extended graph: self-loops and arcs with no arrowhead
    /// at their source become lagged edges, the rest instantaneous edges.
    pub fn to_extended(&self) -> Result<ExtendedSummaryGraph> {
        let mut g = ExtendedSummaryGraph::empty(self.d)?.with_names(self.series.clone())?;
        for (&(a, b), &(ma, mb)) in &self.arcs {
            if a == b || ma != Mark::Arrow {
                g.add_edge(SliceNode::past(a), SliceNode::present(b), ma, mb)?;
            } else {
                g.add_edge(SliceNode::present(a), SliceNode::present(b), ma, mb)?;
            }
        }
        Ok(g)
    }
}

/// Which separation table an edge belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKey {
    /// Past `cause` to present `effect`.
    Lagged { cause: usize, effect: usize },
    /// Unordered present pair, stored with `lo < hi`.
    Instantaneous { lo: usize, hi: usize },
}

impl EdgeKey {
    pub fn of(a: SliceNode, b: SliceNode) -> Option<Self> {
        match (a.slice, b.slice) {
            (Slice::Past, Slice::Present) => Some(EdgeKey::Lagged { cause: a.series, effect: b.series }),
            (Slice::Present, Slice::Past) => Some(EdgeKey::Lagged { cause: b.series, effect: a.series }),
            (Slice::Present, Slice::Present) if a.series != b.series => {
                Some(EdgeKey::Instantaneous { lo: a.series.min(b.series), hi: a.series.max(b.series) })
            }
            _ => None,
        }
    }

    pub fn nodes(&self) -> (SliceNode, SliceNode) {
        match *self {
            EdgeKey::Lagged { cause, effect } => (SliceNode::past(cause), SliceNode::present(effect)),
            EdgeKey::Instantaneous { lo, hi } => (SliceNode::present(lo), SliceNode::present(hi)),
        }
    }
}

pub type Sepset = BTreeSet<SliceNode>;

/// Conditioning sets that certified each edge removal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SepsetTable {
    lagged: BTreeMap<(usize, usize), Sepset>,
    instantaneous: BTreeMap<(usize, usize), Sepset>,
}

impl SepsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores (or overwrites) the separating set of the edge `a - b`.
    pub fn insert(&mut self, a: SliceNode, b: SliceNode, set: Sepset) -> Result<()> {
        match EdgeKey::of(a, b) {
            Some(EdgeKey::Lagged { cause, effect }) => {
                self.lagged.insert((cause, effect), set);
            }
            Some(EdgeKey::Instantaneous { lo, hi }) => {
                self.instantaneous.insert((lo, hi), set);
            }
            None => return Err(Error::InvariantViolation(format!("{a} - {b} is not an admissible edge"))),
        }
        Ok(())
    }

    pub fn get(&self, a: SliceNode, b: SliceNode) -> Option<&Sepset> {
        match EdgeKey::of(a, b)? {
            EdgeKey::Lagged { cause, effect } => self.lagged.get(&(cause, effect)),
            EdgeKey::Instantaneous { lo, hi } => self.instantaneous.get(&(lo, hi)),
        }
    }

    /// `Sepset(cause -> effect)`.
    pub fn lagged(&self, cause: usize, effect: usize) -> Option<&Sepset> {
        self.lagged.get(&(cause, effect))
    }

    /// `Sepset(p <-> q)`.
    pub fn instantaneous(&self, p: usize, q: usize) -> Option<&Sepset> {
        self.instantaneous.get(&(p.min(q), p.max(q)))
    }

    /// Whether `node` is in the separating set of `a - b`; `None` when the
    /// pair has no recorded separation.
    pub fn contains(&self, a: SliceNode, b: SliceNode, node: SliceNode) -> Option<bool> {
        self.get(a, b).map(|s| s.contains(&node))
    }

    pub fn remove(&mut self, a: SliceNode, b: SliceNode) -> Option<Sepset> {
        match EdgeKey::of(a, b)? {
            EdgeKey::Lagged { cause, effect } => self.lagged.remove(&(cause, effect)),
            EdgeKey::Instantaneous { lo, hi } => self.instantaneous.remove(&(lo, hi)),
        }
    }

    pub fn len(&self) -> usize {
        self.lagged.len() + self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeKey, &Sepset)> {
        self.lagged
            .iter()
            .map(|(&(cause, effect), s)| (EdgeKey::Lagged { cause, effect }, s))
            .chain(self.instantaneous.iter().map(|(&(lo, hi), s)| (EdgeKey::Instantaneous { lo, hi }, s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize) -> SliceNode {
        SliceNode::past(i)
    }
    fn c(i: usize) -> SliceNode {
        SliceNode::present(i)
    }

    #[test]
    fn full_graph_counts() {
        let g = ExtendedSummaryGraph::full(1).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edge(p(0), c(0)), Some((Mark::Tail, Mark::Circle)));

        let g = ExtendedSummaryGraph::full(4).unwrap();
        assert_eq!(g.edges().iter().filter(|e| e.is_lagged()).count(), 16);
        assert_eq!(g.edges().iter().filter(|e| !e.is_lagged()).count(), 6);
        assert_eq!(g.edge_count(), 22);
    }

    #[test]
    fn full_graph_matches_enumeration() {
        for d in 1..=10 {
            let g = ExtendedSummaryGraph::full(d).unwrap();
            // enumerate admissible pairs directly
            let mut admissible = 0;
            for i in 0..2 * d {
                for j in i + 1..2 * d {
                    let (a, b) = (SliceNode::from_index(i, d), SliceNode::from_index(j, d));
                    if !(a.is_past() && b.is_past()) {
                        admissible += 1;
                    }
                }
            }
            assert_eq!(g.edge_count(), admissible);
            assert_eq!(g.edge_count(), d * d + d * (d - 1) / 2);
            g.validate().unwrap();
        }
        assert_eq!(ExtendedSummaryGraph::full(7).unwrap().edge_count(), 70);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(ExtendedSummaryGraph::full(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn set_marks_orients_and_guards_the_past() {
        let mut g = ExtendedSummaryGraph::full(2).unwrap();
        g.set_marks(p(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        assert!(g.is_directed(p(0), c(1)));
        g.set_marks(c(0), c(1), Mark::Arrow, Mark::Arrow).unwrap();
        assert_eq!(g.edge(c(1), c(0)), Some((Mark::Arrow, Mark::Arrow)));
        // untouched edge
        assert_eq!(g.edge(p(1), c(0)), Some((Mark::Tail, Mark::Circle)));

        let err = g.set_marks(p(0), c(0), Mark::Arrow, Mark::Arrow).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
        g.remove_edge(p(1), c(1));
        assert!(matches!(g.set_marks(p(1), c(1), Mark::Tail, Mark::Arrow), Err(Error::MissingEdge(..))));
        assert!(g.add_edge(p(0), p(1), Mark::Tail, Mark::Tail).is_err());
    }

    #[test]
    fn collapse_figure_one() {
        // X3 causes X1 (lagged and instantaneous) and X2 (lagged); all self loops
        let mut g = ExtendedSummaryGraph::empty(3).unwrap();
        for s in 0..3 {
            g.add_edge(p(s), c(s), Mark::Tail, Mark::Arrow).unwrap();
        }
        g.add_edge(p(2), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(p(2), c(0), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(2), c(0), Mark::Tail, Mark::Arrow).unwrap();
        let s = g.collapse_to_summary();
        assert_eq!(s.arcs.len(), 5);
        assert!(s.has_directed(2, 0));
        assert!(s.has_directed(2, 1));
        for q in 0..3 {
            assert!(s.has_directed(q, q));
        }
    }

    #[test]
    fn collapse_merges_lagged_and_instantaneous() {
        let mut g = ExtendedSummaryGraph::empty(2).unwrap();
        g.add_edge(p(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        let s = g.collapse_to_summary();
        assert_eq!(s.arcs.len(), 1);
        assert!(s.has_directed(0, 1));

        // conflicting directions: arrowheads win at both ends
        let mut g = ExtendedSummaryGraph::empty(2).unwrap();
        g.add_edge(p(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(1), c(0), Mark::Tail, Mark::Arrow).unwrap();
        let s = g.collapse_to_summary();
        assert_eq!(s.arcs.into_iter().collect::<Vec<_>>(), vec![((0, 1), (Mark::Arrow, Mark::Arrow))]);

        // two lagged edges in opposite directions stay separate
        let mut g = ExtendedSummaryGraph::empty(2).unwrap();
        g.add_edge(p(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(p(1), c(0), Mark::Tail, Mark::Arrow).unwrap();
        let s = g.collapse_to_summary();
        assert!(s.has_directed(0, 1) && s.has_directed(1, 0));
    }

    #[test]
    fn collapse_empty() {
        let g = ExtendedSummaryGraph::empty(3).unwrap();
        assert!(g.collapse_to_summary().arcs.is_empty());
    }

    #[test]
    fn json_and_dot() {
        let mut g = ExtendedSummaryGraph::full(2).unwrap();
        g.set_marks(c(0), c(1), Mark::Arrow, Mark::Circle).unwrap();
        let back = ExtendedSummaryGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        let v = g.to_json_value();
        assert_eq!(v["edges"][0]["a"]["slice"], "past");
        assert_eq!(v["edges"][0]["mark_b"], "circle");

        let dot = g.to_dot();
        assert!(dot.contains("\"X1_past\" [style=dashed]"));
        assert!(dot.contains("arrowtail=normal, arrowhead=odot"));
        assert!(dot.contains("arrowtail=none"));

        let bad = r#"{"d":1,"series":["a"],"edges":[{"a":{"series":0,"slice":"present"},"b":{"series":0,"slice":"past"},"mark_a":"tail","mark_b":"arrow"}]}"#;
        assert!(ExtendedSummaryGraph::from_json(bad).is_err());
    }

    #[test]
    fn acyclicity() {
        let mut g = ExtendedSummaryGraph::empty(3).unwrap();
        g.add_edge(c(0), c(1), Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(c(1), c(2), Mark::Tail, Mark::Arrow).unwrap();
        assert!(g.directed_is_acyclic());
        g.add_edge(c(2), c(0), Mark::Tail, Mark::Arrow).unwrap();
        assert!(!g.directed_is_acyclic());
    }

    #[test]
    fn sepset_table_keys() {
        let mut t = SepsetTable::new();
        t.insert(c(1), p(0), [c(2)].into_iter().collect()).unwrap();
        t.insert(c(3), c(1), Sepset::new()).unwrap();
        assert_eq!(t.contains(p(0), c(1), c(2)), Some(true));
        assert!(t.lagged(1, 0).is_none());
        assert!(t.instantaneous(1, 3).unwrap().is_empty());
        assert_eq!(t.len(), 2);
        assert!(t.insert(p(0), p(1), Sepset::new()).is_err());
    }
}
