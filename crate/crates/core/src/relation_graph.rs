//! Relation interaction graph: relations are nodes, and typed edges record
//! how two relations share entities (head-to-head, head-to-tail, ...).

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use crate::dataset::Quadruple;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InteractionKind {
    H2H,
    H2T,
    T2H,
    T2T,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 4] = [Self::H2H, Self::H2T, Self::T2H, Self::T2T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::H2H => "h2h",
            Self::H2T => "h2t",
            Self::T2H => "t2h",
            Self::T2T => "t2t",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// `(source, kind, target)`: e.g. `(p1, H2T, p2)` means some head entity of a
/// `p1` fact is the tail entity of a `p2` fact.
pub type RelationEdge = (usize, InteractionKind, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationGraph {
    node_count: usize,
    edges: Vec<RelationEdge>,
    adjacency: [Vec<Vec<usize>>; 4],
}

impl RelationGraph {
    /// Build from facts using per-entity head/tail occurrence sets. With
    /// `self_loops` off, edges from a relation to itself are dropped.
    pub fn build(quadruples: &[Quadruple], node_count: usize, self_loops: bool) -> Result<Self> {
        let mut heads: HashMap<usize, BTreeSet<usize>> = HashMap::new();
        let mut tails: HashMap<usize, BTreeSet<usize>> = HashMap::new();
        for q in quadruples {
            if q.relation >= node_count {
                return Err(Error::IndexOutOfRange {
                    what: "relation",
                    index: q.relation,
                    bound: node_count,
                });
            }
            heads.entry(q.head).or_default().insert(q.relation);
            tails.entry(q.tail).or_default().insert(q.relation);
        }
        let empty = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let entities: BTreeSet<usize> = heads.keys().chain(tails.keys()).copied().collect();
        for e in entities {
            let h = heads.get(&e).unwrap_or(&empty);
            let t = tails.get(&e).unwrap_or(&empty);
            for (kind, left, right) in [
                (InteractionKind::H2H, h, h),
                (InteractionKind::H2T, h, t),
                (InteractionKind::T2H, t, h),
                (InteractionKind::T2T, t, t),
            ] {
                for &a in left {
                    for &b in right {
                        if self_loops || a != b {
                            edges.insert((a, kind, b));
                        }
                    }
                }
            }
        }
        Ok(Self::from_edges(node_count, edges.into_iter().collect()))
    }

    fn from_edges(node_count: usize, edges: Vec<RelationEdge>) -> Self {
        let mut adjacency: [Vec<Vec<usize>>; 4] = Default::default();
        for adj in adjacency.iter_mut() {
            adj.resize(node_count, Vec::new());
        }
        // `edges` is sorted by (source, kind, target), so lists come out sorted.
        for &(a, k, b) in &edges {
            adjacency[k.index()][a].push(b);
        }
        Self {
            node_count,
            edges,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Sorted edge list.
    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    /// Sorted, deduplicated `w` with `(relation, kind, w)` in the graph.
    pub fn neighbors(&self, relation: usize, kind: InteractionKind) -> Result<&[usize]> {
        if relation >= self.node_count {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                index: relation,
                bound: self.node_count,
            });
        }
        Ok(&self.adjacency[kind.index()][relation])
    }

    /// One `source kind target` line per edge, sorted.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for &(a, k, b) in &self.edges {
            writeln!(out, "{a} {} {b}", k.name()).unwrap();
        }
        out
    }
}
