use std::collections::BTreeMap;

use crate::autodiff::{indices, Indices};
use crate::dataset::Quadruple;
use crate::error::{Error, Result};
use crate::relation_graph::RelationGraph;

/// Index arrays for message passing over a [`RelationGraph`]. Edge
/// `(a, kind, b)` sends `b`'s state into `a`.
#[derive(Clone, Debug)]
pub struct RelationIndex {
    pub(crate) node_count: usize,
    pub(crate) dst: Indices,
    pub(crate) src: Indices,
    pub(crate) kind: Indices,
}

impl RelationIndex {
    pub fn new(graph: &RelationGraph) -> Self {
        let e = graph.edges();
        Self {
            node_count: graph.node_count(),
            dst: indices(e.iter().map(|x| x.0)),
            src: indices(e.iter().map(|x| x.2)),
            kind: indices(e.iter().map(|x| x.1.index())),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.dst.len()
    }
}

/// Message edges grouped by `(source, relation, target)`; each group keeps
/// every time index at which it occurs.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageGraph {
    pub(crate) node_count: usize,
    pub(crate) src: Indices,
    pub(crate) rel: Indices,
    pub(crate) dst: Indices,
    /// Distinct time indices, ascending.
    pub(crate) times: Vec<usize>,
    /// Per occurrence: position in `times` and owning group.
    pub(crate) occ_time: Indices,
    pub(crate) occ_group: Indices,
}

impl MessageGraph {
    /// Build from facts `(w, q, v, t)`, each a message from `w` to `v`.
    pub fn build<'a>(
        node_count: usize,
        relation_count: usize,
        facts: impl IntoIterator<Item = &'a Quadruple>,
    ) -> Result<Self> {
        let mut groups: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
        for q in facts {
            for (what, i, bound) in [
                ("entity", q.head, node_count),
                ("entity", q.tail, node_count),
                ("relation", q.relation, relation_count),
            ] {
                if i >= bound {
                    return Err(Error::IndexOutOfRange {
                        what,
                        index: i,
                        bound,
                    });
                }
            }
            groups.entry((q.head, q.relation, q.tail)).or_default().push(q.time);
        }
        let mut times: Vec<usize> = groups.values().flatten().copied().collect();
        times.sort_unstable();
        times.dedup();
        let (mut src, mut rel, mut dst) = (Vec::new(), Vec::new(), Vec::new());
        let (mut occ_time, mut occ_group) = (Vec::new(), Vec::new());
        for (g, ((w, q, v), ts)) in groups.into_iter().enumerate() {
            src.push(w);
            rel.push(q);
            dst.push(v);
            for t in ts {
                occ_time.push(times.binary_search(&t).expect("collected above"));
                occ_group.push(g);
            }
        }
        Ok(Self {
            node_count,
            src: src.into(),
            rel: rel.into(),
            dst: dst.into(),
            times,
            occ_time: occ_time.into(),
            occ_group: occ_group.into(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn group_count(&self) -> usize {
        self.src.len()
    }

    pub fn occurrence_count(&self) -> usize {
        self.occ_group.len()
    }

    /// All `(w, q, v, t)` occurrences.
    pub fn occurrences(&self) -> impl Iterator<Item = Quadruple> + '_ {
        self.occ_group.iter().zip(self.occ_time.iter()).map(|(&g, &t)| {
            Quadruple::new(self.src[g], self.rel[g], self.dst[g], self.times[t])
        })
    }

    pub fn contains(&self, fact: &Quadruple) -> bool {
        self.occurrences().any(|q| q == *fact)
    }
}

/// Facts available as message-passing context, with the relation graph
/// built over them.
#[derive(Clone, Debug)]
pub struct Context {
    entity_count: usize,
    relation_count: usize,
    /// Sorted by time index first.
    facts: Vec<Quadruple>,
    relations: RelationIndex,
}

impl Context {
    pub fn new(
        entity_count: usize,
        relation_count: usize,
        facts: impl IntoIterator<Item = Quadruple>,
        self_loops: bool,
    ) -> Result<Self> {
        let mut facts: Vec<Quadruple> = facts.into_iter().collect();
        facts.sort_by_key(|q| (q.time, q.head, q.relation, q.tail));
        facts.dedup();
        let graph = RelationGraph::build(&facts, relation_count, self_loops)?;
        Ok(Self {
            entity_count,
            relation_count,
            facts,
            relations: RelationIndex::new(&graph),
        })
    }

    pub fn facts(&self) -> &[Quadruple] {
        &self.facts
    }

    pub fn relations(&self) -> &RelationIndex {
        &self.relations
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    /// All facts except `exclude`.
    pub fn global(&self, exclude: &[Quadruple]) -> Result<MessageGraph> {
        self.graph(&self.facts, exclude)
    }

    /// Facts with time index in `[time - k, time + k]`, except `exclude`.
    pub fn window(&self, time: usize, k: usize, exclude: &[Quadruple]) -> Result<MessageGraph> {
        let lo = self.facts.partition_point(|q| q.time < time.saturating_sub(k));
        let hi = self.facts.partition_point(|q| q.time <= time.saturating_add(k));
        self.graph(&self.facts[lo..hi.max(lo)], exclude)
    }

    fn graph(&self, facts: &[Quadruple], exclude: &[Quadruple]) -> Result<MessageGraph> {
        MessageGraph::build(
            self.entity_count,
            self.relation_count,
            facts.iter().filter(|q| !exclude.contains(q)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_repeated_edges() {
        let facts = [
            Quadruple::new(0, 0, 1, 7),
            Quadruple::new(0, 0, 1, 2),
            Quadruple::new(1, 1, 0, 2),
        ];
        let g = MessageGraph::build(2, 2, &facts).unwrap();
        assert_eq!(g.group_count(), 2);
        assert_eq!(g.occurrence_count(), 3);
        assert_eq!(g.times, vec![2, 7]);
        let mut occ: Vec<_> = g.occurrences().collect();
        occ.sort();
        let mut want = facts.to_vec();
        want.sort();
        assert_eq!(occ, want);
        assert!(MessageGraph::build(2, 1, &facts).is_err());
    }

    #[test]
    fn window_and_exclusion() {
        let facts = (0..10).map(|t| Quadruple::new(t % 3, 0, (t + 1) % 3, t));
        let c = Context::new(3, 1, facts, true).unwrap();
        let w = c.window(4, 1, &[]).unwrap();
        let mut times: Vec<_> = w.occurrences().map(|q| q.time).collect();
        times.sort();
        assert_eq!(times, vec![3, 4, 5]);
        assert_eq!(c.window(0, 0, &[]).unwrap().occurrence_count(), 1);
        assert_eq!(c.window(4, 100, &[]).unwrap(), c.global(&[]).unwrap());
        let gone = Quadruple::new(1, 0, 2, 4);
        let g = c.global(&[gone]).unwrap();
        assert_eq!(g.occurrence_count(), 9);
        assert!(!g.contains(&gone));
    }

    #[test]
    fn empty_graph() {
        let g = MessageGraph::build(3, 1, &[]).unwrap();
        assert_eq!(g.group_count(), 0);
        assert!(g.times.is_empty());
    }
}
