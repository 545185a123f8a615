use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{Quadruple, Split, TkgDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    Symmetric,
    Inverse,
}

/// Split facts that take part in a structural pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSubset {
    pub kind: PatternKind,
    pub quadruples: Vec<Quadruple>,
    /// Mined `(p, p') -> confidence` table (inverse kind only).
    pub support: BTreeMap<(usize, usize), f64>,
}

/// Original facts (inverse relations stripped) from all splits.
fn base_facts(dataset: &TkgDataset) -> Vec<Quadruple> {
    let r = dataset.base_relation_count();
    dataset
        .all_quadruples()
        .into_iter()
        .filter(|q| q.relation < r)
        .collect()
}

fn base_split(dataset: &TkgDataset, split: Split) -> impl Iterator<Item = &Quadruple> {
    let r = dataset.base_relation_count();
    dataset.split(split).iter().filter(move |q| q.relation < r)
}

/// Facts `(s, p, o, t1)` of `split` for which some `(o, p, s, t2)` is known
/// anywhere in the dataset.
pub fn extract_symmetric_subset(dataset: &TkgDataset, split: Split) -> PatternSubset {
    let triples: HashSet<(usize, usize, usize)> = base_facts(dataset)
        .iter()
        .map(|q| (q.head, q.relation, q.tail))
        .collect();
    let quadruples = base_split(dataset, split)
        .filter(|q| triples.contains(&(q.tail, q.relation, q.head)))
        .copied()
        .collect();
    PatternSubset {
        kind: PatternKind::Symmetric,
        quadruples,
        support: BTreeMap::new(),
    }
}

/// Mine relation pairs `(p, p')`, `p != p'`, where at least `min_confidence`
/// of the `p` facts `(s, p, o, t1)` have a matching `(o, p', s, t2)` and at
/// least two facts match. Returns the split facts whose relation takes part
/// in any mined pair.
pub fn extract_inverse_subset(
    dataset: &TkgDataset,
    split: Split,
    min_confidence: f64,
) -> PatternSubset {
    let facts = base_facts(dataset);
    let mut by_pair: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
    let mut per_relation: HashMap<usize, usize> = HashMap::new();
    for q in &facts {
        by_pair.entry((q.head, q.tail)).or_default().insert(q.relation);
        *per_relation.entry(q.relation).or_default() += 1;
    }
    let mut matches: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for q in &facts {
        if let Some(rels) = by_pair.get(&(q.tail, q.head)) {
            for &p2 in rels {
                if p2 != q.relation {
                    *matches.entry((q.relation, p2)).or_default() += 1;
                }
            }
        }
    }
    let mut support = BTreeMap::new();
    let mut involved = BTreeSet::new();
    for ((p, p2), m) in matches {
        let conf = m as f64 / per_relation[&p] as f64;
        if m >= 2 && conf >= min_confidence {
            support.insert((p, p2), conf);
            involved.insert(p);
            involved.insert(p2);
        }
    }
    let quadruples = base_split(dataset, split)
        .filter(|q| involved.contains(&q.relation))
        .copied()
        .collect();
    PatternSubset {
        kind: PatternKind::Inverse,
        quadruples,
        support,
    }
}
