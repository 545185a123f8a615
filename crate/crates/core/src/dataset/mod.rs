//! Temporal knowledge graph datasets: ingestion, integer vocabularies,
//! ordered timestamps, splits and structural pattern subsets.

mod bundle;
mod parse;
mod patterns;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{load_bundle, save_bundle};
pub use parse::{parse_quadruples, RawQuad};
pub use patterns::{extract_inverse_subset, extract_symmetric_subset, PatternKind, PatternSubset};

/// A temporal fact `(head, relation, tail, time_index)` over integer ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quadruple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
    pub time: usize,
}

impl Quadruple {
    pub const fn new(head: usize, relation: usize, tail: usize, time: usize) -> Self {
        Self {
            head,
            relation,
            tail,
            time,
        }
    }
}

impl fmt::Display for Quadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.head, self.relation, self.tail, self.time)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Observed,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Observed, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Observed => "observed",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}")))
    }
}

/// How raw timestamp labels are ordered. Only the order matters downstream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampOrdering {
    Integer,
    #[default]
    Iso,
    Lexicographic,
}

impl FromStr for TimestampOrdering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer" => Ok(Self::Integer),
            "iso" => Ok(Self::Iso),
            "lexicographic" => Ok(Self::Lexicographic),
            other => Err(Error::Config(format!("unknown timestamp ordering {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum TimeKey {
    Integer(i64),
    Instant(NaiveDateTime),
    Text(String),
}

fn time_key(label: &str, ordering: TimestampOrdering) -> Result<TimeKey> {
    let trimmed = label.trim();
    let bad = || Error::UnparseableTimestamp(label.to_string());
    match ordering {
        TimestampOrdering::Integer => trimmed.parse().map(TimeKey::Integer).map_err(|_| bad()),
        TimestampOrdering::Lexicographic => Ok(TimeKey::Text(label.to_string())),
        TimestampOrdering::Iso => {
            if let Ok(d) = NaiveDate::parse_from_str(trimmed, "%Y-%m-%d") {
                return Ok(TimeKey::Instant(d.and_hms_opt(0, 0, 0).unwrap()));
            }
            for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
                if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, fmt) {
                    return Ok(TimeKey::Instant(dt));
                }
            }
            // Bare years, e.g. yearly granularity.
            if let Ok(y) = trimmed.parse::<i32>() {
                if let Some(d) = NaiveDate::from_ymd_opt(y, 1, 1) {
                    return Ok(TimeKey::Instant(d.and_hms_opt(0, 0, 0).unwrap()));
                }
            }
            Err(bad())
        }
    }
}

/// Raw records for each split, before vocabulary construction.
#[derive(Clone, Debug, Default)]
pub struct RawSplits {
    pub train: Vec<RawQuad>,
    pub observed: Vec<RawQuad>,
    pub valid: Vec<RawQuad>,
    pub test: Vec<RawQuad>,
}

impl RawSplits {
    pub fn get(&self, split: Split) -> &[RawQuad] {
        match split {
            Split::Train => &self.train,
            Split::Observed => &self.observed,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut Vec<RawQuad> {
        match split {
            Split::Train => &mut self.train,
            Split::Observed => &mut self.observed,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }
}

/// An integer-indexed temporal knowledge graph with its own vocabularies.
///
/// Every split is stored sorted and duplicate-free. After
/// [`TkgDataset::augment_inverses`] relation `p + R` is the inverse of `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TkgDataset {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    timestamps: Vec<String>,
    splits: [Vec<Quadruple>; 4],
    inverse_augmented: bool,
}

fn intern(vocab: &mut Vec<String>, index: &mut HashMap<String, usize>, label: &str) -> usize {
    if let Some(&i) = index.get(label) {
        return i;
    }
    vocab.push(label.to_string());
    index.insert(label.to_string(), vocab.len() - 1);
    vocab.len() - 1
}

impl TkgDataset {
    /// Build vocabularies over all splits (entities and relations in first
    /// appearance order, timestamps sorted under `ordering`).
    pub fn build(raw: &RawSplits, ordering: TimestampOrdering) -> Result<Self> {
        let mut keyed: Vec<(TimeKey, String)> = Vec::new();
        let mut seen = HashMap::new();
        for split in Split::ALL {
            for r in raw.get(split) {
                if !seen.contains_key(&r.time) {
                    seen.insert(r.time.clone(), ());
                    keyed.push((time_key(&r.time, ordering)?, r.time.clone()));
                }
            }
        }
        keyed.sort();
        let timestamps: Vec<String> = keyed.into_iter().map(|(_, l)| l).collect();
        let time_index: HashMap<&str, usize> = timestamps
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();

        let (mut entities, mut entity_index) = (Vec::new(), HashMap::new());
        let (mut relations, mut relation_index) = (Vec::new(), HashMap::new());
        let mut splits: [Vec<Quadruple>; 4] = Default::default();
        for split in Split::ALL {
            let mut set = BTreeSet::new();
            for r in raw.get(split) {
                let h = intern(&mut entities, &mut entity_index, &r.head);
                let p = intern(&mut relations, &mut relation_index, &r.relation);
                let t = intern(&mut entities, &mut entity_index, &r.tail);
                set.insert(Quadruple::new(h, p, t, time_index[r.time.as_str()]));
            }
            splits[split.slot()] = set.into_iter().collect();
        }
        Self::from_parts(entities, relations, timestamps, splits)
    }

    /// Assemble from already-indexed parts, validating bounds and
    /// disjointness. Splits are sorted and deduplicated.
    pub fn from_parts(
        entity_names: Vec<String>,
        relation_names: Vec<String>,
        timestamps: Vec<String>,
        mut splits: [Vec<Quadruple>; 4],
    ) -> Result<Self> {
        let (nv, nr, nt) = (entity_names.len(), relation_names.len(), timestamps.len());
        for facts in splits.iter_mut() {
            facts.sort_unstable();
            facts.dedup();
            for q in facts.iter() {
                for (what, index, bound) in [
                    ("entity", q.head, nv),
                    ("entity", q.tail, nv),
                    ("relation", q.relation, nr),
                    ("time", q.time, nt),
                ] {
                    if index >= bound {
                        return Err(Error::IndexOutOfRange { what, index, bound });
                    }
                }
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                if let Some(q) = first_common(&splits[a], &splits[b]) {
                    return Err(Error::OverlappingSplits {
                        fact: q.to_string(),
                        first: Split::ALL[a].name(),
                        second: Split::ALL[b].name(),
                    });
                }
            }
        }
        Ok(Self {
            entity_names,
            relation_names,
            timestamps,
            splits,
            inverse_augmented: false,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    /// Relations in the original vocabulary (excluding inverses).
    pub fn base_relation_count(&self) -> usize {
        self.relation_names.len()
    }

    /// `|R'|`: doubled after inverse augmentation.
    pub fn relation_count(&self) -> usize {
        if self.inverse_augmented {
            2 * self.relation_names.len()
        } else {
            self.relation_names.len()
        }
    }

    pub fn time_count(&self) -> usize {
        self.timestamps.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn is_inverse_augmented(&self) -> bool {
        self.inverse_augmented
    }

    pub fn relation_label(&self, relation: usize) -> String {
        let r = self.relation_names.len();
        if relation < r {
            self.relation_names[relation].clone()
        } else {
            format!("{}^-1", self.relation_names[relation - r])
        }
    }

    /// Inverse relation id (only meaningful once augmented).
    pub fn inverse_of(&self, relation: usize) -> usize {
        let r = self.relation_names.len();
        if relation < r {
            relation + r
        } else {
            relation - r
        }
    }

    pub fn split(&self, split: Split) -> &[Quadruple] {
        &self.splits[split.slot()]
    }

    /// All facts of every split, sorted.
    pub fn all_quadruples(&self) -> Vec<Quadruple> {
        let mut all: Vec<Quadruple> = self.splits.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Facts at time index `i`, across all splits.
    pub fn snapshot(&self, i: usize) -> Result<Vec<Quadruple>> {
        if i >= self.time_count() {
            return Err(Error::IndexOutOfRange {
                what: "time",
                index: i,
                bound: self.time_count(),
            });
        }
        let mut out: Vec<Quadruple> = self
            .splits
            .iter()
            .flatten()
            .filter(|q| q.time == i)
            .copied()
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Add `(o, p + R, s, t)` for every `(s, p, o, t)`, in the same split.
    pub fn augment_inverses(&self) -> Result<Self> {
        if self.inverse_augmented {
            return Err(Error::AlreadyAugmented);
        }
        let r = self.relation_names.len();
        let mut out = self.clone();
        for facts in out.splits.iter_mut() {
            let inverses: Vec<Quadruple> = facts
                .iter()
                .map(|q| Quadruple::new(q.tail, q.relation + r, q.head, q.time))
                .collect();
            facts.extend(inverses);
            facts.sort_unstable();
            facts.dedup();
        }
        out.inverse_augmented = true;
        Ok(out)
    }

    /// Drop inverse facts, returning the original dataset.
    pub fn base(&self) -> Self {
        if !self.inverse_augmented {
            return self.clone();
        }
        let r = self.relation_names.len();
        let mut out = self.clone();
        for facts in out.splits.iter_mut() {
            facts.retain(|q| q.relation < r);
        }
        out.inverse_augmented = false;
        out
    }
}

fn first_common(a: &[Quadruple], b: &[Quadruple]) -> Option<Quadruple> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Some(a[i]),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(h: &str, r: &str, t: &str, ts: &str) -> RawQuad {
        RawQuad::new(h, r, t, ts)
    }

    #[test]
    fn timestamps_sorted_by_date() {
        let splits = RawSplits {
            train: vec![raw("a", "p", "b", "2014-01-05"), raw("a", "p", "c", "2014-01-03")],
            ..Default::default()
        };
        let d = TkgDataset::build(&splits, TimestampOrdering::Iso).unwrap();
        assert_eq!(d.timestamps(), &["2014-01-03", "2014-01-05"]);
        let q = d.split(Split::Train);
        // (a,p,c) is at index 0, (a,p,b) at index 1
        assert!(q.contains(&Quadruple::new(0, 0, 1, 1)));
        assert!(q.contains(&Quadruple::new(0, 0, 2, 0)));
    }

    #[test]
    fn integer_ordering_is_numeric() {
        let splits = RawSplits {
            train: vec![raw("a", "p", "b", "10"), raw("a", "p", "b", "9")],
            ..Default::default()
        };
        let d = TkgDataset::build(&splits, TimestampOrdering::Integer).unwrap();
        assert_eq!(d.timestamps(), &["9", "10"]);
        let lex = TkgDataset::build(&splits, TimestampOrdering::Lexicographic).unwrap();
        assert_eq!(lex.timestamps(), &["10", "9"]);
    }

    #[test]
    fn unparseable_timestamp() {
        let splits = RawSplits {
            train: vec![raw("a", "p", "b", "yesterday")],
            ..Default::default()
        };
        assert!(matches!(
            TkgDataset::build(&splits, TimestampOrdering::Iso),
            Err(Error::UnparseableTimestamp(_))
        ));
        assert!(TkgDataset::build(&splits, TimestampOrdering::Integer).is_err());
    }

    #[test]
    fn duplicates_collapse() {
        let splits = RawSplits {
            train: vec![raw("a", "p", "b", "1"), raw("a", "p", "b", "1")],
            ..Default::default()
        };
        let d = TkgDataset::build(&splits, TimestampOrdering::Integer).unwrap();
        assert_eq!(d.split(Split::Train).len(), 1);
    }

    #[test]
    fn overlapping_splits_rejected() {
        let splits = RawSplits {
            train: vec![raw("a", "p", "b", "1")],
            test: vec![raw("a", "p", "b", "1")],
            ..Default::default()
        };
        assert!(matches!(
            TkgDataset::build(&splits, TimestampOrdering::Integer),
            Err(Error::OverlappingSplits { .. })
        ));
    }

    fn tiny() -> TkgDataset {
        TkgDataset::from_parts(
            vec!["e0".into(), "e1".into(), "e2".into()],
            vec!["p".into()],
            vec!["t0".into(), "t1".into(), "t2".into()],
            [
                vec![Quadruple::new(0, 0, 1, 0), Quadruple::new(1, 0, 2, 1)],
                vec![],
                vec![],
                vec![],
            ],
        )
        .unwrap()
    }

    #[test]
    fn snapshots_partition_facts() {
        let d = tiny();
        assert_eq!(d.snapshot(0).unwrap(), vec![Quadruple::new(0, 0, 1, 0)]);
        assert!(d.snapshot(2).unwrap().is_empty());
        assert!(d.snapshot(3).is_err());
        let mut union: Vec<_> = (0..3).flat_map(|i| d.snapshot(i).unwrap()).collect();
        union.sort();
        assert_eq!(union, d.all_quadruples());
    }

    #[test]
    fn inverse_augmentation() {
        let d = TkgDataset::from_parts(
            vec!["a".into(), "b".into()],
            vec!["p".into()],
            (0..4).map(|i| i.to_string()).collect(),
            [vec![Quadruple::new(0, 0, 1, 3)], vec![], vec![], vec![]],
        )
        .unwrap();
        let aug = d.augment_inverses().unwrap();
        assert_eq!(aug.relation_count(), 2);
        assert!(aug.split(Split::Train).contains(&Quadruple::new(1, 1, 0, 3)));
        assert!(matches!(aug.augment_inverses(), Err(Error::AlreadyAugmented)));
        assert_eq!(aug.base(), d);
        assert_eq!(aug.relation_label(1), "p^-1");
    }

    #[test]
    fn bounds_checked() {
        let r = TkgDataset::from_parts(
            vec!["a".into()],
            vec!["p".into()],
            vec!["t".into()],
            [vec![Quadruple::new(0, 0, 1, 0)], vec![], vec![], vec![]],
        );
        assert!(matches!(r, Err(Error::IndexOutOfRange { .. })));
    }
}
