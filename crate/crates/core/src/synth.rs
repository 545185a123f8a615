//! Planted-rule temporal datasets.
//!
//! Entities are split into three typed groups `X`, `Y`, `Z`. Rule instances
//! plant `(a, p1, b, t)` and `(b, p2, c, t + delta)` with `a in X`, `b in Y`,
//! `c in Z`; then, for every such pair present, `(a, p3, c, t + delta)` is
//! added. Remaining relations carry uniform noise over all entities. A share
//! of the derived `p3` facts is held out as the test split.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Quadruple, Split, TkgDataset};
use crate::error::{Error, Result};

fn d_test_fraction() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    pub timestamps: usize,
    pub rule_instances: usize,
    pub noise_facts: usize,
    pub delta: usize,
    /// Share of derived rule-head facts moved to the test split.
    #[serde(default = "d_test_fraction")]
    pub test_fraction: f64,
    /// Prefix making labels unique to this dataset.
    pub label_prefix: String,
    /// First raw timestamp value (labels are integers).
    #[serde(default)]
    pub time_offset: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.entities < 3 {
            return Err(Error::Config("synth needs at least 3 entities".into()));
        }
        if self.relations < 3 {
            return Err(Error::Config("synth needs at least 3 relations".into()));
        }
        if self.timestamps <= self.delta {
            return Err(Error::Config("synth timestamps must exceed delta".into()));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::Config("synth test_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Where non-held-out facts go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthRole {
    /// Training split (the source dataset).
    Source,
    /// Observed split (a dataset used only for inference).
    Target,
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub dataset: TkgDataset,
    /// Relation indices playing `p1`, `p2`, `p3`.
    pub rule_relations: [usize; 3],
    /// Every derived `p3` fact (held out or not).
    pub rule_heads: Vec<Quadruple>,
}

pub fn generate(config: &SynthConfig, role: SynthRole, seed: u64) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.entities;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let third = n / 3;
    let (xs, rest) = ids.split_at(third);
    let (ys, zs) = rest.split_at(third);
    let mut rels: Vec<usize> = (0..config.relations).collect();
    rels.shuffle(&mut rng);
    let (p1, p2, p3) = (rels[0], rels[1], rels[2]);
    let noise_rels = &rels[3..];

    let mut facts: BTreeSet<Quadruple> = BTreeSet::new();
    for _ in 0..config.rule_instances {
        let a = *xs.choose(&mut rng).expect("nonempty group");
        let b = *ys.choose(&mut rng).expect("nonempty group");
        let c = *zs.choose(&mut rng).expect("nonempty group");
        let t = rng.gen_range(0..config.timestamps - config.delta);
        facts.insert(Quadruple::new(a, p1, b, t));
        facts.insert(Quadruple::new(b, p2, c, t + config.delta));
    }
    if !noise_rels.is_empty() {
        for _ in 0..config.noise_facts {
            let r = *noise_rels.choose(&mut rng).expect("nonempty");
            let h = rng.gen_range(0..n);
            let o = rng.gen_range(0..n - 1);
            let o = if o >= h { o + 1 } else { o };
            facts.insert(Quadruple::new(h, r, o, rng.gen_range(0..config.timestamps)));
        }
    }

    // Rule closure over everything planted.
    let mut p2_by_head: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for f in facts.iter().filter(|f| f.relation == p2) {
        p2_by_head.entry((f.head, f.time)).or_default().push(f.tail);
    }
    let mut heads = BTreeSet::new();
    for f in facts.iter().filter(|f| f.relation == p1) {
        if let Some(cs) = p2_by_head.get(&(f.tail, f.time + config.delta)) {
            for &c in cs {
                heads.insert(Quadruple::new(f.head, p3, c, f.time + config.delta));
            }
        }
    }
    facts.extend(heads.iter().copied());

    let mut rule_heads: Vec<Quadruple> = heads.into_iter().collect();
    let mut shuffled = rule_heads.clone();
    shuffled.shuffle(&mut rng);
    let held = (config.test_fraction * shuffled.len() as f64).round() as usize;
    let test: BTreeSet<Quadruple> = shuffled.into_iter().take(held).collect();
    let rest: Vec<Quadruple> = facts.iter().filter(|f| !test.contains(f)).copied().collect();
    let mut splits: [Vec<Quadruple>; 4] = Default::default();
    let bucket = match role {
        SynthRole::Source => Split::Train,
        SynthRole::Target => Split::Observed,
    };
    splits[bucket as usize] = rest;
    splits[Split::Test as usize] = test.into_iter().collect();
    rule_heads.sort();

    let pre = &config.label_prefix;
    let dataset = TkgDataset::from_parts(
        (0..n).map(|i| format!("{pre}e{i}")).collect(),
        (0..config.relations).map(|i| format!("{pre}r{i}")).collect(),
        (0..config.timestamps)
            .map(|i| (config.time_offset + i as u64).to_string())
            .collect(),
        splits,
    )?;
    Ok(SynthDataset {
        dataset,
        rule_relations: [p1, p2, p3],
        rule_heads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(instances: usize, noise: usize) -> SynthConfig {
        SynthConfig {
            entities: 9,
            relations: 3,
            timestamps: 5,
            rule_instances: instances,
            noise_facts: noise,
            delta: 1,
            test_fraction: 0.0,
            label_prefix: "s:".into(),
            time_offset: 0,
        }
    }

    #[test]
    fn single_instance_gives_three_facts() {
        let s = generate(&cfg(1, 0), SynthRole::Source, 3).unwrap();
        let train = s.dataset.split(Split::Train);
        assert_eq!(train.len(), 3);
        let [p1, p2, p3] = s.rule_relations;
        let f1 = train.iter().find(|f| f.relation == p1).unwrap();
        let f2 = train.iter().find(|f| f.relation == p2).unwrap();
        let f3 = train.iter().find(|f| f.relation == p3).unwrap();
        assert_eq!((f3.head, f3.tail, f3.time), (f1.head, f2.tail, f2.time));
        assert_eq!((f1.tail, f2.time), (f2.head, f1.time + 1));
    }

    #[test]
    fn closure_holds_and_split_is_role_dependent() {
        let c = SynthConfig {
            entities: 30,
            relations: 6,
            timestamps: 20,
            rule_instances: 40,
            noise_facts: 50,
            delta: 2,
            test_fraction: 0.25,
            label_prefix: "b:".into(),
            time_offset: 100,
        };
        let s = generate(&c, SynthRole::Target, 1).unwrap();
        let d = &s.dataset;
        assert!(d.split(Split::Train).is_empty());
        let all = d.all_quadruples();
        let [p1, p2, p3] = s.rule_relations;
        for a in all.iter().filter(|f| f.relation == p1) {
            for b in all.iter().filter(|f| f.relation == p2 && f.head == a.tail && f.time == a.time + 2) {
                assert!(all.contains(&Quadruple::new(a.head, p3, b.tail, b.time)));
            }
        }
        let test = d.split(Split::Test);
        assert_eq!(test.len(), (0.25 * s.rule_heads.len() as f64).round() as usize);
        assert!(test.iter().all(|f| f.relation == p3));
        assert_eq!(d.timestamps()[0], "100");
        let again = generate(&c, SynthRole::Target, 1).unwrap();
        assert_eq!(again.dataset, s.dataset);
    }
}
