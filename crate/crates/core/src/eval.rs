//! Time-aware filtered ranking.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::dataset::{PatternKind, PatternSubset, Quadruple, Split, TkgDataset};
use crate::error::{Error, Result};
use crate::model::{score_all, Context, MessageGraph, ModelParams, Query};
use crate::parallel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Tail,
    Head,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tail => "tail",
            Self::Head => "head",
        }
    }
}

/// A ranking query in tail form. Head queries use the inverse relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EvalQuery {
    /// The original (non-inverse) fact.
    pub fact: Quadruple,
    pub direction: Direction,
    /// `(s, p, gold, t)` with `p` the inverse relation for head queries.
    pub tail_form: Quadruple,
}

/// One tail and one head query per original fact. Inverse facts in `facts`
/// are skipped, since they are covered by the head query of their twin.
pub fn generate_queries(dataset: &TkgDataset, facts: &[Quadruple]) -> Result<Vec<EvalQuery>> {
    if !dataset.is_inverse_augmented() {
        return Err(Error::NotAugmented);
    }
    let r = dataset.base_relation_count();
    let mut out = Vec::with_capacity(2 * facts.len());
    for f in facts.iter().filter(|f| f.relation < r) {
        out.push(EvalQuery {
            fact: *f,
            direction: Direction::Tail,
            tail_form: *f,
        });
        out.push(EvalQuery {
            fact: *f,
            direction: Direction::Head,
            tail_form: Quadruple::new(f.tail, f.relation + r, f.head, f.time),
        });
    }
    Ok(out)
}

/// Known true tails per `(head, relation, time)`.
#[derive(Clone, Debug, Default)]
pub struct KnownFacts {
    tails: HashMap<(usize, usize, usize), Vec<usize>>,
}

impl KnownFacts {
    pub fn new<'a>(facts: impl IntoIterator<Item = &'a Quadruple>) -> Self {
        let mut tails: HashMap<_, Vec<usize>> = HashMap::new();
        for f in facts {
            tails.entry((f.head, f.relation, f.time)).or_default().push(f.tail);
        }
        Self { tails }
    }

    /// Filter universe for a dataset: all four splits.
    pub fn of_dataset(dataset: &TkgDataset) -> Self {
        Self::new(Split::ALL.iter().flat_map(|&s| dataset.split(s)))
    }

    pub fn tails(&self, head: usize, relation: usize, time: usize) -> &[usize] {
        self.tails.get(&(head, relation, time)).map_or(&[], Vec::as_slice)
    }
}

/// Candidate mask (`true` = ranked): every entity except other tails known
/// true for the same head, relation and time index. The gold stays.
pub fn time_aware_filter(query: &Quadruple, known: &KnownFacts, entity_count: usize) -> Vec<bool> {
    let mut mask = vec![true; entity_count];
    for &o in known.tails(query.head, query.relation, query.time) {
        if o != query.tail && o < entity_count {
            mask[o] = false;
        }
    }
    mask
}

/// Mid-rank of `gold` among unmasked candidates:
/// `1 + #{greater} + #{tied, not gold} / 2`.
pub fn rank_of(scores: &[f64], gold: usize, mask: &[bool]) -> Result<f64> {
    if gold >= scores.len() || scores.len() != mask.len() {
        return Err(Error::IndexOutOfRange {
            what: "gold candidate",
            index: gold,
            bound: scores.len().min(mask.len()),
        });
    }
    if !mask[gold] {
        return Err(Error::GoldMasked);
    }
    let g = scores[gold];
    if !g.is_finite() {
        return Err(Error::Numeric(format!("gold score is {g}")));
    }
    let (mut greater, mut ties) = (0usize, 0usize);
    for (c, (&s, &keep)) in scores.iter().zip(mask).enumerate() {
        if !keep || c == gold {
            continue;
        }
        if s > g {
            greater += 1;
        } else if s == g {
            ties += 1;
        }
    }
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankResult {
    pub query: EvalQuery,
    pub rank: f64,
}

/// MRR and Hits@K. Metrics are `None` when there are no queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mrr: Option<f64>,
    pub hits1: Option<f64>,
    pub hits10: Option<f64>,
    pub query_count: usize,
}

impl MetricReport {
    pub fn from_ranks(ranks: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut rr, mut h1, mut h10) = (0usize, 0.0, 0usize, 0usize);
        for r in ranks {
            n += 1;
            rr += 1.0 / r;
            h1 += (r <= 1.0) as usize;
            h10 += (r <= 10.0) as usize;
        }
        if n == 0 {
            return Self {
                mrr: None,
                hits1: None,
                hits10: None,
                query_count: 0,
            };
        }
        let n_f = n as f64;
        Self {
            mrr: Some(rr / n_f),
            hits1: Some(h1 as f64 / n_f),
            hits10: Some(h10 as f64 / n_f),
            query_count: n,
        }
    }

    /// `key=value` lines; undefined metrics are omitted.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in [("mrr", self.mrr), ("hits1", self.hits1), ("hits10", self.hits10)] {
            if let Some(v) = v {
                writeln!(out, "{k}={v:.6}").unwrap();
            }
        }
        writeln!(out, "queries={}", self.query_count).unwrap();
        out
    }
}

/// `head,relation,tail,time,direction,rank` per query, with header.
pub fn ranks_csv(ranks: &[RankResult]) -> String {
    let mut out = String::from("head,relation,tail,time,direction,rank\n");
    for r in ranks {
        let f = r.query.fact;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f.head,
            f.relation,
            f.tail,
            f.time,
            r.query.direction.name(),
            r.rank
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Message passing over the observed split.
    Standard,
    /// Message passing over all facts earlier than the query time
    /// (inclusive of the query time when `inclusive`).
    SingleStep { inclusive: bool },
}

/// Context facts for standard evaluation: the observed split, or the
/// training split when no observed split exists (transductive data).
pub fn standard_context_facts(dataset: &TkgDataset) -> &[Quadruple] {
    let observed = dataset.split(Split::Observed);
    if observed.is_empty() {
        dataset.split(Split::Train)
    } else {
        observed
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricReport,
    pub ranks: Vec<RankResult>,
}

/// Scores for every entity as the tail of `query`.
pub fn score_query(
    params: &ModelParams,
    ctx: &Context,
    global: Option<&MessageGraph>,
    local: Option<&MessageGraph>,
    query: Query,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let s = score_all(&mut tape, params, &vars, ctx.relations(), global, local, query)?;
    let out = tape.value(s).data().to_vec();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite score for query {query:?}")));
    }
    Ok(out)
}

struct Prepared {
    ctx: Context,
    global: Option<MessageGraph>,
    locals: BTreeMap<usize, MessageGraph>,
}

impl Prepared {
    fn new(params: &ModelParams, dataset: &TkgDataset, facts: Vec<Quadruple>, times: &[usize]) -> Result<Self> {
        let c = params.config();
        let ctx = Context::new(dataset.entity_count(), dataset.relation_count(), facts, c.self_loops)?;
        let global = if c.alpha < 1.0 {
            Some(ctx.global(&[])?)
        } else {
            None
        };
        let mut locals = BTreeMap::new();
        if c.alpha > 0.0 {
            for &t in times {
                locals.insert(t, ctx.window(t, c.k, &[])?);
            }
        }
        Ok(Self { ctx, global, locals })
    }

    fn scores(&self, params: &ModelParams, q: &Quadruple) -> Result<Vec<f64>> {
        score_query(
            params,
            &self.ctx,
            self.global.as_ref(),
            self.locals.get(&q.time),
            Query::new(q.head, q.relation, q.time),
        )
    }
}

/// Rank every query (tail and head form) of `facts` against `dataset`.
pub fn evaluate_facts(
    params: &ModelParams,
    dataset: &TkgDataset,
    facts: &[Quadruple],
    mode: EvalMode,
) -> Result<Evaluation> {
    if dataset.relation_count() != dataset.base_relation_count() * 2 {
        return Err(Error::NotAugmented);
    }
    let queries = generate_queries(dataset, facts)?;
    let known = KnownFacts::of_dataset(dataset);
    let n = dataset.entity_count();
    let mut by_time: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        by_time.entry(q.tail_form.time).or_default().push(i);
    }
    let times: Vec<usize> = by_time.keys().copied().collect();
    let pool = parallel::pool()?;
    let rank_group = |prep: &Prepared, members: &[usize]| -> Result<Vec<(usize, f64)>> {
        pool.install(|| {
            members
                .par_iter()
                .map(|&i| {
                    let q = &queries[i].tail_form;
                    let scores = prep.scores(params, q)?;
                    let mask = time_aware_filter(q, &known, n);
                    Ok((i, rank_of(&scores, q.tail, &mask)?))
                })
                .collect()
        })
    };
    let mut ranks = vec![0.0; queries.len()];
    match mode {
        EvalMode::Standard => {
            let prep = Prepared::new(params, dataset, standard_context_facts(dataset).to_vec(), &times)?;
            let all: Vec<usize> = (0..queries.len()).collect();
            for (i, r) in rank_group(&prep, &all)? {
                ranks[i] = r;
            }
        }
        EvalMode::SingleStep { inclusive } => {
            let mut history: Vec<Quadruple> = Split::ALL
                .iter()
                .flat_map(|&s| dataset.split(s).iter().copied())
                .collect();
            history.sort_by_key(|q| q.time);
            // One context per distinct query time, built from the sorted
            // history prefix.
            for (&t, members) in &by_time {
                let end = if inclusive {
                    history.partition_point(|q| q.time <= t)
                } else {
                    history.partition_point(|q| q.time < t)
                };
                let prep = Prepared::new(params, dataset, history[..end].to_vec(), &[t])?;
                for (i, r) in rank_group(&prep, members)? {
                    ranks[i] = r;
                }
            }
        }
    }
    let ranks: Vec<RankResult> = queries
        .into_iter()
        .zip(ranks)
        .map(|(query, rank)| RankResult { query, rank })
        .collect();
    Ok(Evaluation {
        report: MetricReport::from_ranks(ranks.iter().map(|r| r.rank)),
        ranks,
    })
}

pub fn evaluate(
    params: &ModelParams,
    dataset: &TkgDataset,
    split: Split,
    mode: EvalMode,
) -> Result<Evaluation> {
    evaluate_facts(params, dataset, dataset.split(split), mode)
}

/// One evaluation per subset, each restricted to that subset's queries.
pub fn evaluate_pattern_subsets(
    params: &ModelParams,
    dataset: &TkgDataset,
    subsets: &[PatternSubset],
    mode: EvalMode,
) -> Result<Vec<(PatternKind, Evaluation)>> {
    subsets
        .iter()
        .map(|s| Ok((s.kind, evaluate_facts(params, dataset, &s.quadruples, mode)?)))
        .collect()
}

/// Same ranking protocol with i.i.d. uniform scores in place of the model.
pub fn random_baseline(dataset: &TkgDataset, facts: &[Quadruple], seed: u64) -> Result<MetricReport> {
    let queries = generate_queries(dataset, facts)?;
    let known = KnownFacts::of_dataset(dataset);
    let n = dataset.entity_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranks = Vec::with_capacity(queries.len());
    for q in &queries {
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mask = time_aware_filter(&q.tail_form, &known, n);
        ranks.push(rank_of(&scores, q.tail_form.tail, &mask)?);
    }
    Ok(MetricReport::from_ranks(ranks))
}

/// Expected MRR of a uniformly random ranking over each query's unmasked
/// candidates: the mean of `H_m / m`.
pub fn random_baseline_expectation(dataset: &TkgDataset, facts: &[Quadruple]) -> Result<f64> {
    let queries = generate_queries(dataset, facts)?;
    if queries.is_empty() {
        return Ok(0.0);
    }
    let known = KnownFacts::of_dataset(dataset);
    let n = dataset.entity_count();
    let total: f64 = queries
        .iter()
        .map(|q| {
            let m = time_aware_filter(&q.tail_form, &known, n).iter().filter(|&&k| k).count();
            (1..=m).map(|r| 1.0 / r as f64).sum::<f64>() / m as f64
        })
        .sum();
    Ok(total / queries.len() as f64)
}
