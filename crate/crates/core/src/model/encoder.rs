//! Conditional message passing: relation encoder, entity encoders and the
//! scoring head.

use std::sync::Arc;

use super::graph::{MessageGraph, RelationIndex};
use super::{EntLayer, ModelParams, RelationMsg, TMsgKind};
use crate::autodiff::{indices, repeat_row, Tape, Tensor, Var};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodeMode {
    Global,
    Local,
}

/// Tail query `(head, relation, ?, time)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub head: usize,
    pub relation: usize,
    pub time: usize,
}

impl Query {
    pub fn new(head: usize, relation: usize, time: usize) -> Self {
        Self {
            head,
            relation,
            time,
        }
    }
}

fn broadcast(tape: &mut Tape, row: Var, n: usize) -> Result<Var> {
    tape.gather(row, repeat_row(n))
}

/// `LN(relu([agg | prev] W + b)) * scale + offset + boundary`.
#[allow(clippy::too_many_arguments)]
fn update(
    tape: &mut Tape,
    agg: Var,
    prev: Var,
    w: Var,
    b: Var,
    scale: Var,
    offset: Var,
    boundary: Var,
) -> Result<Var> {
    let n = tape.value(prev).rows();
    let x = tape.concat(&[agg, prev], 1)?;
    let h = tape.matmul(x, w)?;
    let bias = broadcast(tape, b, n)?;
    let h = tape.add(h, bias)?;
    let h = tape.relu(h);
    let h = tape.layer_normalize(h, LN_EPS)?;
    let s = broadcast(tape, scale, n)?;
    let h = tape.mul(h, s)?;
    let o = broadcast(tape, offset, n)?;
    let h = tape.add(h, o)?;
    tape.add(h, boundary)
}

fn scatter(tape: &mut Tape, rows: usize, cols: usize, index: &Arc<[usize]>, msg: Option<Var>) -> Result<Var> {
    match msg {
        Some(m) => tape.scatter_add(rows, cols, index.clone(), Some(m)),
        None => tape.scatter_add(rows, cols, indices([]), None),
    }
}

/// Relation representations conditioned on query relation `p`: `|R'| x d`.
pub fn encode_relations(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &[Var],
    index: &RelationIndex,
    p: usize,
) -> Result<Var> {
    let n = index.node_count;
    if p >= n {
        return Err(Error::IndexOutOfRange {
            what: "query relation",
            index: p,
            bound: n,
        });
    }
    let d = params.config().d;
    let mut init = Tensor::zeros(&[n, d]);
    init.data_mut()[p * d..(p + 1) * d].fill(1.0);
    let boundary = tape.constant(init);
    let mut r = boundary;
    for layer in &params.layout.rel {
        let msg = if index.edge_count() > 0 {
            let src = tape.gather(r, index.src.clone())?;
            let h = tape.gather(vars[layer.interaction], index.kind.clone())?;
            Some(match params.config().relation_msg {
                RelationMsg::Product => tape.mul(src, h)?,
                RelationMsg::Additive => tape.add(src, h)?,
            })
        } else {
            None
        };
        let agg = scatter(tape, n, d, &index.dst, msg)?;
        r = update(
            tape,
            agg,
            r,
            vars[layer.update_w],
            vars[layer.update_b],
            vars[layer.scale],
            vars[layer.offset],
            boundary,
        )?;
    }
    Ok(r)
}

/// Temporal message combining a neighbour state, a projected relation and
/// an aggregated time embedding.
pub fn t_msg(
    tape: &mut Tape,
    kind: TMsgKind,
    e: Var,
    r: Var,
    t: Var,
    r_static: Option<Var>,
) -> Result<Var> {
    match kind {
        TMsgKind::TTransE => {
            let er = tape.add(e, r)?;
            tape.add(er, t)
        }
        TMsgKind::TComplEx => {
            let er = tape.complex_hadamard(e, r)?;
            tape.complex_hadamard(er, t)
        }
        TMsgKind::TNTComplEx => {
            let s = r_static.ok_or_else(|| {
                Error::Config("tntcomplex messages need a static relation term".into())
            })?;
            let rt = tape.complex_hadamard(r, t)?;
            let rt = tape.add(rt, s)?;
            tape.complex_hadamard(e, rt)
        }
    }
}

/// `TE(t)` rows for the given snapshot indices, `len x d`.
pub fn time_rows(tape: &mut Tape, params: &ModelParams, vars: &[Var], times: &[usize]) -> Result<Var> {
    match params.layout.omega {
        Some(o) => {
            let ts: Arc<[f64]> = times.iter().map(|&t| t as f64).collect();
            tape.sinusoid(vars[o], ts)
        }
        None => {
            let cfg = params.config().temporal();
            let d = cfg.dim;
            let mut data = Vec::with_capacity(times.len() * d);
            for &t in times {
                data.extend(cfg.encode(t as u64));
            }
            Ok(tape.constant(Tensor::matrix(times.len(), d, data)?))
        }
    }
}

/// Entity representations for `query` over `graph`: `|V| x d`. The mode
/// selects the parameter set (they coincide when local and global share
/// parameters); the caller supplies the matching edge set.
pub fn encode_entities(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &[Var],
    graph: &MessageGraph,
    rel_reps: Var,
    query: Query,
    mode: EncodeMode,
) -> Result<Var> {
    let n = graph.node_count;
    let d = params.config().d;
    let rel_rows = tape.value(rel_reps).rows();
    if query.head >= n {
        return Err(Error::IndexOutOfRange {
            what: "query head",
            index: query.head,
            bound: n,
        });
    }
    if query.relation >= rel_rows {
        return Err(Error::IndexOutOfRange {
            what: "query relation",
            index: query.relation,
            bound: rel_rows,
        });
    }
    if let Some(&bad) = graph.rel.iter().find(|&&q| q >= rel_rows) {
        return Err(Error::IndexOutOfRange {
            what: "edge relation",
            index: bad,
            bound: rel_rows,
        });
    }
    let layers: &[EntLayer] = match (mode, &params.layout.ent_local) {
        (EncodeMode::Local, Some(local)) => local,
        _ => &params.layout.ent,
    };
    let rp = tape.gather(rel_reps, indices([query.relation]))?;
    let boundary = tape.scatter_add(n, d, indices([query.head]), Some(rp))?;

    let groups = graph.group_count();
    // Per-group sum of TE over all occurrence times, and occurrence counts
    // (so the affine g^l can be applied once per group).
    let time_terms = if groups > 0 {
        let te = time_rows(tape, params, vars, &graph.times)?;
        let occ = tape.gather(te, graph.occ_time.clone())?;
        let summed = tape.scatter_add(groups, d, graph.occ_group.clone(), Some(occ))?;
        let mut counts = vec![0.0; groups];
        for &g in graph.occ_group.iter() {
            counts[g] += 1.0;
        }
        let counts = tape.constant(Tensor::matrix(groups, 1, counts)?);
        Some((summed, counts))
    } else {
        None
    };

    let mut e = boundary;
    for layer in layers {
        let msg = match time_terms {
            Some((summed, counts)) => {
                let ew = tape.gather(e, graph.src.clone())?;
                let proj = tape.matmul(rel_reps, vars[layer.rel_proj])?;
                let rq = tape.gather(proj, graph.rel.clone())?;
                let tw = tape.matmul(summed, vars[layer.time_w])?;
                let tb = tape.matmul(counts, vars[layer.time_b])?;
                let t = tape.add(tw, tb)?;
                let st = match layer.static_proj {
                    Some(w) => {
                        let s = tape.matmul(rel_reps, vars[w])?;
                        Some(tape.gather(s, graph.rel.clone())?)
                    }
                    None => None,
                };
                Some(t_msg(tape, params.config().t_msg_kind, ew, rq, t, st)?)
            }
            None => None,
        };
        let agg = scatter(tape, n, d, &graph.dst, msg)?;
        e = update(
            tape,
            agg,
            e,
            vars[layer.update_w],
            vars[layer.update_b],
            vars[layer.scale],
            vars[layer.offset],
            boundary,
        )?;
    }
    Ok(e)
}

/// Logits for every entity as the tail of `query`: `|V| x 1`.
///
/// `V = alpha * local + (1 - alpha) * global`, scored by a two-layer MLP on
/// `[V | TE(time)]`. A pass whose weight is zero is skipped and its graph
/// may be `None`.
pub fn score_all(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &[Var],
    relations: &RelationIndex,
    global: Option<&MessageGraph>,
    local: Option<&MessageGraph>,
    query: Query,
) -> Result<Var> {
    let alpha = params.config().alpha;
    let rel = encode_relations(tape, params, vars, relations, query.relation)?;
    let pass = |tape: &mut Tape, g: Option<&MessageGraph>, mode| -> Result<Var> {
        let g = g.ok_or_else(|| Error::Config(format!("missing {mode:?} message graph")))?;
        encode_entities(tape, params, vars, g, rel, query, mode)
    };
    let v = if alpha == 0.0 {
        pass(tape, global, EncodeMode::Global)?
    } else if alpha == 1.0 {
        pass(tape, local, EncodeMode::Local)?
    } else {
        let l = pass(tape, local, EncodeMode::Local)?;
        let g = pass(tape, global, EncodeMode::Global)?;
        let l = tape.scale(l, alpha);
        let g = tape.scale(g, 1.0 - alpha);
        tape.add(l, g)?
    };
    let n = tape.value(v).rows();
    let lay = &params.layout;
    let te = time_rows(tape, params, vars, &[query.time])?;
    let te = broadcast(tape, te, n)?;
    let x = tape.concat(&[v, te], 1)?;
    let h = tape.matmul(x, vars[lay.hidden_w])?;
    let hb = broadcast(tape, vars[lay.hidden_b], n)?;
    let h = tape.add(h, hb)?;
    let h = tape.relu(h);
    let out = tape.matmul(h, vars[lay.out_w])?;
    let ob = broadcast(tape, vars[lay.out_b], n)?;
    tape.add(out, ob)
}
