use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tkg_core::autodiff::{grad_check, grad_check_with, indices, Stencil, Tape, Tensor, Var};
use tkg_core::dataset::Quadruple;
use tkg_core::model::{
    encode_entities, encode_relations, score_all, t_msg, Context, EncodeMode, ModelConfig,
    ModelParams, Query, RelationIndex, TMsgKind,
};
use tkg_core::relation_graph::RelationGraph;

fn small_config(d: usize, layers: usize, kind: TMsgKind) -> ModelConfig {
    ModelConfig {
        d,
        relation_layers: layers,
        entity_layers: layers,
        t_msg_kind: kind,
        ..ModelConfig::default()
    }
}

/// Random params with nonzero biases and norm affines.
fn random_params(config: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for v in p.values_mut() {
        for x in v.data_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
    }
    p
}

fn random_facts(rng: &mut ChaCha8Rng, n: usize, entities: usize, relations: usize, times: usize) -> Vec<Quadruple> {
    (0..n)
        .map(|_| {
            Quadruple::new(
                rng.gen_range(0..entities),
                rng.gen_range(0..relations),
                rng.gen_range(0..entities),
                rng.gen_range(0..times),
            )
        })
        .collect()
}

fn param<'a>(p: &'a ModelParams, name: &str) -> &'a Tensor {
    let i = p.names().iter().position(|n| n == name).unwrap_or_else(|| panic!("{name}"));
    &p.values()[i]
}

fn relation_reps(p: &ModelParams, ctx: &Context, rel: usize) -> Tensor {
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape, false);
    let r = encode_relations(&mut tape, p, &vars, ctx.relations(), rel).unwrap();
    tape.value(r).clone()
}

#[test]
fn empty_relation_graph_rows() {
    let c = small_config(8, 3, TMsgKind::TComplEx);
    let p = random_params(&c, 1);
    let g = RelationGraph::build(&[], 4, true).unwrap();
    let idx = RelationIndex::new(&g);
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape, false);
    let r = encode_relations(&mut tape, &p, &vars, &idx, 2).unwrap();
    let v = tape.value(r);
    assert_eq!(v.row_slice(0), v.row_slice(1));
    assert_eq!(v.row_slice(0), v.row_slice(3));
    assert_ne!(v.row_slice(0), v.row_slice(2));
    assert!(encode_relations(&mut tape, &p, &vars, &idx, 4).is_err());
}

#[test]
fn relation_encoder_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = small_config(8, 3, TMsgKind::TComplEx);
    let p = random_params(&c, 2);
    for _ in 0..10 {
        let facts = random_facts(&mut rng, 20, 8, 5, 4);
        let mut perm: Vec<usize> = (0..5).collect();
        for i in (1..5).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let permuted: Vec<_> = facts
            .iter()
            .map(|q| Quadruple::new(q.head, perm[q.relation], q.tail, q.time))
            .collect();
        let a = Context::new(8, 5, facts, true).unwrap();
        let b = Context::new(8, 5, permuted, true).unwrap();
        let query = rng.gen_range(0..5);
        let ra = relation_reps(&p, &a, query);
        let rb = relation_reps(&p, &b, perm[query]);
        for r in 0..5 {
            for (x, y) in ra.row_slice(r).iter().zip(rb.row_slice(perm[r])) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn t_msg_examples() {
    let mut tape = Tape::new();
    let e = tape.constant(Tensor::row(&[1.0, 2.0, 3.0, 4.0]));
    let r = tape.constant(Tensor::row(&[0.5, -1.0, 2.0, 0.0]));
    let zero = tape.constant(Tensor::zeros(&[1, 4]));
    let m = t_msg(&mut tape, TMsgKind::TTransE, e, r, zero, None).unwrap();
    assert_eq!(tape.value(m).data(), &[1.5, 1.0, 5.0, 4.0]);

    let id = tape.constant(Tensor::row(&[1.0, 0.0, 1.0, 0.0]));
    let m = t_msg(&mut tape, TMsgKind::TComplEx, e, r, id, None).unwrap();
    let er = tape.complex_hadamard(e, r).unwrap();
    assert_eq!(tape.value(m).data(), tape.value(er).data());
    // (1 + 2i)(0.5 - i) = 2.5 + 0i
    assert_eq!(&tape.value(m).data()[..2], &[2.5, 0.0]);

    assert!(t_msg(&mut tape, TMsgKind::TNTComplEx, e, r, id, None).is_err());
    let odd = tape.constant(Tensor::row(&[1.0, 2.0, 3.0]));
    assert!(t_msg(&mut tape, TMsgKind::TComplEx, odd, odd, odd, None).is_err());
}

#[test]
fn t_msg_gradients() {
    for kind in TMsgKind::ALL {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs: Vec<Tensor> = (0..5)
                .map(|_| Tensor::matrix(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
                .collect();
            let report = grad_check(
                |t: &mut Tape, v: &[Var]| {
                    let m = t_msg(t, kind, v[0], v[1], v[2], Some(v[3]))?;
                    let w = t.mul(m, v[4])?;
                    t.sum(w, None)
                },
                &inputs,
                1e-6,
                1e-4,
            )
            .unwrap();
            assert!(report.passed, "{kind:?} seed {seed}: {report:?}");
        }
    }
}

fn entity_reps(p: &ModelParams, ctx: &Context, graph: &tkg_core::model::MessageGraph, q: Query, mode: EncodeMode) -> Tensor {
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape, false);
    let r = encode_relations(&mut tape, p, &vars, ctx.relations(), q.relation).unwrap();
    let e = encode_entities(&mut tape, p, &vars, graph, r, q, mode).unwrap();
    tape.value(e).clone()
}

#[test]
fn wide_window_matches_global() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let facts = random_facts(&mut rng, 30, 10, 3, 6);
    let ctx = Context::new(10, 3, facts, true).unwrap();
    let p = random_params(&small_config(8, 2, TMsgKind::TComplEx), 3);
    let q = Query::new(0, 1, 2);
    let g = entity_reps(&p, &ctx, &ctx.global(&[]).unwrap(), q, EncodeMode::Global);
    let l = entity_reps(&p, &ctx, &ctx.window(2, 6, &[]).unwrap(), q, EncodeMode::Local);
    assert!(g.max_abs_diff(&l) <= 1e-9);
}

#[test]
fn unreachable_entities_coincide() {
    // 0 -> 1 -> 2; entities 3, 4, 5 are disconnected.
    let facts = [Quadruple::new(0, 0, 1, 0), Quadruple::new(1, 0, 2, 1), Quadruple::new(3, 0, 4, 1)];
    let ctx = Context::new(6, 1, facts, true).unwrap();
    let p = random_params(&small_config(4, 2, TMsgKind::TTransE), 4);
    let e = entity_reps(&p, &ctx, &ctx.global(&[]).unwrap(), Query::new(0, 0, 1), EncodeMode::Global);
    assert_eq!(e.row_slice(3), e.row_slice(5));
    assert_ne!(e.row_slice(1), e.row_slice(5));
}

fn mat(a: &[f64], rows: usize, k: usize, b: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = (0..k).map(|t| a[i * k + t] * b[t * cols + j]).sum();
        }
    }
    out
}

fn cmul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.chunks(2)
        .zip(b.chunks(2))
        .flat_map(|(x, y)| [x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0]])
        .collect()
}

#[test]
fn grouped_times_match_per_occurrence_expansion() {
    let d = 4;
    let c = small_config(d, 1, TMsgKind::TComplEx);
    let p = random_params(&c, 6);
    let facts = [
        Quadruple::new(0, 0, 1, 2),
        Quadruple::new(0, 0, 1, 7),
        Quadruple::new(1, 1, 2, 3),
        Quadruple::new(0, 1, 2, 7),
    ];
    let ctx = Context::new(3, 2, facts, true).unwrap();
    let q = Query::new(0, 0, 7);
    let got = entity_reps(&p, &ctx, &ctx.global(&[]).unwrap(), q, EncodeMode::Global);

    let rel = relation_reps(&p, &ctx, 0);
    let mut e0 = vec![0.0; 3 * d];
    e0[..d].copy_from_slice(rel.row_slice(0));
    let proj = mat(rel.data(), 2, d, param(&p, "ent.0.rel_proj.w").data(), d);
    let te = c.temporal();
    let mut agg = vec![0.0; 3 * d];
    for f in &facts {
        let tw = mat(&te.encode(f.time as u64), 1, d, param(&p, "ent.0.time.w").data(), d);
        let t: Vec<f64> = tw.iter().zip(param(&p, "ent.0.time.b").data()).map(|(a, b)| a + b).collect();
        let er = cmul(&e0[f.head * d..(f.head + 1) * d], &proj[f.relation * d..(f.relation + 1) * d]);
        for (a, m) in agg[f.tail * d..(f.tail + 1) * d].iter_mut().zip(cmul(&er, &t)) {
            *a += m;
        }
    }
    let w = param(&p, "ent.0.update.w").data();
    let b = param(&p, "ent.0.update.b").data();
    let scale = param(&p, "ent.0.norm.scale").data();
    let offset = param(&p, "ent.0.norm.offset").data();
    for v in 0..3 {
        let x: Vec<f64> = agg[v * d..(v + 1) * d].iter().chain(&e0[v * d..(v + 1) * d]).copied().collect();
        let h: Vec<f64> = mat(&x, 1, 2 * d, w, d).iter().zip(b).map(|(a, b)| (a + b).max(0.0)).collect();
        let mean = h.iter().sum::<f64>() / d as f64;
        let var = h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d as f64;
        for j in 0..d {
            let want = (h[j] - mean) / (var + 1e-5).sqrt() * scale[j] + offset[j] + e0[v * d + j];
            assert!((got.at(v, j) - want).abs() <= 1e-12, "{v} {j}: {} vs {want}", got.at(v, j));
        }
    }
}

#[test]
fn entity_relabeling_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = random_params(&small_config(8, 2, TMsgKind::TNTComplEx), 7);
    for _ in 0..5 {
        let facts = random_facts(&mut rng, 25, 9, 3, 5);
        let mut perm: Vec<usize> = (0..9).collect();
        for i in (1..9).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let permuted: Vec<_> = facts
            .iter()
            .map(|q| Quadruple::new(perm[q.head], q.relation, perm[q.tail], q.time))
            .collect();
        let a = Context::new(9, 3, facts, true).unwrap();
        let b = Context::new(9, 3, permuted, true).unwrap();
        let q = Query::new(rng.gen_range(0..9), rng.gen_range(0..3), 2);
        let qp = Query::new(perm[q.head], q.relation, q.time);
        let ea = entity_reps(&p, &a, &a.global(&[]).unwrap(), q, EncodeMode::Global);
        let eb = entity_reps(&p, &b, &b.global(&[]).unwrap(), qp, EncodeMode::Global);
        for v in 0..9 {
            for (x, y) in ea.row_slice(v).iter().zip(eb.row_slice(perm[v])) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn end_to_end_stack_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for kind in TMsgKind::ALL {
        let c = ModelConfig {
            alpha: 0.3,
            k: 1,
            share_local_global: false,
            trainable_omega: true,
            ..small_config(4, 2, kind)
        };
        let p = random_params(&c, 8);
        let facts = random_facts(&mut rng, 20, 8, 3, 5);
        let ctx = Context::new(8, 3, facts, true).unwrap();
        let q = Query::new(1, 2, 2);
        let global = ctx.global(&[]).unwrap();
        let local = ctx.window(q.time, c.k, &[]).unwrap();
        let report = grad_check_with(
            |t: &mut Tape, v: &[Var]| {
                let s = score_all(t, &p, v, ctx.relations(), Some(&global), Some(&local), q)?;
                let pos = t.gather(s, indices([3]))?;
                let neg = t.gather(s, indices([0, 5, 6]))?;
                Ok(t.bce_with_logits(pos, neg))
            },
            p.values(),
            1e-4,
            1e-3,
            Stencil::FivePoint,
        )
        .unwrap();
        assert!(report.passed, "{kind:?}: {report:?}");
        assert!(report.compared > p.parameter_count() / 2);
    }
}

#[test]
fn encoding_time_grows_with_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = random_params(&small_config(16, 2, TMsgKind::TComplEx), 9);
    let mut times = Vec::new();
    for n in [500, 8000] {
        let ctx = Context::new(40, 4, random_facts(&mut rng, n, 40, 4, 50), true).unwrap();
        let g = ctx.global(&[]).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let start = Instant::now();
            entity_reps(&p, &ctx, &g, Query::new(0, 0, 3), EncodeMode::Global);
            best = best.min(start.elapsed().as_secs_f64());
        }
        times.push(best);
    }
    assert!(times[1] > times[0], "{times:?}");
}
