use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tkg_bench::{model, source_dataset, train_context};
use tkg_core::dataset::Split;
use tkg_core::eval::score_query;
use tkg_core::model::Query;
use tkg_core::relation_graph::RelationGraph;
use tkg_core::temporal::TemporalEncoderConfig;
use tkg_core::train::{negative_sample, query_loss};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn relation_graph(c: &mut Criterion) {
    let d = source_dataset(0);
    let facts = d.split(Split::Train);
    c.bench_function("relation_graph/build", |b| {
        b.iter(|| RelationGraph::build(black_box(facts), d.relation_count(), true).unwrap())
    });
}

fn temporal_table(c: &mut Criterion) {
    let te = TemporalEncoderConfig::geometric(64, 1e4).unwrap();
    c.bench_function("temporal/table_365x64", |b| b.iter(|| te.table(black_box(365))));
}

fn forward(c: &mut Criterion) {
    let d = source_dataset(0);
    let fact = d.split(Split::Train)[0];
    let mut group = c.benchmark_group("score_query");
    group.sample_size(10);
    for dim in [16, 64] {
        let params = model(dim, 2, 0);
        let ctx = train_context(&d, params.config().self_loops);
        let global = ctx.global(&[]).unwrap();
        let local = ctx.window(fact.time, params.config().k, &[]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| {
                score_query(
                    &params,
                    &ctx,
                    Some(&global),
                    Some(&local),
                    Query::new(fact.head, fact.relation, fact.time),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn backward(c: &mut Criterion) {
    let d = source_dataset(0);
    let fact = d.split(Split::Train)[0];
    let params = model(32, 2, 0);
    let ctx = train_context(&d, params.config().self_loops);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let negs = negative_sample(d.entity_count(), fact.tail, 32, &mut rng).unwrap();
    let mut group = c.benchmark_group("query_loss");
    group.sample_size(10);
    group.bench_function("d32_2layers", |b| {
        b.iter(|| query_loss(&params, &ctx, &fact, &negs, &[fact]).unwrap())
    });
    group.finish();
}

criterion_group!(benches, relation_graph, temporal_table, forward, backward);
criterion_main!(benches);
