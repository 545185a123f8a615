//! Finite-difference checks over every differentiable op, every temporal
//! message kind and a complete two-layer model.

use std::fmt::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check, grad_check_with, indices, GradCheckReport, Stencil, Tape, Tensor, Var};
use crate::dataset::Quadruple;
use crate::error::Result;
use crate::model::{score_all, t_msg, Context, ModelConfig, ModelParams, Query, TMsgKind};

fn d_seeds() -> u64 {
    20
}
fn d_h() -> f64 {
    1e-6
}
fn d_tol() -> f64 {
    1e-4
}
fn d_stack_h() -> f64 {
    1e-4
}
fn d_stack_tol() -> f64 {
    1e-3
}
fn d_stack_stencil() -> Stencil {
    Stencil::FivePoint
}
fn d_stack_seeds() -> u64 {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradSuiteConfig {
    #[serde(default = "d_seeds")]
    pub seeds: u64,
    #[serde(default = "d_h")]
    pub h: f64,
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default = "d_stack_seeds")]
    pub stack_seeds: u64,
    #[serde(default = "d_stack_h")]
    pub stack_h: f64,
    #[serde(default = "d_stack_tol")]
    pub stack_tolerance: f64,
    #[serde(default = "d_stack_stencil")]
    pub stack_stencil: Stencil,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub name: String,
    pub seeds: u64,
    /// Report of the seed with the largest relative error.
    pub worst: GradCheckReport,
    pub passed: bool,
}

type Case = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;
/// `(name, input shapes, case)`.
type OpCase = (&'static str, Vec<(usize, usize)>, Case);

/// Weighted sum with fixed irregular weights, so every output element
/// contributes a distinct gradient.
fn probe(t: &mut Tape, y: Var) -> Result<Var> {
    let shape = t.value(y).shape().to_vec();
    let n = t.value(y).len();
    let w = (0..n).map(|k| (1.3 * k as f64 + 0.7).sin()).collect();
    let w = t.constant(Tensor::new(shape, w)?);
    let p = t.mul(y, w)?;
    t.sum(p, None)
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("nonzero dims")
}

/// `(name, input shapes, function)` for each op.
fn op_cases() -> Vec<OpCase> {
    fn c<F: Fn(&mut Tape, &[Var]) -> Result<Var> + 'static>(f: F) -> Case {
        Box::new(f)
    }
    vec![
        ("add", vec![(3, 4), (3, 4)], c(|t, v| {
            let y = t.add(v[0], v[1])?;
            probe(t, y)
        })),
        ("sub", vec![(3, 4), (3, 4)], c(|t, v| {
            let y = t.sub(v[0], v[1])?;
            probe(t, y)
        })),
        ("mul", vec![(3, 4), (3, 4)], c(|t, v| {
            let y = t.mul(v[0], v[1])?;
            probe(t, y)
        })),
        ("scale", vec![(3, 4)], c(|t, v| {
            let y = t.scale(v[0], -2.5);
            probe(t, y)
        })),
        ("scalar_mul", vec![(1, 1), (3, 4)], c(|t, v| {
            let y = t.scalar_mul(v[0], v[1])?;
            probe(t, y)
        })),
        ("matmul", vec![(3, 4), (4, 2)], c(|t, v| {
            let y = t.matmul(v[0], v[1])?;
            probe(t, y)
        })),
        ("concat_rows", vec![(2, 3), (1, 3)], c(|t, v| {
            let y = t.concat(&[v[0], v[1]], 0)?;
            probe(t, y)
        })),
        ("concat_cols", vec![(2, 3), (2, 1)], c(|t, v| {
            let y = t.concat(&[v[0], v[1]], 1)?;
            probe(t, y)
        })),
        ("gather", vec![(4, 3)], c(|t, v| {
            let y = t.gather(v[0], indices([2, 0, 2, 3]))?;
            probe(t, y)
        })),
        ("scatter_add", vec![(5, 3)], c(|t, v| {
            let y = t.scatter_add(4, 3, indices([1, 3, 1, 0, 1]), Some(v[0]))?;
            probe(t, y)
        })),
        ("relu", vec![(3, 4)], c(|t, v| {
            let y = t.relu(v[0]);
            probe(t, y)
        })),
        ("sigmoid", vec![(3, 4)], c(|t, v| {
            let y = t.sigmoid(v[0]);
            probe(t, y)
        })),
        ("layer_normalize", vec![(3, 4)], c(|t, v| {
            let y = t.layer_normalize(v[0], 1e-5)?;
            probe(t, y)
        })),
        ("sum_all", vec![(3, 4)], c(|t, v| {
            let y = t.sum(v[0], None)?;
            probe(t, y)
        })),
        ("sum_rows", vec![(3, 4)], c(|t, v| {
            let y = t.sum(v[0], Some(0))?;
            probe(t, y)
        })),
        ("sum_cols", vec![(3, 4)], c(|t, v| {
            let y = t.sum(v[0], Some(1))?;
            probe(t, y)
        })),
        ("complex_hadamard", vec![(3, 4), (3, 4)], c(|t, v| {
            let y = t.complex_hadamard(v[0], v[1])?;
            probe(t, y)
        })),
        ("bce_with_logits", vec![(1, 2), (3, 4)], c(|t, v| Ok(t.bce_with_logits(v[0], v[1])))),
        ("sinusoid", vec![(1, 3)], c(|t, v| {
            let times: Arc<[f64]> = Arc::from(vec![0.0, 1.0, 2.5, 7.0]);
            let y = t.sinusoid(v[0], times)?;
            probe(t, y)
        })),
    ]
}

fn accumulate(entry: &mut Option<SuiteEntry>, name: &str, report: GradCheckReport) {
    match entry {
        None => {
            *entry = Some(SuiteEntry {
                name: name.to_string(),
                seeds: 1,
                passed: report.passed,
                worst: report,
            })
        }
        Some(e) => {
            e.seeds += 1;
            e.passed &= report.passed;
            if report.max_rel_error > e.worst.max_rel_error {
                e.worst = report;
            }
        }
    }
}

fn stack_case(kind: TMsgKind, seed: u64, suite: &GradSuiteConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        d: 4,
        relation_layers: 2,
        entity_layers: 2,
        t_msg_kind: kind,
        alpha: 0.3,
        k: 1,
        share_local_global: false,
        trainable_omega: true,
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(&config, seed)?;
    // Perturb zero biases and unit scales away from their special values.
    for v in params.values_mut() {
        for x in v.data_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
    }
    let (entities, relations, times) = (8, 3, 5);
    let facts: Vec<Quadruple> = (0..20)
        .map(|_| {
            Quadruple::new(
                rng.gen_range(0..entities),
                rng.gen_range(0..relations),
                rng.gen_range(0..entities),
                rng.gen_range(0..times),
            )
        })
        .collect();
    let ctx = Context::new(entities, relations, facts, true)?;
    let q = Query::new(1, 2, 2);
    let global = ctx.global(&[])?;
    let local = ctx.window(q.time, config.k, &[])?;
    grad_check_with(
        |t: &mut Tape, v: &[Var]| {
            let s = score_all(t, &params, v, ctx.relations(), Some(&global), Some(&local), q)?;
            let pos = t.gather(s, indices([3]))?;
            let neg = t.gather(s, indices([0, 5, 6]))?;
            Ok(t.bce_with_logits(pos, neg))
        },
        params.values(),
        suite.stack_h,
        suite.stack_tolerance,
        suite.stack_stencil,
    )
}

pub fn run(config: &GradSuiteConfig) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for (name, shapes, f) in op_cases() {
        let mut entry = None;
        for seed in 0..config.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| rand_matrix(&mut rng, r, c)).collect();
            accumulate(&mut entry, name, grad_check(&f, &inputs, config.h, config.tolerance)?);
        }
        out.extend(entry);
    }
    for kind in TMsgKind::ALL {
        let name = format!("t_msg.{}", kind.name());
        let mut entry = None;
        for seed in 0..config.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs: Vec<Tensor> = (0..5).map(|_| rand_matrix(&mut rng, 3, 4)).collect();
            let report = grad_check(
                |t: &mut Tape, v: &[Var]| {
                    let m = t_msg(t, kind, v[0], v[1], v[2], Some(v[3]))?;
                    let w = t.mul(m, v[4])?;
                    t.sum(w, None)
                },
                &inputs,
                config.h,
                config.tolerance,
            )?;
            accumulate(&mut entry, &name, report);
        }
        out.extend(entry);
    }
    for kind in TMsgKind::ALL {
        let name = format!("stack.{}", kind.name());
        let mut entry = None;
        for seed in 0..config.stack_seeds {
            accumulate(
                &mut entry,
                &name,
                stack_case(kind, seed, config)?,
            );
        }
        out.extend(entry);
    }
    Ok(out)
}

pub fn report_text(entries: &[SuiteEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        let tag = if e.passed { "PASS" } else { "FAIL" };
        writeln!(
            s,
            "[{tag}] {:<22} seeds {:>2} max_rel_error {:.3e} tol {:.0e} compared {} skipped {}",
            e.name, e.seeds, e.worst.max_rel_error, e.worst.tolerance, e.worst.compared, e.worst.skipped
        )
        .unwrap();
    }
    let all = entries.iter().all(|e| e.passed);
    writeln!(s, "all_passed={all}").unwrap();
    s
}
