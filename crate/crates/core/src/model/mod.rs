//! Model configuration and the vocabulary-independent parameter set.

mod encoder;
mod graph;

use std::fmt::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::temporal::TemporalEncoderConfig;

pub use encoder::{
    encode_entities, encode_relations, score_all, t_msg, time_rows, EncodeMode, Query,
};
pub use graph::{Context, MessageGraph, RelationIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TMsgKind {
    TTransE,
    TComplEx,
    TNTComplEx,
}

impl TMsgKind {
    pub const ALL: [TMsgKind; 3] = [Self::TTransE, Self::TComplEx, Self::TNTComplEx];

    pub fn name(self) -> &'static str {
        match self {
            Self::TTransE => "ttranse",
            Self::TComplEx => "tcomplex",
            Self::TNTComplEx => "tntcomplex",
        }
    }
}

impl FromStr for TMsgKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown t_msg_kind {s:?}")))
    }
}

/// Message function of the relation encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMsg {
    Product,
    Additive,
}

impl RelationMsg {
    pub fn name(self) -> &'static str {
        match self {
            Self::Product => "product",
            Self::Additive => "additive",
        }
    }
}

impl FromStr for RelationMsg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Self::Product),
            "additive" => Ok(Self::Additive),
            _ => Err(Error::Config(format!("unknown relation_msg {s:?}"))),
        }
    }
}

fn d_dim() -> usize {
    64
}
fn d_layers() -> usize {
    6
}
fn d_tmsg() -> TMsgKind {
    TMsgKind::TComplEx
}
fn d_rmsg() -> RelationMsg {
    RelationMsg::Product
}
fn d_alpha() -> f64 {
    0.5
}
fn d_k() -> usize {
    1
}
fn d_beta() -> f64 {
    10_000.0
}
fn d_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_dim")]
    pub d: usize,
    #[serde(default = "d_layers")]
    pub relation_layers: usize,
    #[serde(default = "d_layers")]
    pub entity_layers: usize,
    #[serde(default = "d_tmsg")]
    pub t_msg_kind: TMsgKind,
    #[serde(default = "d_rmsg")]
    pub relation_msg: RelationMsg,
    /// Weight of the local (windowed) representation.
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Local window half-width in snapshots.
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_true")]
    pub share_local_global: bool,
    #[serde(default)]
    pub trainable_omega: bool,
    #[serde(default = "d_true")]
    pub self_loops: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: d_dim(),
            relation_layers: d_layers(),
            entity_layers: d_layers(),
            t_msg_kind: d_tmsg(),
            relation_msg: d_rmsg(),
            alpha: d_alpha(),
            k: d_k(),
            beta: d_beta(),
            share_local_global: true,
            trainable_omega: false,
            self_loops: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || !self.d.is_multiple_of(2) {
            return Err(Error::Config(format!("model.d must be even and positive, got {}", self.d)));
        }
        if self.relation_layers == 0 || self.entity_layers == 0 {
            return Err(Error::Config("layer counts must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn temporal(&self) -> TemporalEncoderConfig {
        TemporalEncoderConfig {
            trainable: self.trainable_omega,
            ..TemporalEncoderConfig::geometric(self.d, self.beta).expect("validated config")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RelLayer {
    pub interaction: usize,
    pub update_w: usize,
    pub update_b: usize,
    pub scale: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct EntLayer {
    pub rel_proj: usize,
    pub static_proj: Option<usize>,
    pub time_w: usize,
    pub time_b: usize,
    pub update_w: usize,
    pub update_b: usize,
    pub scale: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub rel: Vec<RelLayer>,
    pub ent: Vec<EntLayer>,
    pub ent_local: Option<Vec<EntLayer>>,
    pub hidden_w: usize,
    pub hidden_b: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub omega: Option<usize>,
}

enum Init {
    Uniform,
    Zeros,
    Ones,
    Omega,
}

struct Builder {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    inits: Vec<Init>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.inits.push(init);
        self.names.len() - 1
    }

    fn ent_layers(&mut self, prefix: &str, c: &ModelConfig) -> Vec<EntLayer> {
        let d = c.d;
        (0..c.entity_layers)
            .map(|l| {
                let p = format!("{prefix}.{l}");
                EntLayer {
                    rel_proj: self.add(format!("{p}.rel_proj.w"), vec![d, d], Init::Uniform),
                    static_proj: (c.t_msg_kind == TMsgKind::TNTComplEx)
                        .then(|| self.add(format!("{p}.static_proj.w"), vec![d, d], Init::Uniform)),
                    time_w: self.add(format!("{p}.time.w"), vec![d, d], Init::Uniform),
                    time_b: self.add(format!("{p}.time.b"), vec![1, d], Init::Zeros),
                    update_w: self.add(format!("{p}.update.w"), vec![2 * d, d], Init::Uniform),
                    update_b: self.add(format!("{p}.update.b"), vec![1, d], Init::Zeros),
                    scale: self.add(format!("{p}.norm.scale"), vec![1, d], Init::Ones),
                    offset: self.add(format!("{p}.norm.offset"), vec![1, d], Init::Zeros),
                }
            })
            .collect()
    }
}

fn layout(c: &ModelConfig) -> (Layout, Builder) {
    let d = c.d;
    let mut b = Builder {
        names: Vec::new(),
        shapes: Vec::new(),
        inits: Vec::new(),
    };
    let rel = (0..c.relation_layers)
        .map(|l| RelLayer {
            interaction: b.add(format!("rel.{l}.interaction"), vec![4, d], Init::Uniform),
            update_w: b.add(format!("rel.{l}.update.w"), vec![2 * d, d], Init::Uniform),
            update_b: b.add(format!("rel.{l}.update.b"), vec![1, d], Init::Zeros),
            scale: b.add(format!("rel.{l}.norm.scale"), vec![1, d], Init::Ones),
            offset: b.add(format!("rel.{l}.norm.offset"), vec![1, d], Init::Zeros),
        })
        .collect();
    let ent = b.ent_layers("ent", c);
    let ent_local = (!c.share_local_global).then(|| b.ent_layers("local.ent", c));
    let lay = Layout {
        rel,
        ent,
        ent_local,
        hidden_w: b.add("score.hidden.w".into(), vec![2 * d, d], Init::Uniform),
        hidden_b: b.add("score.hidden.b".into(), vec![1, d], Init::Zeros),
        out_w: b.add("score.out.w".into(), vec![d, 1], Init::Uniform),
        out_b: b.add("score.out.b".into(), vec![1, 1], Init::Zeros),
        omega: c
            .trainable_omega
            .then(|| b.add("time.omega".into(), vec![1, d / 2], Init::Omega)),
    };
    (lay, b)
}

/// Learned parameters. Every shape is a function of the model config only.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    pub(crate) layout: Layout,
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ModelParams {
    /// Uniform `[-1/sqrt(d), 1/sqrt(d)]` weights, zero biases, unit norm scales.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, b) = layout(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (config.d as f64).sqrt();
        let omegas = config.temporal().frequencies();
        let values = b
            .shapes
            .iter()
            .zip(&b.inits)
            .map(|(shape, init)| match init {
                Init::Uniform => {
                    let n = shape.iter().product();
                    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
                    Tensor::new(shape.clone(), data).expect("valid shape")
                }
                Init::Zeros => Tensor::zeros(shape),
                Init::Ones => Tensor::filled(shape, 1.0),
                Init::Omega => Tensor::row(&omegas),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            names: b.names,
            values,
        })
    }

    /// Rebuild from stored tensors, checking names and shapes against the
    /// layout implied by `config`.
    pub fn from_tensors(config: &ModelConfig, entries: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let (layout, b) = layout(config);
        if entries.len() != b.names.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameter tensors, got {}",
                b.names.len(),
                entries.len()
            )));
        }
        let mut values = Vec::with_capacity(entries.len());
        for ((name, t), (want, shape)) in entries.into_iter().zip(b.names.iter().zip(&b.shapes)) {
            if &name != want || t.shape() != shape.as_slice() {
                return Err(Error::DimensionMismatch(format!(
                    "parameter {name} {:?} does not match expected {want} {shape:?}",
                    t.shape()
                )));
            }
            values.push(t);
        }
        Ok(Self {
            config: config.clone(),
            layout,
            names: b.names,
            values,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// `name dim0xdim1` per line, in storage order.
    pub fn shape_manifest(&self) -> String {
        let mut out = String::new();
        for (n, v) in self.names.iter().zip(&self.values) {
            let dims: Vec<String> = v.shape().iter().map(usize::to_string).collect();
            writeln!(out, "{n} {}", dims.join("x")).unwrap();
        }
        out
    }

    /// Record every parameter as a leaf (or as a constant when gradients are
    /// not needed).
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.values
            .iter()
            .map(|v| {
                if trainable {
                    tape.leaf(v.clone())
                } else {
                    tape.constant(v.clone())
                }
            })
            .collect()
    }
}
