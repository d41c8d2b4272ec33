//! Edge-conditioned graph convolution network for node classification.
//!
//! Each block computes, for every node `i`,
//! `W_root h_i + mean_{j in N(i)} Phi(e_ij) h_j + b`, followed by batch
//! normalization and a ReLU (the last block keeps its logits). `Phi` is a
//! three-layer filter-generating network mapping an edge feature vector to a
//! `d_out x d_in` mixing matrix.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::error::{NnError, Result};
use crate::ops::{self, BatchNormStats, ClassLayout, EdgeRef};
use crate::params::{he_normal, scaled_normal, ParamStore, ParamVars};
use crate::tape::{Tape, Tensor};
use crate::train::{LossOptions, Model, Tally};

/// Running-average momentum for batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EccConfig {
    pub block_depths: Vec<usize>,
    pub fgn_hidden: (usize, usize),
    pub node_feature_len: usize,
    pub edge_feature_len: usize,
    #[serde(default = "default_true")]
    pub batch_norm: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EccConfig {
    fn default() -> Self {
        Self {
            block_depths: vec![64, 128, 128, 64, 2],
            fgn_hidden: (16, 32),
            node_feature_len: 14,
            edge_feature_len: 2,
            batch_norm: true,
        }
    }
}

impl EccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_depths.is_empty()
            || self.block_depths.contains(&0)
            || self.fgn_hidden.0 == 0
            || self.fgn_hidden.1 == 0
            || self.node_feature_len == 0
            || self.edge_feature_len == 0
        {
            return Err(NnError::Config(format!(
                "edge-conditioned network: {self:?}"
            )));
        }
        Ok(())
    }

    fn dims(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let ins = std::iter::once(self.node_feature_len).chain(self.block_depths.iter().copied());
        self.block_depths
            .iter()
            .zip(ins)
            .enumerate()
            .map(|(l, (&dout, din))| (l, din, dout))
    }
}

/// Graph input: node features, distinct edge feature vectors and the edge
/// list referencing them.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    /// `N x F` node features.
    pub node_feats: Array,
    /// `U x E` distinct edge feature vectors.
    pub edge_feats: Array,
    /// Directed message edges; `filter` indexes a row of `edge_feats`.
    pub edges: Rc<Vec<EdgeRef>>,
}

impl GraphInput {
    pub fn num_nodes(&self) -> usize {
        self.node_feats.shape().first().copied().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running averages are reported as buffer updates.
    Train,
    /// Running statistics.
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EccNet {
    config: EccConfig,
    params: ParamStore,
}

impl EccNet {
    pub fn new(config: EccConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (h1, h2) = config.fgn_hidden;
        let e = config.edge_feature_len;
        for (l, din, dout) in config.dims() {
            params.insert(
                format!("b{l}.root.w"),
                he_normal(&[dout, din], din, &mut rng),
            );
            params.insert(format!("b{l}.bias"), Array::zeros(&[dout]));
            params.insert(format!("b{l}.fgn0.w"), he_normal(&[h1, e], e, &mut rng));
            params.insert(format!("b{l}.fgn0.b"), Array::zeros(&[h1]));
            params.insert(format!("b{l}.fgn1.w"), he_normal(&[h2, h1], h1, &mut rng));
            params.insert(format!("b{l}.fgn1.b"), Array::zeros(&[h2]));
            let std = (2.0 / (din * h2) as f64).sqrt();
            params.insert(
                format!("b{l}.fgn2.w"),
                scaled_normal(&[dout * din, h2], std, &mut rng),
            );
            params.insert(format!("b{l}.fgn2.b"), Array::zeros(&[dout * din]));
            if config.batch_norm {
                params.insert(format!("b{l}.bn.gamma"), Array::filled(&[dout], 1.0));
                params.insert(format!("b{l}.bn.beta"), Array::zeros(&[dout]));
                params.insert_buffer(format!("b{l}.bn.mean"), Array::zeros(&[dout]));
                params.insert_buffer(format!("b{l}.bn.var"), Array::filled(&[dout], 1.0));
            }
        }
        Ok(Self { config, params })
    }

    pub fn from_params(config: EccConfig, params: ParamStore) -> Result<Self> {
        let template = Self::new(config.clone(), 0)?;
        for (name, value) in template.params.params() {
            if params.get(name)?.shape() != value.shape() {
                return Err(NnError::Shape(format!("parameter `{name}`")));
            }
        }
        for (name, _) in template.params.buffers() {
            params.buffer(name)?;
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &EccConfig {
        &self.config
    }

    /// Node logits `N x d_last`.
    pub fn forward(
        &self,
        vars: &ParamVars,
        graph: &GraphInput,
        mode: Mode,
        updates: &mut Vec<(String, Array)>,
    ) -> Result<Tensor> {
        let tape = vars.tape();
        let fs = graph.node_feats.shape();
        if fs.len() != 2 || fs[1] != self.config.node_feature_len {
            return Err(NnError::Shape(format!(
                "node features {fs:?}, expected N x {}",
                self.config.node_feature_len
            )));
        }
        let es = graph.edge_feats.shape();
        if es.len() != 2 || es[1] != self.config.edge_feature_len {
            return Err(NnError::Shape(format!(
                "edge features {es:?}, expected U x {}",
                self.config.edge_feature_len
            )));
        }
        let n = fs[0];
        for e in graph.edges.iter() {
            for node in [e.target, e.source] {
                if node >= n {
                    return Err(NnError::DanglingEdge { node, nodes: n });
                }
            }
        }
        let mut h = tape.constant(graph.node_feats.clone());
        let edge_in = tape.constant(graph.edge_feats.clone());
        let last = self.config.block_depths.len() - 1;
        for (l, din, dout) in self.config.dims() {
            let p = |s: &str| vars.get(&format!("b{l}.{s}"));
            let f = ops::relu(&ops::linear(&edge_in, p("fgn0.w")?, p("fgn0.b")?)?);
            let f = ops::relu(&ops::linear(&f, p("fgn1.w")?, p("fgn1.b")?)?);
            let f = ops::linear(&f, p("fgn2.w")?, p("fgn2.b")?)?;
            let filters = ops::reshape(&f, &[es[0], dout, din])?;
            let messages = ops::ecc_aggregate(&h, &filters, &graph.edges)?;
            let root = ops::linear(&h, p("root.w")?, p("bias")?)?;
            let mut z = ops::add(&root, &messages)?;
            if self.config.batch_norm {
                let mean_key = format!("b{l}.bn.mean");
                let var_key = format!("b{l}.bn.var");
                match mode {
                    Mode::Train => {
                        let (out, batch) =
                            ops::batch_norm(&z, p("bn.gamma")?, p("bn.beta")?, None)?;
                        let blend = |old: &Array, new: &[f64]| {
                            let data = old
                                .data()
                                .iter()
                                .zip(new)
                                .map(|(o, b)| BN_MOMENTUM * o + (1.0 - BN_MOMENTUM) * b)
                                .collect();
                            Array::from_vec(old.shape(), data).expect("same shape")
                        };
                        updates.push((
                            mean_key.clone(),
                            blend(self.params.buffer(&mean_key)?, &batch.mean),
                        ));
                        updates.push((
                            var_key.clone(),
                            blend(self.params.buffer(&var_key)?, &batch.var),
                        ));
                        z = out;
                    }
                    Mode::Eval => {
                        let stats = BatchNormStats {
                            mean: self.params.buffer(&mean_key)?.data().to_vec(),
                            var: self.params.buffer(&var_key)?.data().to_vec(),
                        };
                        z = ops::batch_norm(&z, p("bn.gamma")?, p("bn.beta")?, Some(&stats))?.0;
                    }
                }
            }
            h = if l == last { z } else { ops::relu(&z) };
        }
        Ok(h)
    }

    /// Inference logits with running batch-norm statistics.
    pub fn predict(&self, graph: &GraphInput) -> Result<Array> {
        let tape = Tape::with_finite_checks(false);
        let vars = self.params.bind_frozen(&tape);
        let out = self.forward(&vars, graph, Mode::Eval, &mut Vec::new())?;
        Ok((*out.value()).clone())
    }

    pub fn predict_classes(&self, graph: &GraphInput) -> Result<Vec<usize>> {
        let logits = self.predict(graph)?;
        Ok(argmax_rows(&logits))
    }
}

/// Argmax per row of an `N x K` array; ties pick the lower class.
pub fn argmax_rows(logits: &Array) -> Vec<usize> {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// A node-classification training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    pub graph: GraphInput,
    pub targets: Vec<usize>,
}

impl Model for EccNet {
    type Sample = GraphSample;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn num_classes(&self) -> usize {
        *self
            .config
            .block_depths
            .last()
            .expect("validated non-empty")
    }

    fn sample_loss(
        &self,
        vars: &ParamVars,
        sample: &GraphSample,
        loss: &LossOptions,
        updates: &mut Vec<(String, Array)>,
    ) -> Result<(Tensor, Tally)> {
        let logits = self.forward(vars, &sample.graph, Mode::Train, updates)?;
        let weights: Vec<f64> = sample
            .targets
            .iter()
            .map(|&t| loss.class_weight(t))
            .collect();
        let ce = ops::cross_entropy(
            &logits,
            &Rc::new(sample.targets.clone()),
            &Rc::new(weights),
            ClassLayout::Rows,
        )?;
        let pred = argmax_rows(&logits.value());
        let ones = vec![1.0; pred.len()];
        Ok((
            ce,
            Tally::from_predictions(&pred, &sample.targets, &ones, self.num_classes()),
        ))
    }

    fn evaluate(&self, sample: &GraphSample) -> Result<Tally> {
        let pred = self.predict_classes(&sample.graph)?;
        let ones = vec![1.0; pred.len()];
        Ok(Tally::from_predictions(
            &pred,
            &sample.targets,
            &ones,
            self.num_classes(),
        ))
    }

    fn class_counts(&self, sample: &GraphSample) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_classes()];
        for &t in &sample.targets {
            counts[t] += 1.0;
        }
        counts
    }
}
