//! Convolutional encoder-decoder with skip connections (U-Net style).
//!
//! Contracting path, per level: 3x3 conv, ReLU, 2x2 max-pool.
//! Expanding path, per level: 2x2 stride-2 transposed conv, concatenation
//! with the skip from the matching level, 3x3 conv, ReLU. A final 1x1 conv
//! produces per-pixel logits at input resolution.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::augment::Dihedral;
use crate::error::{NnError, Result};
use crate::ops::{self, ClassLayout};
use crate::params::{he_normal, ParamStore, ParamVars};
use crate::tape::{Tape, Tensor};
use crate::train::{LossOptions, Model, Tally};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncDecConfig {
    pub levels: usize,
    /// Feature maps produced by the first convolution; doubled per level.
    pub base_features: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl EncDecConfig {
    pub fn new(in_channels: usize, out_channels: usize) -> Self {
        Self {
            levels: 3,
            base_features: 16,
            in_channels,
            out_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0
            || self.base_features == 0
            || self.in_channels == 0
            || self.out_channels == 0
        {
            return Err(NnError::Config(format!("encoder-decoder: {self:?}")));
        }
        Ok(())
    }

    fn channels(&self, level: usize) -> usize {
        self.base_features << level
    }
}

/// Encoder-decoder network and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EncDec {
    config: EncDecConfig,
    params: ParamStore,
}

impl EncDec {
    pub fn new(config: EncDecConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut c_in = config.in_channels;
        for l in 0..config.levels {
            let c = config.channels(l);
            params.insert(
                format!("enc{l}.w"),
                he_normal(&[c, c_in, 3, 3], c_in * 9, &mut rng),
            );
            params.insert(format!("enc{l}.b"), Array::zeros(&[c]));
            c_in = c;
        }
        for l in (0..config.levels).rev() {
            let c = config.channels(l);
            let up_in = config.channels((l + 1).min(config.levels - 1));
            params.insert(
                format!("up{l}.w"),
                he_normal(&[up_in, c, 2, 2], up_in, &mut rng),
            );
            params.insert(format!("up{l}.b"), Array::zeros(&[c]));
            params.insert(
                format!("dec{l}.w"),
                he_normal(&[c, 2 * c, 3, 3], 2 * c * 9, &mut rng),
            );
            params.insert(format!("dec{l}.b"), Array::zeros(&[c]));
        }
        let c0 = config.channels(0);
        params.insert(
            "head.w",
            he_normal(&[config.out_channels, c0, 1, 1], c0, &mut rng),
        );
        params.insert("head.b", Array::zeros(&[config.out_channels]));
        Ok(Self { config, params })
    }

    pub fn from_params(config: EncDecConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let template = Self::new(config.clone(), 0)?;
        for (name, value) in template.params.params() {
            let got = params.get(name)?;
            if got.shape() != value.shape() {
                return Err(NnError::Shape(format!(
                    "parameter `{name}`: expected {:?}, got {:?}",
                    value.shape(),
                    got.shape()
                )));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &EncDecConfig {
        &self.config
    }

    /// Logits `out_channels x n x n` for a `in_channels x n x n` input.
    pub fn forward(&self, vars: &ParamVars, input: &Tensor) -> Result<Tensor> {
        let shape = input.shape();
        let div = 1usize << self.config.levels;
        if shape.len() != 3
            || shape[0] != self.config.in_channels
            || !shape[1].is_multiple_of(div)
            || !shape[2].is_multiple_of(div)
            || shape[1] == 0
        {
            return Err(NnError::Shape(format!(
                "encoder-decoder input {shape:?}: need {} x H x W with H, W divisible by {div}",
                self.config.in_channels
            )));
        }
        let mut skips = Vec::with_capacity(self.config.levels);
        let mut h = input.clone();
        for l in 0..self.config.levels {
            h = ops::relu(&ops::conv2d(
                &h,
                vars.get(&format!("enc{l}.w"))?,
                vars.get(&format!("enc{l}.b"))?,
            )?);
            skips.push(h.clone());
            h = ops::max_pool2(&h)?;
        }
        for l in (0..self.config.levels).rev() {
            h = ops::conv_transpose2x2(
                &h,
                vars.get(&format!("up{l}.w"))?,
                vars.get(&format!("up{l}.b"))?,
            )?;
            h = ops::concat_channels(&h, &skips[l])?;
            h = ops::relu(&ops::conv2d(
                &h,
                vars.get(&format!("dec{l}.w"))?,
                vars.get(&format!("dec{l}.b"))?,
            )?);
        }
        ops::conv2d(&h, vars.get("head.w")?, vars.get("head.b")?)
    }

    /// Inference-only forward pass returning raw logits.
    pub fn predict(&self, input: &Array) -> Result<Array> {
        let tape = Tape::with_finite_checks(false);
        let vars = self.params.bind_frozen(&tape);
        let x = tape.constant(input.clone());
        Ok((*self.forward(&vars, &x)?.value()).clone())
    }

    /// Per-pixel argmax class of the logits.
    pub fn predict_classes(&self, input: &Array) -> Result<Vec<usize>> {
        let logits = self.predict(input)?;
        Ok(argmax_channels(&logits))
    }
}

/// Argmax over the leading (class) axis of a `K x ...` array; ties pick the
/// lower class.
pub fn argmax_channels(logits: &Array) -> Vec<usize> {
    let k = logits.shape()[0];
    let p = logits.len() / k.max(1);
    let d = logits.data();
    (0..p)
        .map(|i| {
            let mut best = 0;
            for c in 1..k {
                if d[c * p + i] > d[best * p + i] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// A dense segmentation training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SegSample {
    /// `C x n x n` input planes.
    pub input: Array,
    /// Row-major class index per pixel.
    pub target: Vec<usize>,
    /// Per-pixel loss mask (0 excludes the pixel).
    pub mask: Vec<f64>,
    /// Channel pair that exchanges roles when a transform swaps the axes
    /// (e.g. horizontal/vertical segment maps).
    pub axis_channels: Option<(usize, usize)>,
}

impl SegSample {
    pub fn transformed(&self, t: Dihedral) -> Self {
        let s = self.input.shape();
        let (c, n) = (s[0], s[1]);
        let mut data = Vec::with_capacity(self.input.len());
        for ci in 0..c {
            let src_c = match self.axis_channels {
                Some((a, b)) if t.swaps_axes() && ci == a => b,
                Some((a, b)) if t.swaps_axes() && ci == b => a,
                _ => ci,
            };
            data.extend(t.apply(&self.input.data()[src_c * n * n..(src_c + 1) * n * n], n));
        }
        Self {
            input: Array::from_vec(s, data).expect("same shape"),
            target: t.apply(&self.target, n),
            mask: t.apply(&self.mask, n),
            axis_channels: self.axis_channels,
        }
    }
}

impl Model for EncDec {
    type Sample = SegSample;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn num_classes(&self) -> usize {
        self.config.out_channels
    }

    fn sample_loss(
        &self,
        vars: &ParamVars,
        sample: &SegSample,
        loss: &LossOptions,
        _updates: &mut Vec<(String, Array)>,
    ) -> Result<(Tensor, Tally)> {
        let tape = vars.tape();
        let x = tape.constant(sample.input.clone());
        let logits = self.forward(vars, &x)?;
        let weights: Vec<f64> = sample
            .mask
            .iter()
            .zip(&sample.target)
            .map(|(m, &t)| m * loss.class_weight(t))
            .collect();
        let ce = ops::cross_entropy(
            &logits,
            &Rc::new(sample.target.clone()),
            &Rc::new(weights),
            ClassLayout::ChannelsFirst,
        )?;
        let pred = argmax_channels(&logits.value());
        Ok((
            ce,
            Tally::from_predictions(&pred, &sample.target, &sample.mask, self.num_classes()),
        ))
    }

    fn evaluate(&self, sample: &SegSample) -> Result<Tally> {
        let pred = self.predict_classes(&sample.input)?;
        Ok(Tally::from_predictions(
            &pred,
            &sample.target,
            &sample.mask,
            self.num_classes(),
        ))
    }

    fn class_counts(&self, sample: &SegSample) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_classes()];
        for (&t, &m) in sample.target.iter().zip(&sample.mask) {
            if m > 0.0 {
                counts[t] += 1.0;
            }
        }
        counts
    }

    fn augment(&self, sample: &SegSample, t: Dihedral) -> Option<SegSample> {
        Some(sample.transformed(t))
    }
}
