use std::rc::Rc;

use crate::array::Array;
use crate::error::{NnError, Result};
use crate::tape::Tensor;

/// Where the class axis lives in a logits array.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassLayout {
    /// `K x ...`: one plane per class (image logits).
    ChannelsFirst,
    /// `P x K`: one row per item (node logits).
    Rows,
}

fn dims(shape: &[usize], layout: ClassLayout) -> Result<(usize, usize)> {
    match layout {
        ClassLayout::ChannelsFirst if !shape.is_empty() => {
            Ok((shape[0], shape[1..].iter().product()))
        }
        ClassLayout::Rows if shape.len() == 2 => Ok((shape[1], shape[0])),
        _ => Err(NnError::Shape(format!("logits {shape:?} for {layout:?}"))),
    }
}

#[inline]
fn at(layout: ClassLayout, classes: usize, items: usize, k: usize, p: usize) -> usize {
    match layout {
        ClassLayout::ChannelsFirst => k * items + p,
        ClassLayout::Rows => p * classes + k,
    }
}

/// Per-item softmax probabilities, same layout as the logits.
pub fn softmax(logits: &Array, layout: ClassLayout) -> Result<Array> {
    let (k, p) = dims(logits.shape(), layout)?;
    let z = logits.data();
    let mut out = vec![0.0; z.len()];
    for item in 0..p {
        let max = (0..k)
            .map(|c| z[at(layout, k, p, c, item)])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in 0..k {
            let e = (z[at(layout, k, p, c, item)] - max).exp();
            out[at(layout, k, p, c, item)] = e;
            total += e;
        }
        for c in 0..k {
            out[at(layout, k, p, c, item)] /= total;
        }
    }
    Array::from_vec(logits.shape(), out)
}

/// Weighted mean softmax cross-entropy: `sum_p w_p * nll_p / sum_p w_p`.
///
/// `weights` combines the loss mask and any class weighting; items with zero
/// weight do not contribute. An all-zero weight vector yields a zero loss.
pub fn cross_entropy(
    logits: &Tensor,
    targets: &Rc<Vec<usize>>,
    weights: &Rc<Vec<f64>>,
    layout: ClassLayout,
) -> Result<Tensor> {
    let zv = logits.value();
    let (k, p) = dims(zv.shape(), layout)?;
    if targets.len() != p || weights.len() != p {
        return Err(NnError::Shape(format!(
            "cross_entropy: {p} items, {} targets, {} weights",
            targets.len(),
            weights.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(NnError::Shape(format!("target class {bad} >= {k}")));
    }
    let probs = softmax(&zv, layout)?;
    let total_w: f64 = weights.iter().sum();
    let mut loss = 0.0;
    if total_w > 0.0 {
        for item in 0..p {
            let w = weights[item];
            if w != 0.0 {
                let z = zv.data();
                let max = (0..k)
                    .map(|c| z[at(layout, k, p, c, item)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let lse = max
                    + (0..k)
                        .map(|c| (z[at(layout, k, p, c, item)] - max).exp())
                        .sum::<f64>()
                        .ln();
                loss += w * (lse - z[at(layout, k, p, targets[item], item)]);
            }
        }
        loss /= total_w;
    }
    let targets = Rc::clone(targets);
    let weights = Rc::clone(weights);
    let shape = zv.shape().to_vec();
    Ok(logits.tape().record(
        "cross_entropy",
        Array::scalar(loss),
        &[logits],
        move |g, _| {
            let mut dz = Array::zeros(&shape);
            if total_w > 0.0 {
                let scale = g.data()[0] / total_w;
                let pd = probs.data();
                let dd = dz.data_mut();
                for item in 0..p {
                    let w = weights[item];
                    if w == 0.0 {
                        continue;
                    }
                    for c in 0..k {
                        let idx = at(layout, k, p, c, item);
                        let onehot = if c == targets[item] { 1.0 } else { 0.0 };
                        dd[idx] = scale * w * (pd[idx] - onehot);
                    }
                }
            }
            vec![Some(dz)]
        },
    ))
}
