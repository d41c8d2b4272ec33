//! Differentiable operations on [`Tensor`]s.

mod conv;
mod graph;
mod linear;
mod loss;
mod norm;
mod pool;

pub use conv::{conv2d, conv_transpose2x2};
pub use graph::{ecc_aggregate, EdgeRef};
pub use linear::linear;
pub use loss::{cross_entropy, softmax, ClassLayout};
pub use norm::{batch_norm, BatchNormStats};
pub use pool::max_pool2;

use crate::array::Array;
use crate::error::{NnError, Result};
use crate::tape::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    let xv = x.value();
    let out = Array::from_vec(xv.shape(), xv.data().iter().map(|v| v.max(0.0)).collect())
        .expect("same shape");
    x.tape().record("relu", out, &[x], move |g, _| {
        let data = g
            .data()
            .iter()
            .zip(xv.data())
            .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
            .collect();
        vec![Some(Array::from_vec(g.shape(), data).expect("same shape"))]
    })
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (av, bv) = (a.value(), b.value());
    if av.shape() != bv.shape() {
        return Err(NnError::Shape(format!(
            "add: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        )));
    }
    let mut out = (*av).clone();
    out.add_assign(&bv);
    Ok(a.tape().record("add", out, &[a, b], |g, _| {
        vec![Some(g.clone()), Some(g.clone())]
    }))
}

/// Elementwise product of equally shaped tensors.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (av, bv) = (a.value(), b.value());
    if av.shape() != bv.shape() {
        return Err(NnError::Shape(format!(
            "mul: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        )));
    }
    let data = av
        .data()
        .iter()
        .zip(bv.data())
        .map(|(x, y)| x * y)
        .collect();
    let out = Array::from_vec(av.shape(), data)?;
    Ok(a.tape().record("mul", out, &[a, b], move |g, needs| {
        let prod = |other: &Array| {
            let d = g
                .data()
                .iter()
                .zip(other.data())
                .map(|(g, o)| g * o)
                .collect();
            Array::from_vec(g.shape(), d).expect("same shape")
        };
        vec![needs[0].then(|| prod(&bv)), needs[1].then(|| prod(&av))]
    }))
}

pub fn scale(x: &Tensor, factor: f64) -> Tensor {
    let mut out = (*x.value()).clone();
    out.scale(factor);
    x.tape().record("scale", out, &[x], move |g, _| {
        let mut g = g.clone();
        g.scale(factor);
        vec![Some(g)]
    })
}

/// Sum of all elements as a scalar.
pub fn sum(x: &Tensor) -> Tensor {
    let xv = x.value();
    let shape = xv.shape().to_vec();
    x.tape()
        .record("sum", Array::scalar(xv.sum()), &[x], move |g, _| {
            vec![Some(Array::filled(&shape, g.data()[0]))]
        })
}

pub fn reshape(x: &Tensor, shape: &[usize]) -> Result<Tensor> {
    let xv = x.value();
    let old = xv.shape().to_vec();
    let out = (*xv).clone().reshaped(shape)?;
    Ok(x.tape().record("reshape", out, &[x], move |g, _| {
        vec![Some(g.clone().reshaped(&old).expect("same size"))]
    }))
}

/// Concatenates `C1 x H x W` and `C2 x H x W` along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (av, bv) = (a.value(), b.value());
    let (sa, sb) = (av.shape(), bv.shape());
    if sa.len() != 3 || sb.len() != 3 || sa[1..] != sb[1..] {
        return Err(NnError::Shape(format!("concat: {sa:?} vs {sb:?}")));
    }
    let split = av.len();
    let mut data = Vec::with_capacity(av.len() + bv.len());
    data.extend_from_slice(av.data());
    data.extend_from_slice(bv.data());
    let out = Array::from_vec(&[sa[0] + sb[0], sa[1], sa[2]], data)?;
    let (shape_a, shape_b) = (sa.to_vec(), sb.to_vec());
    Ok(a.tape().record("concat", out, &[a, b], move |g, _| {
        let (ga, gb) = g.data().split_at(split);
        vec![
            Some(Array::from_vec(&shape_a, ga.to_vec()).expect("split")),
            Some(Array::from_vec(&shape_b, gb.to_vec()).expect("split")),
        ]
    }))
}
