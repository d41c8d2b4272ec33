//! Minimal reverse-mode autodiff over dense `f64` arrays, plus the two
//! network families used by the floor-plan cascade: a convolutional
//! encoder-decoder with skip connections and an edge-conditioned graph
//! convolution network.

pub mod array;
pub mod augment;
pub mod checkpoint;
pub mod ecc;
pub mod encdec;
pub mod error;
mod gemm;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tape;
pub mod train;

pub use array::Array;
pub use augment::Dihedral;
pub use checkpoint::Checkpoint;
pub use ecc::{EccConfig, EccNet, GraphInput, GraphSample, Mode};
pub use encdec::{EncDec, EncDecConfig, SegSample};
pub use error::{NnError, Result};
pub use ops::EdgeRef;
pub use optim::Adam;
pub use params::{ParamStore, ParamVars};
pub use tape::{Gradients, Tape, Tensor};
pub use train::{
    curriculum_train, evaluate_all, train, ClassWeighting, LossOptions, Model, Selection, Tally,
    TrainConfig, TrainReport,
};
