//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::ops;
use crate::params::{ParamStore, ParamVars};
use crate::tape::{Tape, Tensor};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Lower bound on the relative-error denominator, so gradients that are
    /// zero on both routes are not compared at round-off level.
    pub floor: f64,
    /// Check at most this many entries per parameter tensor (evenly spaced).
    pub max_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            max_per_param: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn scalar_output(out: Tensor) -> f64 {
    let v = out.value();
    if v.len() == 1 {
        v.data()[0]
    } else {
        v.sum()
    }
}

/// Compares reverse-mode gradients of `sum(f(params))` against central
/// differences for every (or a spread subset of) parameter entries.
pub fn check_gradients<F>(
    store: &ParamStore,
    f: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamVars) -> Result<Tensor>,
{
    let tape = Tape::with_finite_checks(false);
    let vars = store.bind(&tape);
    let out = f(&vars)?;
    let total = if out.value().len() == 1 {
        out
    } else {
        ops::sum(&out)
    };
    let mut grads = total.backward();
    let analytic = vars.gradients(&mut grads);

    let mut work = store.clone();
    let mut report = GradCheckReport::default();
    let eval = |s: &ParamStore| -> Result<f64> {
        let tape = Tape::with_finite_checks(false);
        let vars = s.bind_frozen(&tape);
        Ok(scalar_output(f(&vars)?))
    };
    let names: Vec<String> = store.params().map(|(k, _)| k.clone()).collect();
    for name in names {
        let len = store.get(&name)?.len();
        let stride = match opts.max_per_param {
            Some(m) if m > 0 && len > m => len.div_ceil(m),
            _ => 1,
        };
        for idx in (0..len).step_by(stride) {
            let orig = work.get(&name)?.data()[idx];
            work.get_mut(&name)?.data_mut()[idx] = orig + opts.step;
            let plus = eval(&work)?;
            work.get_mut(&name)?.data_mut()[idx] = orig - opts.step;
            let minus = eval(&work)?;
            work.get_mut(&name)?.data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic[&name].data()[idx];
            let err = relative_error(a, numeric, opts.floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((name.clone(), idx, a, numeric));
                }
            }
        }
    }
    Ok(report)
}

/// Pass threshold on the maximum relative error.
pub const TOLERANCE: f64 = 1e-4;

/// Options for the standard suite: outputs are O(10), so central
/// differences carry ~1e-10 absolute noise and the floor sits above it.
pub fn suite_options() -> GradCheckOptions {
    GradCheckOptions {
        floor: 1e-4,
        ..GradCheckOptions::default()
    }
}

/// A named check run on one random parameter draw.
pub struct GradCase {
    pub name: &'static str,
    pub run: fn(u64) -> Result<GradCheckReport>,
}

/// Every differentiable layer plus both full networks at toy shapes.
pub fn standard_cases() -> Vec<GradCase> {
    vec![
        GradCase {
            name: "conv2d 3x3",
            run: cases::conv3,
        },
        GradCase {
            name: "conv2d 1x1",
            run: cases::conv1,
        },
        GradCase {
            name: "transposed conv",
            run: cases::conv_t,
        },
        GradCase {
            name: "max-pool",
            run: cases::pool,
        },
        GradCase {
            name: "relu",
            run: cases::relu,
        },
        GradCase {
            name: "linear",
            run: cases::linear,
        },
        GradCase {
            name: "concat",
            run: cases::concat,
        },
        GradCase {
            name: "batch-norm (batch stats)",
            run: cases::bn_batch,
        },
        GradCase {
            name: "batch-norm (running stats)",
            run: cases::bn_running,
        },
        GradCase {
            name: "ecc aggregation",
            run: cases::ecc_agg,
        },
        GradCase {
            name: "cross-entropy (channels)",
            run: cases::ce_channels,
        },
        GradCase {
            name: "cross-entropy (rows)",
            run: cases::ce_rows,
        },
        GradCase {
            name: "encoder-decoder",
            run: cases::encdec,
        },
        GradCase {
            name: "edge-conditioned network",
            run: cases::ecc_net,
        },
    ]
}

mod cases {
    use std::rc::Rc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::{check_gradients, suite_options, GradCheckReport};
    use crate::array::Array;
    use crate::ecc::{EccConfig, EccNet, GraphInput, Mode};
    use crate::encdec::{EncDec, EncDecConfig};
    use crate::error::Result;
    use crate::ops::{self, BatchNormStats, ClassLayout, EdgeRef};
    use crate::params::{scaled_normal, ParamStore, ParamVars};
    use crate::tape::Tensor;
    use crate::train::Model;

    fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
    }

    fn store(seed: u64, entries: &[(&str, &[usize])]) -> ParamStore {
        let mut r = rng(seed, 1);
        let mut s = ParamStore::new();
        for (name, shape) in entries {
            s.insert(*name, scaled_normal(shape, 1.0, &mut r));
        }
        s
    }

    /// Zero biases put ReLU inputs exactly on the kink, where a central
    /// difference sees half a slope; jitter every parameter off it.
    fn jittered(params: &ParamStore, seed: u64) -> ParamStore {
        let mut r = rng(seed, 2);
        let mut out = params.clone();
        for (_, a) in out.params_mut() {
            a.add_assign(&scaled_normal(a.shape(), 0.1, &mut r));
        }
        out
    }

    /// Random fixed projection so the checked scalar depends on every output.
    fn project(out: Tensor, seed: u64) -> Result<Tensor> {
        let mut r = rng(seed, 3);
        let p = out
            .tape()
            .constant(scaled_normal(&out.shape(), 1.0, &mut r));
        ops::mul(&out, &p)
    }

    fn check<F: Fn(&ParamVars) -> Result<Tensor>>(s: &ParamStore, f: F) -> Result<GradCheckReport> {
        check_gradients(s, f, &suite_options())
    }

    pub fn conv3(seed: u64) -> Result<GradCheckReport> {
        let s = store(
            seed,
            &[("x", &[2, 5, 4]), ("w", &[3, 2, 3, 3]), ("b", &[3])],
        );
        check(&s, |v| {
            project(ops::conv2d(v.get("x")?, v.get("w")?, v.get("b")?)?, seed)
        })
    }

    pub fn conv1(seed: u64) -> Result<GradCheckReport> {
        let s = store(
            seed,
            &[("x", &[2, 5, 4]), ("w", &[3, 2, 1, 1]), ("b", &[3])],
        );
        check(&s, |v| {
            project(ops::conv2d(v.get("x")?, v.get("w")?, v.get("b")?)?, seed)
        })
    }

    pub fn conv_t(seed: u64) -> Result<GradCheckReport> {
        let s = store(
            seed,
            &[("x", &[3, 3, 2]), ("w", &[3, 2, 2, 2]), ("b", &[2])],
        );
        check(&s, |v| {
            project(
                ops::conv_transpose2x2(v.get("x")?, v.get("w")?, v.get("b")?)?,
                seed,
            )
        })
    }

    pub fn pool(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("x", &[2, 4, 6])]);
        check(&s, |v| project(ops::max_pool2(v.get("x")?)?, seed))
    }

    pub fn relu(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("x", &[2, 4, 6])]);
        check(&s, |v| project(ops::relu(v.get("x")?), seed))
    }

    pub fn linear(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("x", &[4, 3]), ("w", &[5, 3]), ("b", &[5])]);
        check(&s, |v| {
            project(ops::linear(v.get("x")?, v.get("w")?, v.get("b")?)?, seed)
        })
    }

    pub fn concat(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("a", &[2, 3, 3]), ("c", &[1, 3, 3])]);
        check(&s, |v| {
            project(ops::concat_channels(v.get("a")?, v.get("c")?)?, seed)
        })
    }

    pub fn bn_batch(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("x", &[6, 3]), ("g", &[3]), ("b", &[3])]);
        check(&s, |v| {
            project(
                ops::batch_norm(v.get("x")?, v.get("g")?, v.get("b")?, None)?.0,
                seed,
            )
        })
    }

    pub fn bn_running(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("x", &[6, 3]), ("g", &[3]), ("b", &[3])]);
        let stats = BatchNormStats {
            mean: vec![0.1, -0.2, 0.3],
            var: vec![0.5, 1.5, 2.0],
        };
        check(&s, |v| {
            project(
                ops::batch_norm(v.get("x")?, v.get("g")?, v.get("b")?, Some(&stats))?.0,
                seed,
            )
        })
    }

    pub fn ecc_agg(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("h", &[5, 3]), ("f", &[2, 4, 3])]);
        let edges = Rc::new(vec![
            EdgeRef {
                target: 0,
                source: 1,
                filter: 0,
            },
            EdgeRef {
                target: 0,
                source: 4,
                filter: 1,
            },
            EdgeRef {
                target: 1,
                source: 0,
                filter: 0,
            },
            EdgeRef {
                target: 2,
                source: 1,
                filter: 1,
            },
            EdgeRef {
                target: 2,
                source: 3,
                filter: 1,
            },
            EdgeRef {
                target: 2,
                source: 0,
                filter: 0,
            },
            EdgeRef {
                target: 4,
                source: 2,
                filter: 0,
            },
        ]);
        check(&s, |v| {
            project(ops::ecc_aggregate(v.get("h")?, v.get("f")?, &edges)?, seed)
        })
    }

    pub fn ce_channels(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("z", &[3, 2, 4])]);
        let targets = Rc::new(vec![0, 1, 2, 2, 1, 0, 0, 1]);
        let weights = Rc::new(vec![1.0, 0.0, 2.0, 1.0, 0.5, 1.0, 0.0, 3.0]);
        check(&s, |v| {
            ops::cross_entropy(v.get("z")?, &targets, &weights, ClassLayout::ChannelsFirst)
        })
    }

    pub fn ce_rows(seed: u64) -> Result<GradCheckReport> {
        let s = store(seed, &[("z", &[5, 2])]);
        let targets = Rc::new(vec![0, 1, 1, 0, 1]);
        let weights = Rc::new(vec![1.0, 4.0, 4.0, 1.0, 4.0]);
        check(&s, |v| {
            ops::cross_entropy(v.get("z")?, &targets, &weights, ClassLayout::Rows)
        })
    }

    pub fn encdec(seed: u64) -> Result<GradCheckReport> {
        let cfg = EncDecConfig {
            levels: 3,
            base_features: 2,
            in_channels: 1,
            out_channels: 2,
        };
        let net = EncDec::new(cfg, seed)?;
        let input = scaled_normal(&[1, 8, 8], 1.0, &mut rng(seed, 4));
        let params = jittered(net.params(), seed);
        check(&params, |v| {
            let x = v.tape().constant(input.clone());
            net.forward(v, &x)
        })
    }

    /// Six-node ring with "opposite" edges and three distinct edge features.
    pub fn tiny_graph(seed: u64, feats: usize) -> GraphInput {
        let n = 6;
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push(EdgeRef {
                target: i,
                source: (i + n - 1) % n,
                filter: i % 2,
            });
            edges.push(EdgeRef {
                target: i,
                source: (i + 1) % n,
                filter: (i + 1) % 2,
            });
            edges.push(EdgeRef {
                target: i,
                source: (i + 3) % n,
                filter: 2,
            });
        }
        GraphInput {
            node_feats: scaled_normal(&[n, feats], 1.0, &mut rng(seed, 5)),
            edge_feats: Array::from_vec(&[3, 2], vec![0.0, 1.0, 1.0, 1.0, 0.0, 3.0]).expect("3x2"),
            edges: Rc::new(edges),
        }
    }

    pub fn ecc_net(seed: u64) -> Result<GradCheckReport> {
        let cfg = EccConfig {
            block_depths: vec![4, 3, 2],
            fgn_hidden: (3, 4),
            node_feature_len: 5,
            edge_feature_len: 2,
            batch_norm: true,
        };
        let net = EccNet::new(cfg, seed)?;
        let graph = tiny_graph(seed, 5);
        let params = jittered(net.params(), seed);
        check(&params, |v| {
            project(net.forward(v, &graph, Mode::Train, &mut Vec::new())?, seed)
        })
    }
}

pub use cases::tiny_graph;
