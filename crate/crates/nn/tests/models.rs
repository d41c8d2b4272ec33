use std::rc::Rc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use walkplan_nn::ops::{softmax, ClassLayout};
use walkplan_nn::params::scaled_normal;
use walkplan_nn::{
    curriculum_train, train, Array, Checkpoint, Dihedral, EccConfig, EccNet, EdgeRef, EncDec,
    EncDecConfig, GraphInput, GraphSample, Model, NnError, ParamStore, SegSample, TrainConfig,
};

fn tiny_encdec(in_c: usize, out_c: usize, base: usize, seed: u64) -> EncDec {
    EncDec::new(
        EncDecConfig {
            levels: 3,
            base_features: base,
            in_channels: in_c,
            out_channels: out_c,
        },
        seed,
    )
    .unwrap()
}

fn zeroed(store: &ParamStore) -> ParamStore {
    let mut s = store.clone();
    for (_, a) in s.params_mut() {
        a.data_mut().fill(0.0);
    }
    s
}

#[test]
fn encdec_output_matches_input_resolution() {
    for n in [8usize, 16, 24] {
        let net = tiny_encdec(2, 3, 2, 1);
        let x = Array::filled(&[2, n, n], 0.3);
        assert_eq!(net.predict(&x).unwrap().shape(), &[3, n, n]);
    }
}

#[test]
fn encdec_rejects_indivisible_or_wrong_channel_input() {
    let net = tiny_encdec(2, 3, 2, 1);
    assert!(matches!(
        net.predict(&Array::zeros(&[2, 12, 12])),
        Err(NnError::Shape(_))
    ));
    assert!(matches!(
        net.predict(&Array::zeros(&[1, 8, 8])),
        Err(NnError::Shape(_))
    ));
}

#[test]
fn encdec_zero_weights_give_zero_logits() {
    let net = tiny_encdec(1, 2, 4, 5);
    let net = EncDec::from_params(net.config().clone(), zeroed(net.params())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = net
        .predict(&scaled_normal(&[1, 16, 16], 1.0, &mut rng))
        .unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

fn ring_edges(n: usize) -> Vec<EdgeRef> {
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push(EdgeRef {
            target: i,
            source: (i + n - 1) % n,
            filter: 0,
        });
        edges.push(EdgeRef {
            target: i,
            source: (i + 1) % n,
            filter: 0,
        });
        edges.push(EdgeRef {
            target: i,
            source: (i + n / 2) % n,
            filter: 1,
        });
    }
    edges
}

fn single_block(batch_norm: bool) -> EccConfig {
    EccConfig {
        block_depths: vec![2],
        fgn_hidden: (3, 3),
        node_feature_len: 2,
        edge_feature_len: 2,
        batch_norm,
    }
}

#[test]
fn ecc_identity_filters_average_neighbours() {
    let cfg = single_block(false);
    let net = EccNet::new(cfg.clone(), 0).unwrap();
    let mut p = zeroed(net.params());
    *p.get_mut("b0.fgn2.b").unwrap() = Array::from_vec(&[4], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let net = EccNet::from_params(cfg, p).unwrap();
    let n = 6;
    let feats: Vec<f64> = (0..n)
        .flat_map(|i| [i as f64, (i * i) as f64 - 3.0])
        .collect();
    let graph = GraphInput {
        node_feats: Array::from_vec(&[n, 2], feats.clone()).unwrap(),
        edge_feats: Array::from_vec(&[2, 2], vec![0.0, 1.0, 1.0, 2.0]).unwrap(),
        edges: Rc::new(ring_edges(n)),
    };
    let out = net.predict(&graph).unwrap();
    for i in 0..n {
        let nb = [(i + n - 1) % n, (i + 1) % n, (i + n / 2) % n];
        for d in 0..2 {
            let mean = nb.iter().map(|&j| feats[j * 2 + d]).sum::<f64>() / 3.0;
            assert!((out.data()[i * 2 + d] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn ecc_zero_features_and_root_give_identical_rows() {
    let cfg = EccConfig {
        block_depths: vec![4, 3, 2],
        fgn_hidden: (3, 3),
        node_feature_len: 5,
        edge_feature_len: 2,
        batch_norm: true,
    };
    let net = EccNet::new(cfg.clone(), 9).unwrap();
    let mut p = net.params().clone();
    for l in 0..3 {
        p.get_mut(&format!("b{l}.root.w"))
            .unwrap()
            .data_mut()
            .fill(0.0);
        let bias = p.get_mut(&format!("b{l}.bias")).unwrap();
        for (i, v) in bias.data_mut().iter_mut().enumerate() {
            *v = 0.1 * (i as f64 + 1.0);
        }
    }
    let net = EccNet::from_params(cfg, p).unwrap();
    let graph = GraphInput {
        node_feats: Array::zeros(&[6, 5]),
        edge_feats: Array::from_vec(&[2, 2], vec![0.0, 1.0, 1.0, 2.0]).unwrap(),
        edges: Rc::new(ring_edges(6)),
    };
    let out = net.predict(&graph).unwrap();
    let first = &out.data()[..2];
    for row in out.data().chunks(2) {
        assert_eq!(row, first);
    }
}

#[test]
fn ecc_missing_node_is_reported() {
    let net = EccNet::new(single_block(true), 0).unwrap();
    let graph = GraphInput {
        node_feats: Array::zeros(&[3, 2]),
        edge_feats: Array::zeros(&[1, 2]),
        edges: Rc::new(vec![EdgeRef {
            target: 0,
            source: 7,
            filter: 0,
        }]),
    };
    assert!(matches!(
        net.predict(&graph),
        Err(NnError::DanglingEdge { node: 7, nodes: 3 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ecc_invariant_to_neighbour_order(seed in 0u64..1000, perm_seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        let cfg = EccConfig {
            block_depths: vec![4, 2],
            fgn_hidden: (3, 3),
            node_feature_len: 3,
            edge_feature_len: 2,
            batch_norm: true,
        };
        let net = EccNet::new(cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let edges = ring_edges(8);
        let mut shuffled = edges.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let feats = scaled_normal(&[8, 3], 1.0, &mut rng);
        let ef = Array::from_vec(&[2, 2], vec![0.0, 1.0, 1.0, 4.0]).unwrap();
        let a = net.predict(&GraphInput { node_feats: feats.clone(), edge_feats: ef.clone(), edges: Rc::new(edges) }).unwrap();
        let b = net.predict(&GraphInput { node_feats: feats, edge_feats: ef, edges: Rc::new(shuffled) }).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-50.0f64..50.0, 3 * 4 * 4)) {
        let a = Array::from_vec(&[3, 4, 4], logits.clone()).unwrap();
        let p = softmax(&a, ClassLayout::ChannelsFirst).unwrap();
        for i in 0..16 {
            let s: f64 = (0..3).map(|c| p.data()[c * 16 + i]).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        let rows = Array::from_vec(&[16, 3], logits).unwrap();
        let p = softmax(&rows, ClassLayout::Rows).unwrap();
        for row in p.data().chunks(3) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_turn_twice_is_identity(flip in any::<bool>(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 8;
        let sample = SegSample {
            input: scaled_normal(&[4, n, n], 1.0, &mut rng),
            target: (0..n * n).map(|i| (i * 7 + seed as usize) % 3).collect(),
            mask: (0..n * n).map(|i| (i % 2) as f64).collect(),
            axis_channels: Some((2, 3)),
        };
        let mirror = Dihedral { flip, quarter_turns: 0 };
        prop_assert_eq!(&sample.transformed(mirror).transformed(mirror), &sample);
        let rot = Dihedral::rotation(2);
        prop_assert_eq!(sample.transformed(rot).transformed(rot), sample);
    }
}

#[test]
fn quarter_turn_swaps_axis_channels() {
    let n = 4;
    let mut input = Array::zeros(&[2, n, n]);
    input.data_mut()[0] = 1.0; // channel 0 at (0, 0)
    let s = SegSample {
        input,
        target: vec![0; n * n],
        mask: vec![1.0; n * n],
        axis_channels: Some((0, 1)),
    };
    let t = s.transformed(Dihedral::rotation(1));
    // (0, 0) -> (0, n - 1), now in channel 1
    assert_eq!(t.input.data()[n * n + n - 1], 1.0);
    assert_eq!(t.input.data().iter().sum::<f64>(), 1.0);
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let enc = tiny_encdec(4, 2, 3, 17);
    let path = dir.path().join("enc.json");
    enc.to_checkpoint().unwrap().save(&path).unwrap();
    let loaded = EncDec::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(loaded, enc);
    for ((_, a), (_, b)) in loaded.params().params().zip(enc.params().params()) {
        let bits = |x: &Array| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(loaded.to_checkpoint().unwrap().to_json().unwrap(), text);

    let ecc = EccNet::new(EccConfig::default(), 3).unwrap();
    let json = ecc.to_checkpoint().unwrap().to_json().unwrap();
    let back = EccNet::from_checkpoint(&Checkpoint::from_json(&json).unwrap()).unwrap();
    assert_eq!(back.to_checkpoint().unwrap().to_json().unwrap(), json);
    assert!(EncDec::from_checkpoint(&Checkpoint::from_json(&json).unwrap()).is_err());
}

#[test]
fn checkpoint_rejects_unknown_version() {
    let enc = tiny_encdec(1, 2, 2, 0);
    let mut ckpt = enc.to_checkpoint().unwrap();
    ckpt.version = 99;
    let err = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap_err();
    assert!(matches!(err, NnError::Checkpoint(_)));
}

fn square_sample(n: usize, seed: u64) -> SegSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = scaled_normal(&[1, n, n], 0.3, &mut rng);
    let mut target = vec![0; n * n];
    let mut input = noise.into_data();
    for r in 2..n - 2 {
        for c in 1..n - 3 {
            target[r * n + c] = 1;
            input[r * n + c] += 1.0;
        }
    }
    SegSample {
        input: Array::from_vec(&[1, n, n], input).unwrap(),
        target,
        mask: vec![1.0; n * n],
        axis_channels: None,
    }
}

#[test]
fn single_sample_overfits_to_full_accuracy() {
    let sample = square_sample(8, 3);
    let mut net = tiny_encdec(1, 2, 4, 11);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 1,
        seed: 2,
        ..TrainConfig::default()
    };
    assert_eq!((cfg.beta1, cfg.beta2), (0.5, 0.999));
    let report = train(&mut net, std::slice::from_ref(&sample), &[], &cfg).unwrap();
    assert_eq!(report.best_score, 1.0);
    let tally = walkplan_nn::evaluate_all(&net, std::slice::from_ref(&sample)).unwrap();
    assert_eq!(tally.accuracy(), 1.0);
}

#[test]
fn training_is_deterministic_and_keeps_best_snapshot() {
    let data: Vec<_> = (0..4).map(|s| square_sample(8, s)).collect();
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 2,
        seed: 5,
        augment: true,
        ..TrainConfig::default()
    };
    let mut a = tiny_encdec(1, 2, 2, 1);
    let mut b = tiny_encdec(1, 2, 2, 1);
    let ra = train(&mut a, &data[..3], &data[3..], &cfg).unwrap();
    let rb = train(&mut b, &data[..3], &data[3..], &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let best = ra
        .validation_scores
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(ra.best_score, best);
    let final_score = walkplan_nn::evaluate_all(&a, &data[3..])
        .unwrap()
        .accuracy();
    assert_eq!(final_score, best);
}

#[test]
fn skipping_the_easy_phase_equals_plain_training() {
    let data: Vec<_> = (0..3).map(|s| square_sample(8, s)).collect();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut a = tiny_encdec(1, 2, 2, 4);
    let mut b = a.clone();
    let (first, second) = curriculum_train(&mut a, &[], &data, &[], &cfg, &cfg).unwrap();
    let plain = train(&mut b, &data, &[], &cfg).unwrap();
    assert!(first.is_none());
    assert_eq!(second, plain);
    assert_eq!(a, b);
}

#[test]
fn empty_dataset_is_an_error() {
    let mut net = tiny_encdec(1, 2, 2, 0);
    assert!(matches!(
        train(&mut net, &[], &[], &TrainConfig::default()),
        Err(NnError::EmptyDataset)
    ));
}

#[test]
fn exploding_learning_rate_reports_divergence_epoch() {
    let graph = GraphInput {
        node_feats: Array::from_vec(
            &[4, 2],
            vec![1e150, -1e150, 3e150, 2e150, -1e150, 1e150, 0.0, 1e150],
        )
        .unwrap(),
        edge_feats: Array::from_vec(&[2, 2], vec![0.0, 1.0, 1.0, 2.0]).unwrap(),
        edges: Rc::new(ring_edges(4)),
    };
    let sample = GraphSample {
        graph,
        targets: vec![0, 1, 0, 1],
    };
    let mut net = EccNet::new(single_block(false), 0).unwrap();
    let cfg = TrainConfig {
        lr: 1e200,
        epochs: 5,
        batch_size: 1,
        ..TrainConfig::default()
    };
    assert!(matches!(
        train(&mut net, &[sample], &[], &cfg),
        Err(NnError::Diverged { .. })
    ));
}
