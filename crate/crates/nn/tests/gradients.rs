//! Reverse-mode gradients against central finite differences, per layer and
//! for both full networks, over several random draws each.

use walkplan_nn::gradcheck::{standard_cases, TOLERANCE};

fn run(name: &str) {
    let case = standard_cases()
        .into_iter()
        .find(|c| c.name == name)
        .unwrap();
    for seed in 0..3 {
        let report = (case.run)(seed).unwrap();
        assert!(report.checked > 0);
        assert!(
            report.max_rel_error < TOLERANCE,
            "{name} (draw {seed}): max relative error {:.3e} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }
}

#[test]
fn conv2d_3x3() {
    run("conv2d 3x3");
}

#[test]
fn conv2d_1x1() {
    run("conv2d 1x1");
}

#[test]
fn transposed_conv() {
    run("transposed conv");
}

#[test]
fn max_pool_and_relu() {
    run("max-pool");
    run("relu");
}

#[test]
fn linear_and_concat() {
    run("linear");
    run("concat");
}

#[test]
fn batch_norm_training_and_inference() {
    run("batch-norm (batch stats)");
    run("batch-norm (running stats)");
}

#[test]
fn edge_conditioned_aggregation() {
    run("ecc aggregation");
}

#[test]
fn cross_entropy_both_layouts_with_weights() {
    run("cross-entropy (channels)");
    run("cross-entropy (rows)");
}

#[test]
fn encoder_decoder_summed_logits() {
    run("encoder-decoder");
}

#[test]
fn edge_conditioned_network() {
    run("edge-conditioned network");
}

#[test]
fn suite_covers_every_layer_once() {
    let names: Vec<_> = standard_cases().iter().map(|c| c.name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), names.len());
    assert_eq!(names.len(), 14);
}
