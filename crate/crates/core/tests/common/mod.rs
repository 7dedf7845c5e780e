#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamcnn_core::oracle::run_network;
use streamcnn_core::{lower, LowerOptions, MachineConfig, NetworkDesc, Shape, SimOutput, Simulator, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Raw words in `lo..=hi`.
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape, lo: i16, hi: i16, net: &NetworkDesc) -> Tensor {
    let data = (0..shape.len()).map(|_| rng.random_range(lo..=hi)).collect();
    Tensor::from_raw(shape, net.format, data).unwrap()
}

pub fn randomize_weights(rng: &mut ChaCha8Rng, net: &mut NetworkDesc, lo: i16, hi: i16) {
    let words: Vec<i16> = (0..net.weight_word_count())
        .map(|_| rng.random_range(lo..=hi))
        .collect();
    net.load_weight_words(&words).unwrap();
}

pub fn simulate(net: &NetworkDesc, input: &Tensor, cfg: &MachineConfig, opts: &LowerOptions) -> SimOutput {
    let prog = lower(net, cfg, opts).unwrap();
    Simulator::new(cfg.clone())
        .unwrap()
        .run(&prog.commands, &prog.weight_stream, input)
        .unwrap()
}

/// Panics with the first differing position.
pub fn assert_matches_oracle(net: &NetworkDesc, input: &Tensor, out: &SimOutput) {
    let expected = run_network(net, input).unwrap();
    assert_eq!(out.layers.len(), expected.len(), "layer count");
    for (l, (got, want)) in out.layers.iter().zip(&expected).enumerate() {
        assert_eq!(got.shape(), want.shape(), "layer {l} shape");
        if let Some(i) = got.raw().iter().zip(want.raw()).position(|(a, b)| a != b) {
            let s = want.shape();
            panic!(
                "layer {l} differs at channel {} row {} col {}: sim {} oracle {}",
                i / s.plane(),
                i % s.plane() / s.cols,
                i % s.cols,
                got.raw()[i],
                want.raw()[i]
            );
        }
    }
}
