//! Finite-difference check of the full sequence loss against backprop.
//!
//! cargo run --release --example gradient_check

use qgen::corpus::Genre;
use qgen::model::{ModelConfig, ModelParams};
use qgen::numerics::{grad_check, Parameterized};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let config = ModelConfig {
        embed_dim: 6,
        enc_hidden: 4,
        dec_hidden: 8,
        attn_dim: 5,
        ..ModelConfig::new(20)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let mut params = ModelParams::new(config.clone(), trial).unwrap();
        let n = params.flatten().len();
        params.assign_flat(&(0..n).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<_>>());
        let input: Vec<usize> = (0..5).map(|_| rng.gen_range(5..20)).collect();
        let target: Vec<usize> = (0..12).map(|_| rng.gen_range(0..20)).collect();
        let genre = Genre::ALL[trial as usize % 2];

        let mut grads = params.zeros_like();
        let loss = params.loss_and_grad(&input, &target, genre, &mut grads).unwrap();
        let mut flat = params.flatten();
        let probe = params.clone();
        let report = grad_check(
            |v| {
                let mut p = probe.clone();
                p.assign_flat(v);
                p.forward_teacher(&input, &target, genre).unwrap().loss
            },
            &mut flat,
            &grads.flatten(),
        );
        println!(
            "trial {trial}: {n} parameters, loss {loss:.4}, max relative error {:.2e}",
            report.max_rel_error
        );
    }
}
