//! Synthesizes demonstrations, mines triplets and trains the pushing policy.
//!
//! `cargo run --release --example train_policy -- [demos] [episodes] [lr] [model-out]`

use std::time::Instant;

use sandshape::dataset::{compute_stats, extract_all, synthesize_demos, ExtractConfig, SynthConfig};
use sandshape::learner::{save, train, TrainConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let demos: usize = args.next().map_or(40, |s| s.parse().expect("demo count"));
    let episodes: usize = args.next().map_or(25_000, |s| s.parse().expect("episode count"));
    let lr: f64 = args.next().map_or(1e-2, |s| s.parse().expect("learning rate"));
    let out = args.next();

    let t0 = Instant::now();
    let demos = synthesize_demos(&SynthConfig::default(), 42, demos);
    let triplets = extract_all(&demos, &ExtractConfig::default());
    let stats = compute_stats(&triplets).expect("at least one triplet");
    println!(
        "{} triplets from {} demos in {:.1?}; mu_d {:.1} sigma_d {:.1} mu_dv {:.1} sigma_dv {:.1}",
        triplets.len(),
        demos.len(),
        t0.elapsed(),
        stats.mu_d,
        stats.sigma_d,
        stats.mu_dv,
        stats.sigma_dv
    );

    let t1 = Instant::now();
    let cfg = TrainConfig { episodes, seed: 1, learning_rate: lr, ..TrainConfig::default() };
    let (model, report) = train(&triplets, &cfg).expect("training");
    let t = report.test;
    println!(
        "trained {} episodes in {:.1?}: loss {:.5} -> {:.5}",
        episodes,
        t1.elapsed(),
        report.first_loss(),
        report.final_loss()
    );
    println!(
        "test MAE px ({} samples): u_S {:.2} v_S {:.2} u_E {:.2} v_E {:.2}",
        t.samples, t.mae_u_s, t.mae_v_s, t.mae_u_e, t.mae_v_e
    );
    if let Some(path) = out {
        save(&model, &path).expect("writing the model");
        println!("model written to {path}");
    }
}
