//! Synthetic demonstrations on disk, motion splitting and triplet mining.
//!
//! `cargo run --release --example dataset_extract -- [out-dir]`

use sandshape::dataset::{
    compute_stats, extract_demo, load_demos, save_demos, smooth_positions, split_motions, synthesize_demos,
    write_triplets, ExtractConfig, SynthConfig,
};

fn main() {
    let root = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("sandshape-demos"), Into::into);
    let demos = synthesize_demos(&SynthConfig::default(), 5, 4);
    save_demos(&root, &demos).unwrap();
    let demos = load_demos(&root).unwrap();
    println!("{} demonstrations under {}", demos.len(), root.display());

    let cfg = ExtractConfig::default();
    let mut all = Vec::new();
    for d in &demos {
        let track: Vec<_> = d.frames.iter().filter_map(|f| f.tool_pos).collect();
        let motions = split_motions(&smooth_positions(&track));
        let triplets = extract_demo(d, &cfg);
        let sizes: Vec<usize> = motions.iter().map(|m| m.indices.len()).collect();
        println!("demo {}: {} frames, motions {sizes:?}, {} triplets", d.id, d.frames.len(), triplets.len());
        all.extend(triplets);
    }
    let s = compute_stats(&all).unwrap();
    println!("mu_d {:.2} sigma_d {:.2} mu_dv {:.2} sigma_dv {:.2}", s.mu_d, s.sigma_d, s.mu_dv, s.sigma_dv);
    let t = &all[0];
    println!("first triplet: demo {} frames {}..{} p = {:?}", t.demo, t.m, t.n, t.p);
    let out = root.join("triplets.jsonl");
    write_triplets(&out, &all).unwrap();
    println!("triplets written to {}", out.display());
}
