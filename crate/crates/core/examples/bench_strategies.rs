//! Runs the push strategies on the letter scenarios and prints the error
//! curves.
//!
//! `cargo run --release --example bench_strategies -- [model] [seeds]`
//!
//! The learned strategy is included when a model file is given (see the
//! `train_policy` example).

use std::sync::Arc;

use sandshape::learner::load;
use sandshape::session::{bench, builtin};
use sandshape::strategies::PushStrategy;

fn main() {
    let mut args = std::env::args().skip(1);
    let model = args.next().filter(|s| s != "-").map(|p| Arc::new(load(p).expect("model file")));
    let seeds: Vec<u64> = args
        .next()
        .map_or_else(|| vec![7], |s| s.split(',').map(|x| x.parse().expect("seed")).collect());

    let scenarios: Vec<_> = ["c", "e", "sigma"].iter().map(|n| builtin(n).unwrap()).collect();
    let mut strategies = vec![PushStrategy::Maximum, PushStrategy::Average];
    if model.is_some() {
        strategies.push(PushStrategy::Learned);
    }
    let report = bench(&scenarios, &strategies, &seeds, model).expect("bench");
    print!("{}", report.summary_table());
    for s in strategies {
        let curve = report.mean_curve(s, 15);
        let shown: Vec<String> = curve.iter().map(|e| format!("{e:.3}")).collect();
        println!("mean {:<3} {}", s.short_name(), shown.join(" "));
    }
}
