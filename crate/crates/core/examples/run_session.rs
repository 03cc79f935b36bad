//! Autonomous shaping run on a built-in scenario, printing one line per
//! iteration and saving the session log.
//!
//! `cargo run --release --example run_session -- [scenario] [model] [log-out]`

use std::sync::Arc;

use sandshape::learner::load;
use sandshape::session::{builtin, Outcome, Session, BUILTIN_NAMES};
use sandshape::strategies::PushStrategy;

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "c".into());
    let scenario = builtin(&name).unwrap_or_else(|| panic!("built-in scenarios: {}", BUILTIN_NAMES.join(", ")));
    let model = args.next().filter(|s| s != "-").map(|p| Arc::new(load(p).expect("model file")));
    let strategy = if model.is_some() { PushStrategy::Learned } else { PushStrategy::Maximum };
    let mut session = Session::new(scenario, model).expect("scenario").with_auto_strategy(strategy);

    println!("k=0 e={:.4}", session.current_error());
    let log = session.run_autonomous().expect("run");
    for r in &log.records {
        let what = match (&r.outcome, r.action) {
            (Outcome::Executed, Some(a)) => format!("{a:?}"),
            (Outcome::NoOp { reason }, _) => format!("no-op: {reason}"),
            _ => String::new(),
        };
        println!("k={} e={:.4} -> {:.4}  {}", r.k, r.e_before, r.e_after, what);
    }
    println!("stopped: {:?} after {} iterations, final e {:.4}", log.footer.reason, log.records.len(), log.footer.final_error);
    if let Some(path) = args.next() {
        log.save(&path).expect("writing the log");
        println!("log written to {path}");
    }
}
