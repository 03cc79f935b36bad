//! Local target extraction and the three pushing strategies on one state.
//!
//! `cargo run --release --example push_strategies -- [model]`

use std::sync::Arc;

use sandshape::learner::load;
use sandshape::session::{builtin, Session};

fn main() {
    let model = std::env::args().nth(1).map(|p| Arc::new(load(p).expect("model file")));
    let session = Session::new(builtin("e").unwrap(), model).unwrap();
    println!("e_1 = {:.4}", session.current_error());

    let t = session.next_local_target().expect("a local target");
    println!("ROI {:?} ({} candidate windows)", t.roi, t.candidates);
    for (name, c) in [("current", &t.current), ("near", &t.near), ("desired", &t.desired)] {
        let pts: Vec<String> = c.points.iter().map(|p| format!("({:.0},{:.0})", p.u, p.v)).collect();
        println!("  {name:<8} {}", pts.join(" "));
    }

    for p in session.proposals() {
        match (p.action, p.error) {
            (Some(action), _) => {
                let e = session.preview(&action).map(|pv| format!("{:.4}", pv.e)).unwrap_or_else(|e| e.to_string());
                println!("{:<28} {action:?} -> e {e}", format!("{:?}", p.choice));
            }
            (None, err) => println!("{:<28} unavailable: {}", format!("{:?}", p.choice), err.unwrap_or_default()),
        }
    }
}
