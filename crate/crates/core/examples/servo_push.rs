//! Executing a push through the waypoint servo instead of applying it
//! directly; both produce the same bed.
//!
//! `cargo run --release --example servo_push`

use sandshape::geom::Point;
use sandshape::sandfield::{apply_push, MaterialConfig};
use sandshape::servo::{execute_action, plan_action, ServoConfig};
use sandshape::session::builtin;
use sandshape::strategies::Action;

fn main() {
    let sc = builtin("c").unwrap();
    let grid = sc.initial_grid().unwrap();
    let cfg = ServoConfig::default();
    let (start, end) = (Point::new(160.0, 62.0), Point::new(160.0, 105.0));
    let action = Action::Push { start, end };

    for w in &plan_action(&action, &grid, sc.tool, &cfg).waypoints {
        println!("{:?}  pixel ({:.1}, {:.1})  z {:.2}  {:?}", w.label, w.pixel.u, w.pixel.v, w.z, w.law);
    }
    let run = execute_action(&action, &grid, sc.tool, &MaterialConfig::default(), &cfg).unwrap();
    let direct = apply_push(&grid, start, end, sc.tool).unwrap();
    let last = run.trajectory.last().unwrap();
    println!("{} servo steps, tool back at ({:.1}, {:.1})", last.step, last.pixel.u, last.pixel.v);
    println!("servo bed == direct push: {}", run.grid.digest() == direct.digest());
}
