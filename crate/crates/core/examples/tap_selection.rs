//! Tool-resolution tap selection and the tap's effect on the bed.
//!
//! `cargo run --release --example tap_selection`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sandshape::sandfield::{apply_tap, render, total_mass};
use sandshape::session::builtin;
use sandshape::strategies::{select_tap, Action};
use sandshape::vision::{mi_error, resample_to_tool};

fn main() {
    let sc = builtin("tap-pile").unwrap();
    let tool = sc.tool;
    let desired = sc.desired_image().unwrap();
    let mut grid = sc.initial_grid().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let m0 = total_mass(&grid);

    for k in 1..=8 {
        let current = render(&grid, &sc.render);
        let a = resample_to_tool(&current, tool).unwrap();
        let mut b = resample_to_tool(&desired, tool).unwrap();
        if sc.strategy.excess_only {
            // Same masking as a session: cells short of material are not tap targets.
            for (d, c) in b.cells.iter_mut().zip(&a.cells) {
                *d = d.min(*c);
            }
        }
        let Action::Tap { target } = select_tap(&a, &b, &mut rng).unwrap() else { unreachable!() };
        let (col, row) = (target.u as usize / tool.w_tcp, target.v as usize / tool.h_tcp);
        let e_before = mi_error(&current, &desired, sc.mi_bins).unwrap();
        grid = apply_tap(&grid, target, tool, sc.material.tap_level, sc.material.tap_anchor).unwrap();
        let e_after = mi_error(&render(&grid, &sc.render), &desired, sc.mi_bins).unwrap();
        println!(
            "tap {k}: cell ({col},{row}) |diff| {:.1} -> pixel ({}, {})  e {e_before:.4} -> {e_after:.4}",
            (a.get(col, row) - b.get(col, row)).abs(),
            target.u,
            target.v
        );
    }
    println!("relative mass drift {:.2e}", (total_mass(&grid) - m0).abs() / m0);
}
