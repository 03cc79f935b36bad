//! The mutual-information feature error on rendered sand beds.
//!
//! `cargo run --release --example mi_error`

use sandshape::geom::{Point, Roi};
use sandshape::sandfield::{apply_push, render, RenderConfig, SandGrid, ToolFootprint};
use sandshape::vision::{entropy, mi_error, mutual_information, GrayImage, DEFAULT_BINS};

fn main() {
    let mut grid = SandGrid::new(160, 120);
    for v in 30..70 {
        for u in 40..120 {
            grid.set(u, v, 6.0 + ((u + v) % 7) as f64 * 0.5);
        }
    }
    let cfg = RenderConfig::default();
    let desired = render(&grid, &cfg);
    let tool = ToolFootprint::new(10, 12);

    println!("bins {DEFAULT_BINS}, H(desired) = {:.4} bits", entropy(&desired, DEFAULT_BINS).unwrap());
    for depth in [0.0, 5.0, 15.0, 30.0] {
        let pushed = if depth == 0.0 {
            grid.clone()
        } else {
            apply_push(&grid, Point::new(80.0, 20.0), Point::new(80.0, 30.0 + depth), tool).unwrap()
        };
        let current = render(&pushed, &cfg);
        println!(
            "push depth {depth:>4}: I(cur; des) = {:.4}  e = {:.4}",
            mutual_information(&current, &desired, DEFAULT_BINS).unwrap(),
            mi_error(&current, &desired, DEFAULT_BINS).unwrap()
        );
    }

    // The error only sees the joint statistics: any one-to-one relabelling of
    // gray levels leaves it at zero, while a change of shape does not.
    let inverted = GrayImage::from_raw(desired.width(), desired.height(), desired.pixels().iter().map(|p| 255 - p).collect()).unwrap();
    println!("inverted goal:    e = {:.4}", mi_error(&inverted, &desired, DEFAULT_BINS).unwrap());
    let cropped = Roi::new(40, 30, 40, 40);
    let mut half = GrayImage::new(desired.width(), desired.height(), cfg.background_luminance);
    for v in 0..desired.height() {
        for u in 0..desired.width() {
            if cropped.contains(u, v) {
                half.set(u, v, desired.get(u, v));
            }
        }
    }
    println!("half the block:   e = {:.4}", mi_error(&half, &desired, DEFAULT_BINS).unwrap());
}
